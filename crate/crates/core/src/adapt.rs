//! Test-time adaptation of the decoder from clicks and accepted masks.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{build_sparse_mask, merge_ternary, prune_result_mask, BinaryMask, Click, TernaryMask, UNLABELED};
use crate::neuro::{DecoderState, FeatureMap, ProbMask, PromptEncoder};

pub const DEFAULT_EROSION_ITERS: usize = 5;
pub const DEFAULT_LEARNING_RATE: f64 = 1e-2;

/// Probabilities are clamped this far away from 0 and 1 inside the loss.
const PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClickAdaptation {
    None,
    /// One step per click; weights return to their pre-image values afterwards.
    Reset,
    /// One step per click, kept across images.
    Continual,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResultMaskMode {
    None,
    Eroded,
    Untreated,
}

macro_rules! keyword_enum {
    ($ty:ty { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $(Self::$variant => $text),+ })
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok(Self::$variant),)+
                    other => Err(Error::Config(format!(
                        "unknown value `{other}`, expected one of: {}",
                        [$($text),+].join(", ")
                    ))),
                }
            }
        }
    };
}

keyword_enum!(ClickAdaptation { None => "none", Reset => "reset", Continual => "continual" });
keyword_enum!(ResultMaskMode { None => "none", Eroded => "eroded", Untreated => "untreated" });

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptationConfig {
    pub click_adaptation: ClickAdaptation,
    pub result_mask: ResultMaskMode,
    pub click_mask: bool,
    pub erosion_iters: usize,
    pub learning_rate: f64,
    /// Feature seed; `None` defers to the checkpoint.
    pub seed: Option<u64>,
}

impl Default for AdaptationConfig {
    fn default() -> Self {
        Self::baseline()
    }
}

impl AdaptationConfig {
    /// No adaptation at all.
    pub fn baseline() -> Self {
        Self {
            click_adaptation: ClickAdaptation::None,
            result_mask: ResultMaskMode::None,
            click_mask: false,
            erosion_iters: DEFAULT_EROSION_ITERS,
            learning_rate: DEFAULT_LEARNING_RATE,
            seed: None,
        }
    }

    /// Click adaptation with reset, eroded result mask and click mask.
    pub fn full_method() -> Self {
        Self {
            click_adaptation: ClickAdaptation::Reset,
            result_mask: ResultMaskMode::Eroded,
            click_mask: true,
            ..Self::baseline()
        }
    }

    pub fn is_baseline(&self) -> bool {
        self.click_adaptation == ClickAdaptation::None
            && self.result_mask == ResultMaskMode::None
            && !self.click_mask
    }

    /// `baseline`, `full-method`, or a compact code such as `CA=C,RM=U,CM=off`.
    pub fn label(&self) -> String {
        if self.is_baseline() {
            return "baseline".into();
        }
        if self.click_adaptation == ClickAdaptation::Reset
            && self.result_mask == ResultMaskMode::Eroded
            && self.click_mask
        {
            return "full-method".into();
        }
        let ca = match self.click_adaptation {
            ClickAdaptation::None => "-",
            ClickAdaptation::Reset => "R",
            ClickAdaptation::Continual => "C",
        };
        let rm = match self.result_mask {
            ResultMaskMode::None => "-",
            ResultMaskMode::Eroded => "E",
            ResultMaskMode::Untreated => "U",
        };
        format!("CA={ca},RM={rm},CM={}", if self.click_mask { "on" } else { "off" })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }

    /// Parses the `key = value` format; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::baseline();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let ctx = |e: Error| Error::Config(format!("line {}: {key}: {e}", lineno + 1));
            match key {
                "ca" => cfg.click_adaptation = value.parse().map_err(ctx)?,
                "rm" => cfg.result_mask = value.parse().map_err(ctx)?,
                "cm" => {
                    cfg.click_mask = match value {
                        "on" => true,
                        "off" => false,
                        _ => return Err(ctx(Error::Config(format!("expected on|off, got `{value}`")))),
                    }
                }
                "k" => {
                    cfg.erosion_iters = value
                        .parse()
                        .map_err(|_| ctx(Error::Config(format!("not a count: `{value}`"))))?
                }
                "lr" => {
                    cfg.learning_rate = value
                        .parse()
                        .map_err(|_| ctx(Error::Config(format!("not a number: `{value}`"))))?
                }
                "seed" => {
                    cfg.seed = Some(
                        value
                            .parse()
                            .map_err(|_| ctx(Error::Config(format!("not an integer: `{value}`"))))?,
                    )
                }
                other => return Err(Error::Config(format!("line {}: unknown key `{other}`", lineno + 1))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "ca = {}\nrm = {}\ncm = {}\nk = {}\nlr = {}\n",
            self.click_adaptation,
            self.result_mask,
            if self.click_mask { "on" } else { "off" },
            self.erosion_iters,
            self.learning_rate
        );
        if let Some(seed) = self.seed {
            s.push_str(&format!("seed = {seed}\n"));
        }
        s
    }
}

/// Sparse binary cross entropy: mean BCE over positive labels plus mean BCE
/// over negative labels. An absent class contributes nothing. Returns the
/// loss and its gradient with respect to each predicted probability; the
/// gradient is exactly zero on unlabeled pixels.
pub fn sparse_bce(label: &TernaryMask, pred: &ProbMask) -> Result<(f64, Vec<f64>)> {
    if label.dims() != pred.dims() {
        return Err(Error::dims(label.dims(), pred.dims()));
    }
    let positives = label.count(1);
    let negatives = label.count(0);
    if positives + negatives == 0 {
        return Err(Error::EmptyLabel);
    }
    let mut loss_pos = 0.0;
    let mut loss_neg = 0.0;
    let mut grad = vec![0.0; label.as_slice().len()];
    for ((g, &l), &p) in grad.iter_mut().zip(label.as_slice()).zip(pred.as_slice()) {
        let p = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
        match l {
            1 => {
                loss_pos -= p.ln();
                *g = -1.0 / (p * positives as f64);
            }
            0 => {
                loss_neg -= (1.0 - p).ln();
                *g = 1.0 / ((1.0 - p) * negatives as f64);
            }
            _ => debug_assert_eq!(l, UNLABELED),
        }
    }
    let mut loss = 0.0;
    if positives > 0 {
        loss += loss_pos / positives as f64;
    }
    if negatives > 0 {
        loss += loss_neg / negatives as f64;
    }
    Ok((loss, grad))
}

/// Everything one adaptation step needs.
///
/// `prompt_prev` is the prior mask that was fed to the model together with
/// `clicks` to produce the latest prediction.
pub struct AdaptationContext<'a> {
    pub decoder: &'a mut DecoderState,
    pub prompt: &'a PromptEncoder,
    pub feats: &'a FeatureMap,
    pub clicks: &'a [Click],
    pub prompt_prev: &'a ProbMask,
    pub result_mask: Option<&'a BinaryMask>,
}

/// Forward, sparse loss, backward and one Adam update. Returns the loss
/// before the update.
pub fn adapt_step(ctx: &mut AdaptationContext<'_>, label: &TernaryMask, lr: f64) -> Result<f64> {
    let prompt = ctx.prompt.encode(ctx.clicks, ctx.prompt_prev)?;
    let (prob, cache) = ctx.decoder.forward(ctx.feats, &prompt)?;
    let (loss, grad_prob) = sparse_bce(label, &prob)?;
    let grad = ctx.decoder.backward(&cache, &grad_prob)?;
    ctx.decoder.adam_step(&grad, lr)?;
    Ok(loss)
}

/// Called once per image before the first click. Under reset mode this is
/// where the pre-image snapshot is taken.
pub fn on_image_start(config: &AdaptationConfig, decoder: &mut DecoderState) {
    if config.click_adaptation == ClickAdaptation::Reset {
        decoder.snapshot();
    }
}

/// Per-click adaptation on the sparse mask of all clicks so far.
pub fn on_click(config: &AdaptationConfig, ctx: &mut AdaptationContext<'_>) -> Result<Option<f64>> {
    if config.click_adaptation == ClickAdaptation::None || ctx.clicks.is_empty() {
        return Ok(None);
    }
    let label = build_sparse_mask(ctx.clicks, ctx.feats.dims())?;
    adapt_step(ctx, &label, config.learning_rate).map(Some)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ImageDoneSummary {
    /// Weights were restored to the pre-image snapshot.
    pub restored: bool,
    /// Number of post-image optimization steps (0 or 1).
    pub steps: usize,
    pub loss: Option<f64>,
    pub positive_labels: usize,
    pub negative_labels: usize,
}

/// The post-image label: click mask and/or result mask, merged with click
/// labels taking precedence. `None` when neither source is enabled.
pub fn post_image_label(config: &AdaptationConfig, clicks: &[Click], dims: (usize, usize), result: Option<&BinaryMask>) -> Result<Option<TernaryMask>> {
    let click_label = if config.click_mask {
        Some(build_sparse_mask(clicks, dims)?)
    } else {
        None
    };
    let result_label = match (config.result_mask, result) {
        (ResultMaskMode::None, _) | (_, None) => None,
        (ResultMaskMode::Eroded, Some(m)) => Some(prune_result_mask(m, config.erosion_iters)),
        (ResultMaskMode::Untreated, Some(m)) => Some(m.to_ternary()),
    };
    Ok(match (click_label, result_label) {
        (Some(c), Some(r)) => Some(merge_ternary(&c, &r)?),
        (c, r) => c.or(r),
    })
}

/// End-of-image procedure: restore (reset mode), one step on the merged
/// post-image label if it has any labeled pixel, then a fresh snapshot
/// (reset mode).
pub fn on_image_done(config: &AdaptationConfig, ctx: &mut AdaptationContext<'_>) -> Result<ImageDoneSummary> {
    let mut summary = ImageDoneSummary::default();
    let reset = config.click_adaptation == ClickAdaptation::Reset;
    if reset {
        ctx.decoder.restore()?;
        summary.restored = true;
    }
    if let Some(label) = post_image_label(config, ctx.clicks, ctx.feats.dims(), ctx.result_mask)? {
        summary.positive_labels = label.count(1);
        summary.negative_labels = label.count(0);
        if label.labeled_count() > 0 {
            summary.loss = Some(adapt_step(ctx, &label, config.learning_rate)?);
            summary.steps = 1;
        }
    }
    if reset {
        ctx.decoder.snapshot();
    }
    Ok(summary)
}

/// End of an image whose mask was not accepted: only the reset runs.
pub fn on_image_rejected(config: &AdaptationConfig, decoder: &mut DecoderState) -> Result<ImageDoneSummary> {
    let mut summary = ImageDoneSummary::default();
    if config.click_adaptation == ClickAdaptation::Reset {
        decoder.restore()?;
        decoder.snapshot();
        summary.restored = true;
    }
    Ok(summary)
}
