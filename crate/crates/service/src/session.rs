//! Live annotation sessions driven by a human instead of the simulator.

use std::time::Instant;

use clickadapt::adapt::{self, AdaptationConfig, AdaptationContext, ImageDoneSummary};
use clickadapt::mask::{build_sparse_mask, Click};
use clickadapt::neuro::{DecoderState, FeatureMap, ProbMask, Surrogate};
use clickadapt::Result;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Active,
    Finished,
}

pub struct LiveSession {
    pub id: String,
    pub decoder: String,
    pub config: AdaptationConfig,
    pub status: Status,
    pub last_active: Instant,
    /// Optimization steps taken during the session.
    pub click_steps: usize,
    feats: FeatureMap,
    clicks: Vec<Click>,
    /// `priors[i]` is the mask that was fed to the model with `clicks[..=i]`.
    priors: Vec<ProbMask>,
    current: ProbMask,
}

impl LiveSession {
    /// A fresh session with an all-background mask. Under reset mode the
    /// caller must have snapshotted the decoder.
    pub fn new(id: String, decoder: String, config: AdaptationConfig, feats: FeatureMap) -> Self {
        let (h, w) = feats.dims();
        Self {
            id,
            decoder,
            config,
            status: Status::Active,
            last_active: Instant::now(),
            click_steps: 0,
            feats,
            clicks: Vec::new(),
            priors: Vec::new(),
            current: ProbMask::background(h, w),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.feats.dims()
    }

    pub fn clicks(&self) -> &[Click] {
        &self.clicks
    }

    pub fn current(&self) -> &ProbMask {
        &self.current
    }

    fn prompt_prev(&self) -> ProbMask {
        let (h, w) = self.dims();
        self.priors.last().cloned().unwrap_or_else(|| ProbMask::background(h, w))
    }

    /// Appends a click, predicts, then runs per-click adaptation. Nothing is
    /// changed if the click is rejected.
    pub fn add_click(&mut self, surrogate: &Surrogate, decoder: &mut DecoderState, click: Click) -> Result<Option<f64>> {
        let (h, w) = self.dims();
        click.check_bounds(h, w)?;
        let mut clicks = self.clicks.clone();
        clicks.push(click);
        build_sparse_mask(&clicks, (h, w))?;
        let prior = self.current.clone();
        let (prob, _) = surrogate.predict(decoder, &self.feats, &clicks, &prior)?;
        let loss = adapt::on_click(
            &self.config,
            &mut AdaptationContext {
                decoder,
                prompt: &surrogate.prompt,
                feats: &self.feats,
                clicks: &clicks,
                prompt_prev: &prior,
                result_mask: None,
            },
        )?;
        if loss.is_some() {
            self.click_steps += 1;
        }
        self.clicks = clicks;
        self.priors.push(prior);
        self.current = prob;
        self.last_active = Instant::now();
        Ok(loss)
    }

    /// Drops the last click and recomputes the mask with the current decoder.
    /// Adaptation steps already taken are kept. Returns `false` when there
    /// is nothing to undo.
    pub fn undo(&mut self, surrogate: &Surrogate, decoder: &DecoderState) -> Result<bool> {
        if self.clicks.pop().is_none() {
            return Ok(false);
        }
        let prior = self.priors.pop().expect("one prior per click");
        self.current = if self.clicks.is_empty() {
            prior
        } else {
            surrogate.predict(decoder, &self.feats, &self.clicks, &self.prompt_prev())?.0
        };
        self.last_active = Instant::now();
        Ok(true)
    }

    /// Accept: the current binary mask is the result mask and the
    /// end-of-image procedure runs. Reject: only the reset runs.
    pub fn finish(&mut self, surrogate: &Surrogate, decoder: &mut DecoderState, accept: bool) -> Result<ImageDoneSummary> {
        let summary = if accept {
            let result = self.current.threshold();
            let prev = self.prompt_prev();
            adapt::on_image_done(
                &self.config,
                &mut AdaptationContext {
                    decoder,
                    prompt: &surrogate.prompt,
                    feats: &self.feats,
                    clicks: &self.clicks,
                    prompt_prev: &prev,
                    result_mask: Some(&result),
                },
            )?
        } else {
            adapt::on_image_rejected(&self.config, decoder)?
        };
        self.status = Status::Finished;
        self.last_active = Instant::now();
        Ok(summary)
    }
}
