//! The interactive loop: simulated click, prediction, IoU check, repeat.

mod bench;
mod model;

pub use bench::{run_benchmark, BenchmarkOptions, BenchmarkReport, ResultCorruption};
pub use model::{ConfiguredAdapter, SurrogateModel};

use serde::{Deserialize, Serialize};

use crate::adapt::ImageDoneSummary;
use crate::error::{Error, Result};
use crate::mask::{iou, BinaryMask, Click};
use crate::neuro::{Image, ProbMask};
use crate::oracle::simulate_click;

/// A promptable segmentation model as seen by the loop.
pub trait Segmenter {
    type Embedding;

    fn embed(&self, image: &Image) -> Result<Self::Embedding>;

    fn predict(&self, embedding: &Self::Embedding, clicks: &[Click], prev: &ProbMask) -> Result<ProbMask>;
}

/// State handed to an adapter after each prediction.
pub struct Turn<'a, E> {
    pub embedding: &'a E,
    /// All clicks so far, oldest first.
    pub clicks: &'a [Click],
    /// The prior mask that produced the latest prediction.
    pub prev: &'a ProbMask,
}

pub trait Adapter<M: Segmenter> {
    fn begin_image(&mut self, model: &mut M) -> Result<()>;

    /// Returns the loss if an optimization step ran.
    fn on_click(&mut self, model: &mut M, turn: &Turn<'_, M::Embedding>) -> Result<Option<f64>>;

    fn on_image_done(&mut self, model: &mut M, turn: &Turn<'_, M::Embedding>, result: &BinaryMask) -> Result<ImageDoneSummary>;
}

/// Leaves the model untouched.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoAdaptation;

impl<M: Segmenter> Adapter<M> for NoAdaptation {
    fn begin_image(&mut self, _: &mut M) -> Result<()> {
        Ok(())
    }

    fn on_click(&mut self, _: &mut M, _: &Turn<'_, M::Embedding>) -> Result<Option<f64>> {
        Ok(None)
    }

    fn on_image_done(&mut self, _: &mut M, _: &Turn<'_, M::Embedding>, _: &BinaryMask) -> Result<ImageDoneSummary> {
        Ok(ImageDoneSummary::default())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub image_id: String,
    pub clicks_used: usize,
    pub succeeded: bool,
    pub final_iou: f64,
    pub budget: usize,
    pub threshold: f64,
    pub click_trace: Vec<Click>,
    /// Optimization steps taken during the image.
    pub click_steps: usize,
    /// Optimization steps taken after the image (0 or 1).
    pub post_steps: usize,
    #[serde(skip)]
    pub result_mask: Option<BinaryMask>,
}

/// Replaces the accepted mask before it reaches the adapter; used to
/// simulate sloppy annotators.
pub type ResultHook<'a> = &'a (dyn Fn(&BinaryMask) -> BinaryMask + Sync);

/// Runs one image to success or budget exhaustion.
pub fn run_session<M: Segmenter, A: Adapter<M>>(
    model: &mut M,
    adapter: &mut A,
    image_id: &str,
    image: &Image,
    gt: &BinaryMask,
    budget: usize,
    threshold: f64,
) -> Result<SessionRecord> {
    run_session_with(model, adapter, image_id, image, gt, budget, threshold, None)
}

#[allow(clippy::too_many_arguments)]
pub fn run_session_with<M: Segmenter, A: Adapter<M>>(
    model: &mut M,
    adapter: &mut A,
    image_id: &str,
    image: &Image,
    gt: &BinaryMask,
    budget: usize,
    threshold: f64,
    result_hook: Option<ResultHook<'_>>,
) -> Result<SessionRecord> {
    if budget == 0 {
        return Err(Error::Config("click budget must be at least 1".into()));
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Config(format!("IoU threshold must lie in (0, 1], got {threshold}")));
    }
    if image.dims() != gt.dims() {
        return Err(Error::dims(image.dims(), gt.dims()));
    }
    if gt.is_empty() {
        return Err(Error::EmptyGroundTruth(image_id.to_string()));
    }
    let (h, w) = gt.dims();
    let embedding = model.embed(image)?;
    adapter.begin_image(model)?;

    let mut clicks: Vec<Click> = Vec::with_capacity(budget);
    let mut prev = ProbMask::background(h, w);
    let mut prompt_prev = prev.clone();
    let mut pred = BinaryMask::zeros(h, w);
    let mut score = iou(&pred, gt)?;
    let mut click_steps = 0;
    while clicks.len() < budget {
        clicks.push(simulate_click(&pred, gt)?);
        let prob = model.predict(&embedding, &clicks, &prev)?;
        pred = prob.threshold();
        let turn = Turn {
            embedding: &embedding,
            clicks: &clicks,
            prev: &prev,
        };
        if adapter.on_click(model, &turn)?.is_some() {
            click_steps += 1;
        }
        prompt_prev = std::mem::replace(&mut prev, prob);
        score = iou(&pred, gt)?;
        if score >= threshold {
            break;
        }
    }

    let turn = Turn {
        embedding: &embedding,
        clicks: &clicks,
        prev: &prompt_prev,
    };
    let summary = match result_hook {
        Some(hook) => adapter.on_image_done(model, &turn, &hook(&pred))?,
        None => adapter.on_image_done(model, &turn, &pred)?,
    };
    Ok(SessionRecord {
        image_id: image_id.to_string(),
        clicks_used: clicks.len(),
        succeeded: score >= threshold,
        final_iou: score,
        budget,
        threshold,
        click_trace: clicks,
        click_steps,
        post_steps: summary.steps,
        result_mask: Some(pred),
    })
}

/// Mean clicks with `budget` substituted for failures, and the failure rate
/// in percent.
pub fn noc_fr(records: &[SessionRecord], budget: usize, threshold: f64) -> Result<(f64, f64)> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if records.iter().any(|r| r.budget != budget || r.threshold != threshold) {
        return Err(Error::MixedBudgets);
    }
    let clicks: usize = records
        .iter()
        .map(|r| if r.succeeded { r.clicks_used } else { budget })
        .sum();
    let failures = records.iter().filter(|r| !r.succeeded).count();
    let n = records.len() as f64;
    Ok((clicks as f64 / n, 100.0 * failures as f64 / n))
}
