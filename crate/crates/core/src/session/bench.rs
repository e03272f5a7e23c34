//! Benchmark runner over a dataset, and its report.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{noc_fr, run_session_with, ConfiguredAdapter, SessionRecord, SurrogateModel};
use crate::adapt::AdaptationConfig;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::mask::{dilate_k, BinaryMask};
use crate::neuro::{Checkpoint, DecoderRegistry};

/// Deliberate damage applied to the accepted mask before adaptation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResultCorruption {
    #[default]
    None,
    /// Dilate by this many cross-element iterations.
    Dilate(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkOptions {
    pub budget: usize,
    pub threshold: f64,
    pub result_corruption: ResultCorruption,
    /// Named seeds echoed into the report.
    pub seeds: BTreeMap<String, u64>,
    /// Run sessions concurrently when no adaptation is configured.
    pub parallel: bool,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        Self {
            budget: 20,
            threshold: 0.85,
            result_corruption: ResultCorruption::None,
            seeds: BTreeMap::new(),
            parallel: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub label: String,
    pub config: AdaptationConfig,
    pub budget: usize,
    pub threshold: f64,
    pub result_corruption: ResultCorruption,
    pub resolution: (usize, usize),
    /// Image ids in processing order.
    pub order: Vec<String>,
    pub records: Vec<SessionRecord>,
    pub noc: f64,
    pub fr: f64,
    pub total_steps: usize,
    pub seeds: BTreeMap<String, u64>,
    pub checkpoint_crc32: String,
    pub wall_clock_secs: f64,
}

impl BenchmarkReport {
    /// `NoC_20@85` style suffix.
    pub fn metric_suffix(&self) -> String {
        format!("{}@{}", self.budget, (self.threshold * 100.0).round() as u32)
    }

    pub fn summary_line(&self) -> String {
        let s = self.metric_suffix();
        format!(
            "{}: NoC_{s} = {:.3}, FR_{s} = {:.2}% over {} images",
            self.label,
            self.noc,
            self.fr,
            self.records.len()
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    /// The report with its timing zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> Self {
        Self {
            wall_clock_secs: 0.0,
            ..self.clone()
        }
    }
}

/// Runs every sample in manifest order. Samples with a class tag get their
/// own copy of the checkpoint decoder; untagged samples share the default
/// one. Returns the report and the final decoders.
pub fn run_benchmark(
    dataset: &Dataset,
    config: &AdaptationConfig,
    checkpoint: &Checkpoint,
    options: &BenchmarkOptions,
) -> Result<(BenchmarkReport, DecoderRegistry)> {
    config.validate()?;
    dataset.validate()?;
    let feature_seed = checkpoint.surrogate.features.seed;
    if let Some(seed) = config.seed {
        if seed != feature_seed {
            return Err(Error::Config(format!(
                "config seed {seed} does not match the checkpoint feature seed {feature_seed}"
            )));
        }
    }

    let start = Instant::now();
    let hook = move |m: &BinaryMask| match options.result_corruption {
        ResultCorruption::None => m.clone(),
        ResultCorruption::Dilate(k) => dilate_k(m, k),
    };
    let hook_ref: Option<super::ResultHook<'_>> = match options.result_corruption {
        ResultCorruption::None => None,
        ResultCorruption::Dilate(_) => Some(&hook),
    };
    let template = SurrogateModel {
        surrogate: checkpoint.surrogate,
        decoder: checkpoint.decoder.clone(),
    };
    let mut models: BTreeMap<String, SurrogateModel> = BTreeMap::new();
    models.insert(DecoderRegistry::DEFAULT.to_string(), template.clone());

    let records: Vec<SessionRecord> = if config.is_baseline() && options.parallel {
        dataset
            .samples
            .par_iter()
            .map(|s| {
                let mut model = template.clone();
                let mut adapter = ConfiguredAdapter::new(config.clone());
                run_session_with(&mut model, &mut adapter, &s.id, &s.image, &s.mask, options.budget, options.threshold, hook_ref)
            })
            .collect::<Result<_>>()?
    } else {
        let mut adapter = ConfiguredAdapter::new(config.clone());
        let mut out = Vec::with_capacity(dataset.len());
        for s in &dataset.samples {
            let name = s.class.as_deref().unwrap_or(DecoderRegistry::DEFAULT);
            let model = models.entry(name.to_string()).or_insert_with(|| template.clone());
            out.push(run_session_with(
                model,
                &mut adapter,
                &s.id,
                &s.image,
                &s.mask,
                options.budget,
                options.threshold,
                hook_ref,
            )?);
        }
        out
    };

    let mut registry = DecoderRegistry::new();
    for (name, model) in models {
        registry.insert(&name, model.decoder)?;
    }
    for s in &dataset.samples {
        if let Some(class) = &s.class {
            if !registry.contains(class) {
                registry.insert(class, checkpoint.decoder.clone())?;
            }
        }
    }

    let (noc, fr) = noc_fr(&records, options.budget, options.threshold)?;
    let mut seeds = options.seeds.clone();
    seeds.insert("feature".into(), feature_seed);
    let report = BenchmarkReport {
        label: config.label(),
        config: config.clone(),
        budget: options.budget,
        threshold: options.threshold,
        result_corruption: options.result_corruption,
        resolution: dataset.resolution,
        order: dataset.samples.iter().map(|s| s.id.clone()).collect(),
        total_steps: records.iter().map(|r| r.click_steps + r.post_steps).sum(),
        records,
        noc,
        fr,
        seeds,
        checkpoint_crc32: format!("{:08x}", checkpoint.digest()),
        wall_clock_secs: start.elapsed().as_secs_f64(),
    };
    Ok((report, registry))
}
