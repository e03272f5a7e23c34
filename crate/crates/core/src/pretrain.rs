//! Supervised pretraining of the decoder on a synthetic family.
//!
//! Training examples are generated on-policy: the current model is run
//! through a few simulated clicks, and the dense loss is taken on the next
//! prediction, so the decoder sees the same kind of prior masks it will see
//! during annotation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{synth_dataset, Family};
use crate::error::{Error, Result};
use crate::mask::{BinaryMask, Click};
use crate::neuro::{Checkpoint, DecoderState, FeatureMap, ProbMask, Surrogate, DEFAULT_HIDDEN, DEFAULT_RANDOM_KERNELS, DEFAULT_SIGMA};
use crate::oracle::simulate_click;
use crate::seeds::{mix, sub_seed};

const PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PretrainOptions {
    pub family: Family,
    pub steps: usize,
    pub seed: u64,
    pub resolution: (usize, usize),
    /// Distinct synthetic images drawn from.
    pub pool: usize,
    pub batch: usize,
    pub learning_rate: f64,
    /// Upper bound on the clicks in one training example.
    pub max_clicks: usize,
    pub hidden: usize,
    pub random_kernels: usize,
    pub sigma: f64,
}

impl Default for PretrainOptions {
    fn default() -> Self {
        Self {
            family: Family::A,
            steps: 500,
            seed: 0,
            resolution: (128, 128),
            pool: 200,
            batch: 4,
            learning_rate: 5e-3,
            max_clicks: 4,
            hidden: DEFAULT_HIDDEN,
            random_kernels: DEFAULT_RANDOM_KERNELS,
            sigma: DEFAULT_SIGMA,
        }
    }
}

impl PretrainOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.pool == 0 || self.batch == 0 || self.max_clicks == 0 || self.hidden == 0 {
            return bad("pool, batch, max clicks and hidden width must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.resolution.0 == 0 || self.resolution.1 == 0 {
            return bad("resolution must be positive");
        }
        Ok(())
    }

    pub fn feature_seed(&self) -> u64 {
        sub_seed(self.seed, "feature")
    }

    pub fn init_seed(&self) -> u64 {
        sub_seed(self.seed, "init")
    }

    pub fn synth_seed(&self) -> u64 {
        sub_seed(self.seed, "synth")
    }

    pub fn train_seed(&self) -> u64 {
        sub_seed(self.seed, "train")
    }
}

/// Mean binary cross entropy over all pixels and its gradient on the
/// probabilities.
pub fn dense_bce(target: &BinaryMask, pred: &ProbMask) -> Result<(f64, Vec<f64>)> {
    if target.dims() != pred.dims() {
        return Err(Error::dims(target.dims(), pred.dims()));
    }
    let n = target.as_slice().len() as f64;
    let mut loss = 0.0;
    let grad = target
        .as_slice()
        .iter()
        .zip(pred.as_slice())
        .map(|(&y, &p)| {
            let p = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
            if y == 1 {
                loss -= p.ln();
                -1.0 / (p * n)
            } else {
                loss -= (1.0 - p).ln();
                1.0 / ((1.0 - p) * n)
            }
        })
        .collect();
    Ok((loss / n, grad))
}

/// Builds the surrogate and trains its decoder for `options.steps` steps.
/// Zero steps return the initialization unchanged.
pub fn pretrain(options: &PretrainOptions) -> Result<Checkpoint> {
    pretrain_with_progress(options, |_, _| {})
}

/// As [`pretrain`], calling `progress(step, mean_loss)` after every step.
pub fn pretrain_with_progress(options: &PretrainOptions, mut progress: impl FnMut(usize, f64)) -> Result<Checkpoint> {
    options.validate()?;
    let surrogate = Surrogate::new(options.feature_seed(), options.random_kernels, options.sigma)?;
    let mut decoder = DecoderState::init(surrogate.feature_channels(), options.hidden, options.init_seed());
    if options.steps > 0 {
        let data = synth_dataset(options.family, options.pool, options.synth_seed(), options.resolution);
        let feats: Vec<FeatureMap> = data.samples.par_iter().map(|s| surrogate.embed(&s.image)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(options.train_seed());
        for step in 0..options.steps {
            let picks: Vec<(usize, usize, u64)> = (0..options.batch)
                .map(|_| {
                    (
                        rng.random_range(0..data.len()),
                        rng.random_range(1..=options.max_clicks),
                        rng.random(),
                    )
                })
                .collect();
            let results: Vec<(f64, Vec<f64>)> = picks
                .par_iter()
                .map(|&(i, clicks, salt)| example_gradient(&surrogate, &decoder, &feats[i], &data.samples[i].mask, clicks, mix(salt, step as u64)))
                .collect::<Result<_>>()?;
            let mut grad = vec![0.0; decoder.parameter_count()];
            let mut loss = 0.0;
            for (l, g) in &results {
                loss += l;
                for (a, b) in grad.iter_mut().zip(g) {
                    *a += b;
                }
            }
            let scale = 1.0 / results.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            decoder.adam_step(&grad, options.learning_rate)?;
            progress(step + 1, loss * scale);
        }
    }
    Ok(Checkpoint { surrogate, decoder })
}

/// Runs `clicks - 1` simulated clicks with the current model, then returns
/// the loss and weight gradient of the prediction after the last click.
fn example_gradient(
    surrogate: &Surrogate,
    decoder: &DecoderState,
    feats: &FeatureMap,
    gt: &BinaryMask,
    clicks: usize,
    salt: u64,
) -> Result<(f64, Vec<f64>)> {
    let (h, w) = gt.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(salt);
    let mut trace: Vec<Click> = Vec::with_capacity(clicks);
    let mut prev = ProbMask::background(h, w);
    let mut pred = BinaryMask::zeros(h, w);
    loop {
        let click = match simulate_click(&pred, gt) {
            Ok(c) => c,
            // Already perfect: add a click inside the object instead.
            Err(Error::NoMisclassifiedPixels) => random_click(&mut rng, gt),
            Err(e) => return Err(e),
        };
        trace.push(click);
        let (prob, cache) = surrogate.predict(decoder, feats, &trace, &prev)?;
        if trace.len() == clicks {
            let (loss, grad_prob) = dense_bce(gt, &prob)?;
            return Ok((loss, decoder.backward(&cache, &grad_prob)?));
        }
        pred = prob.threshold();
        prev = prob;
    }
}

fn random_click(rng: &mut ChaCha8Rng, gt: &BinaryMask) -> Click {
    let inside: Vec<usize> = (0..gt.as_slice().len()).filter(|&i| gt.as_slice()[i] == 1).collect();
    let i = inside[rng.random_range(0..inside.len())];
    Click::positive(i / gt.width(), i % gt.width())
}
