//! Trainable mask decoder with hand-written reverse-mode gradients.
//!
//! Architecture: 3x3 convolution (zero padded) over the concatenated feature
//! and prompt planes, ReLU, pointwise layer, ReLU, pointwise layer down to one
//! logit, sigmoid. All weights live in one flat vector:
//!
//! | block   | length                       |
//! |---------|------------------------------|
//! | conv W  | `hidden * in_channels * 9`   |
//! | conv b  | `hidden`                     |
//! | mid W   | `hidden * hidden`            |
//! | mid b   | `hidden`                     |
//! | head W  | `hidden`                     |
//! | head b  | `1`                          |
//!
//! where `in_channels = feature_channels + 3`.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{FeatureMap, ProbMask, PromptMap};
use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

static NEXT_GENERATION: AtomicU64 = AtomicU64::new(1);

fn next_generation() -> u64 {
    NEXT_GENERATION.fetch_add(1, Ordering::Relaxed)
}

/// Number of decoder weights for the given feature width and hidden width.
pub fn parameter_count(feature_channels: usize, hidden: usize) -> usize {
    let cin = feature_channels + PromptMap::CHANNELS;
    hidden * cin * 9 + hidden + hidden * hidden + hidden + hidden + 1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Layout {
    cin: usize,
    hidden: usize,
}

impl Layout {
    fn conv_w(&self) -> usize {
        0
    }
    fn conv_b(&self) -> usize {
        self.hidden * self.cin * 9
    }
    fn mid_w(&self) -> usize {
        self.conv_b() + self.hidden
    }
    fn mid_b(&self) -> usize {
        self.mid_w() + self.hidden * self.hidden
    }
    fn head_w(&self) -> usize {
        self.mid_b() + self.hidden
    }
    fn head_b(&self) -> usize {
        self.head_w() + self.hidden
    }
    fn len(&self) -> usize {
        self.head_b() + 1
    }
}

#[derive(Clone, Debug)]
struct Snapshot {
    weights: Vec<f64>,
    adam_m: Vec<f64>,
    adam_v: Vec<f64>,
    step_count: u64,
}

/// Decoder weights, Adam moments and an optional snapshot of all three.
#[derive(Clone, Debug)]
pub struct DecoderState {
    feature_channels: usize,
    hidden: usize,
    weights: Vec<f64>,
    adam_m: Vec<f64>,
    adam_v: Vec<f64>,
    step_count: u64,
    snapshot: Option<Box<Snapshot>>,
    generation: u64,
}

fn bits_eq(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Bitwise equality of shape, weights, moments and step count.
impl PartialEq for DecoderState {
    fn eq(&self, other: &Self) -> bool {
        self.feature_channels == other.feature_channels
            && self.hidden == other.hidden
            && self.step_count == other.step_count
            && bits_eq(&self.weights, &other.weights)
            && bits_eq(&self.adam_m, &other.adam_m)
            && bits_eq(&self.adam_v, &other.adam_v)
    }
}

/// Intermediates of one forward pass, consumed by [`DecoderState::backward`].
#[derive(Clone, Debug)]
pub struct ForwardCache {
    generation: u64,
    height: usize,
    width: usize,
    input: Vec<f64>,
    z1: Vec<f64>,
    z2: Vec<f64>,
    prob: Vec<f64>,
}

impl ForwardCache {
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// Pre-activations of the convolution layer, `hidden` planes.
    pub fn conv_preactivations(&self) -> &[f64] {
        &self.z1
    }

    /// Pre-activations of the pointwise hidden layer, `hidden` planes.
    pub fn mid_preactivations(&self) -> &[f64] {
        &self.z2
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl DecoderState {
    /// Hidden layers drawn uniformly in `±sqrt(6 / fan_in)`; biases and the
    /// output layer start at zero, so the first prediction is 0.5 everywhere.
    pub fn init(feature_channels: usize, hidden: usize, seed: u64) -> Self {
        let layout = Layout {
            cin: feature_channels + PromptMap::CHANNELS,
            hidden,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = vec![0.0; layout.len()];
        let conv_bound = (6.0 / (layout.cin * 9) as f64).sqrt();
        for w in &mut weights[layout.conv_w()..layout.conv_b()] {
            *w = rng.random_range(-conv_bound..conv_bound);
        }
        let mid_bound = (6.0 / hidden as f64).sqrt();
        for w in &mut weights[layout.mid_w()..layout.mid_b()] {
            *w = rng.random_range(-mid_bound..mid_bound);
        }
        Self::from_parts(feature_channels, hidden, weights).expect("layout length")
    }

    pub fn from_parts(feature_channels: usize, hidden: usize, weights: Vec<f64>) -> Result<Self> {
        let expected = parameter_count(feature_channels, hidden);
        if hidden == 0 {
            return Err(Error::Config("hidden width must be positive".into()));
        }
        if weights.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                actual: weights.len(),
            });
        }
        let n = weights.len();
        Ok(Self {
            feature_channels,
            hidden,
            weights,
            adam_m: vec![0.0; n],
            adam_v: vec![0.0; n],
            step_count: 0,
            snapshot: None,
            generation: next_generation(),
        })
    }

    pub(crate) fn with_optimizer_state(
        mut self,
        adam_m: Vec<f64>,
        adam_v: Vec<f64>,
        step_count: u64,
    ) -> Result<Self> {
        for v in [&adam_m, &adam_v] {
            if v.len() != self.weights.len() {
                return Err(Error::ShapeMismatch {
                    expected: self.weights.len(),
                    actual: v.len(),
                });
            }
        }
        self.adam_m = adam_m;
        self.adam_v = adam_v;
        self.step_count = step_count;
        self.touch();
        Ok(self)
    }

    fn layout(&self) -> Layout {
        Layout {
            cin: self.feature_channels + PromptMap::CHANNELS,
            hidden: self.hidden,
        }
    }

    fn touch(&mut self) {
        self.generation = next_generation();
    }

    pub fn feature_channels(&self) -> usize {
        self.feature_channels
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn adam_moments(&self) -> (&[f64], &[f64]) {
        (&self.adam_m, &self.adam_v)
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len()
    }

    /// Bytes held by the weight vector alone.
    pub fn weight_bytes(&self) -> usize {
        self.weights.len() * std::mem::size_of::<f64>()
    }

    pub fn set_weights(&mut self, weights: Vec<f64>) -> Result<()> {
        if weights.len() != self.weights.len() {
            return Err(Error::ShapeMismatch {
                expected: self.weights.len(),
                actual: weights.len(),
            });
        }
        self.weights = weights;
        self.touch();
        Ok(())
    }

    pub fn forward(&self, feats: &FeatureMap, prompt: &PromptMap) -> Result<(ProbMask, ForwardCache)> {
        if feats.dims() != prompt.dims() {
            return Err(Error::dims(feats.dims(), prompt.dims()));
        }
        if feats.channels() != self.feature_channels {
            return Err(Error::ShapeMismatch {
                expected: self.feature_channels,
                actual: feats.channels(),
            });
        }
        let (h, w) = feats.dims();
        let n = h * w;
        let l = self.layout();
        let hidden = self.hidden;

        let mut input = Vec::with_capacity(l.cin * n);
        input.extend_from_slice(feats.as_slice());
        input.extend_from_slice(prompt.as_slice());

        let wt = &self.weights;
        let mut z1 = vec![0.0; hidden * n];
        for oc in 0..hidden {
            let out = &mut z1[oc * n..(oc + 1) * n];
            out.fill(wt[l.conv_b() + oc]);
            for ic in 0..l.cin {
                let src = &input[ic * n..(ic + 1) * n];
                for ky in 0..3 {
                    for kx in 0..3 {
                        let k = wt[l.conv_w() + (oc * l.cin + ic) * 9 + ky * 3 + kx];
                        if k == 0.0 {
                            continue;
                        }
                        conv_tap(out, src, h, w, ky, kx, k);
                    }
                }
            }
        }

        let mut z2 = vec![0.0; hidden * n];
        for j in 0..hidden {
            let out = &mut z2[j * n..(j + 1) * n];
            out.fill(wt[l.mid_b() + j]);
            for i in 0..hidden {
                let k = wt[l.mid_w() + j * hidden + i];
                for (o, &z) in out.iter_mut().zip(&z1[i * n..(i + 1) * n]) {
                    *o += k * z.max(0.0);
                }
            }
        }

        let mut logit = vec![wt[l.head_b()]; n];
        for j in 0..hidden {
            let k = wt[l.head_w() + j];
            for (o, &z) in logit.iter_mut().zip(&z2[j * n..(j + 1) * n]) {
                *o += k * z.max(0.0);
            }
        }
        let prob: Vec<f64> = logit.into_iter().map(sigmoid).collect();
        let mask = ProbMask::new(h, w, prob.clone())?;
        Ok((
            mask,
            ForwardCache {
                generation: self.generation,
                height: h,
                width: w,
                input,
                z1,
                z2,
                prob,
            },
        ))
    }

    /// Gradient of a scalar loss with respect to every weight, given the
    /// loss gradient on the predicted probabilities.
    pub fn backward(&self, cache: &ForwardCache, grad_prob: &[f64]) -> Result<Vec<f64>> {
        if cache.generation != self.generation {
            return Err(Error::StaleCache);
        }
        let n = cache.height * cache.width;
        if grad_prob.len() != n {
            return Err(Error::ShapeMismatch {
                expected: n,
                actual: grad_prob.len(),
            });
        }
        let dlogit: Vec<f64> = grad_prob
            .iter()
            .zip(&cache.prob)
            .map(|(&g, &p)| if g == 0.0 { 0.0 } else { g * p * (1.0 - p) })
            .collect();
        let active: Vec<usize> = (0..n).filter(|&p| dlogit[p] != 0.0).collect();
        let mut grad = vec![0.0; self.weights.len()];
        if active.is_empty() {
            return Ok(grad);
        }
        if active.len() * 8 < n {
            self.backward_sparse(cache, &dlogit, &active, &mut grad);
        } else {
            self.backward_dense(cache, &dlogit, &mut grad);
        }
        Ok(grad)
    }

    fn backward_dense(&self, cache: &ForwardCache, dlogit: &[f64], grad: &mut [f64]) {
        let l = self.layout();
        let hidden = self.hidden;
        let (h, w) = (cache.height, cache.width);
        let n = h * w;
        let wt = &self.weights;

        grad[l.head_b()] = dlogit.iter().sum();
        let mut dz2 = vec![0.0; hidden * n];
        for j in 0..hidden {
            let z2 = &cache.z2[j * n..(j + 1) * n];
            let head = wt[l.head_w() + j];
            let mut acc = 0.0;
            let d = &mut dz2[j * n..(j + 1) * n];
            for p in 0..n {
                let a = z2[p].max(0.0);
                acc += dlogit[p] * a;
                d[p] = if z2[p] > 0.0 { head * dlogit[p] } else { 0.0 };
            }
            grad[l.head_w() + j] = acc;
            grad[l.mid_b() + j] = d.iter().sum();
        }

        let mut dz1 = vec![0.0; hidden * n];
        for i in 0..hidden {
            let z1 = &cache.z1[i * n..(i + 1) * n];
            let d1 = &mut dz1[i * n..(i + 1) * n];
            for j in 0..hidden {
                let d2 = &dz2[j * n..(j + 1) * n];
                let mut acc = 0.0;
                for p in 0..n {
                    acc += d2[p] * z1[p].max(0.0);
                }
                grad[l.mid_w() + j * hidden + i] = acc;
                let k = wt[l.mid_w() + j * hidden + i];
                for (d, &g) in d1.iter_mut().zip(d2) {
                    *d += k * g;
                }
            }
            for (d, &z) in d1.iter_mut().zip(z1) {
                if z <= 0.0 {
                    *d = 0.0;
                }
            }
        }

        for oc in 0..hidden {
            let d = &dz1[oc * n..(oc + 1) * n];
            grad[l.conv_b() + oc] = d.iter().sum();
            if d.iter().all(|&v| v == 0.0) {
                continue;
            }
            for ic in 0..l.cin {
                let src = &cache.input[ic * n..(ic + 1) * n];
                for ky in 0..3 {
                    for kx in 0..3 {
                        grad[l.conv_w() + (oc * l.cin + ic) * 9 + ky * 3 + kx] =
                            conv_tap_grad(d, src, h, w, ky, kx);
                    }
                }
            }
        }
    }

    fn backward_sparse(&self, cache: &ForwardCache, dlogit: &[f64], active: &[usize], grad: &mut [f64]) {
        let l = self.layout();
        let hidden = self.hidden;
        let (h, w) = (cache.height, cache.width);
        let n = h * w;
        let wt = &self.weights;
        let mut dz2 = vec![0.0; hidden];
        let mut dz1 = vec![0.0; hidden];

        for &p in active {
            let g = dlogit[p];
            grad[l.head_b()] += g;
            for j in 0..hidden {
                let z = cache.z2[j * n + p];
                grad[l.head_w() + j] += g * z.max(0.0);
                dz2[j] = if z > 0.0 { wt[l.head_w() + j] * g } else { 0.0 };
                grad[l.mid_b() + j] += dz2[j];
            }
            for i in 0..hidden {
                let z = cache.z1[i * n + p];
                let a = z.max(0.0);
                let mut acc = 0.0;
                for j in 0..hidden {
                    grad[l.mid_w() + j * hidden + i] += dz2[j] * a;
                    acc += wt[l.mid_w() + j * hidden + i] * dz2[j];
                }
                dz1[i] = if z > 0.0 { acc } else { 0.0 };
            }
            let (r, c) = (p / w, p % w);
            for oc in 0..hidden {
                let d = dz1[oc];
                if d == 0.0 {
                    continue;
                }
                grad[l.conv_b() + oc] += d;
                for ky in 0..3 {
                    let rr = r as i64 + ky as i64 - 1;
                    if rr < 0 || rr >= h as i64 {
                        continue;
                    }
                    for kx in 0..3 {
                        let cc = c as i64 + kx as i64 - 1;
                        if cc < 0 || cc >= w as i64 {
                            continue;
                        }
                        let q = rr as usize * w + cc as usize;
                        let base = l.conv_w() + oc * l.cin * 9 + ky * 3 + kx;
                        for ic in 0..l.cin {
                            grad[base + ic * 9] += d * cache.input[ic * n + q];
                        }
                    }
                }
            }
        }
    }

    /// Bias-corrected Adam update.
    pub fn adam_step(&mut self, grad: &[f64], lr: f64) -> Result<()> {
        if grad.len() != self.weights.len() {
            return Err(Error::ShapeMismatch {
                expected: self.weights.len(),
                actual: grad.len(),
            });
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let c1 = 1.0 - ADAM_BETA1.powi(t);
        let c2 = 1.0 - ADAM_BETA2.powi(t);
        for (((w, m), v), &g) in self
            .weights
            .iter_mut()
            .zip(&mut self.adam_m)
            .zip(&mut self.adam_v)
            .zip(grad)
        {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *w -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
        self.touch();
        Ok(())
    }

    /// Stores weights, moments and step count for a later [`restore`](Self::restore).
    pub fn snapshot(&mut self) {
        self.snapshot = Some(Box::new(Snapshot {
            weights: self.weights.clone(),
            adam_m: self.adam_m.clone(),
            adam_v: self.adam_v.clone(),
            step_count: self.step_count,
        }));
    }

    pub fn has_snapshot(&self) -> bool {
        self.snapshot.is_some()
    }

    pub fn restore(&mut self) -> Result<()> {
        let snap = self.snapshot.as_ref().ok_or(Error::NoSnapshot)?;
        self.weights.clone_from(&snap.weights);
        self.adam_m.clone_from(&snap.adam_m);
        self.adam_v.clone_from(&snap.adam_v);
        self.step_count = snap.step_count;
        self.touch();
        Ok(())
    }
}

/// Accumulates one kernel tap `k * src[y + ky - 1, x + kx - 1]` into `out`.
#[inline]
fn conv_tap(out: &mut [f64], src: &[f64], h: usize, w: usize, ky: usize, kx: usize, k: f64) {
    let (y0, y1) = tap_range(h, ky);
    let (x0, x1) = tap_range(w, kx);
    for y in y0..y1 {
        let sy = y + ky - 1;
        let o = &mut out[y * w + x0..y * w + x1];
        let s = &src[sy * w + x0 + kx - 1..sy * w + x1 + kx - 1];
        for (o, &s) in o.iter_mut().zip(s) {
            *o += k * s;
        }
    }
}

#[inline]
fn conv_tap_grad(d: &[f64], src: &[f64], h: usize, w: usize, ky: usize, kx: usize) -> f64 {
    let (y0, y1) = tap_range(h, ky);
    let (x0, x1) = tap_range(w, kx);
    let mut acc = 0.0;
    for y in y0..y1 {
        let sy = y + ky - 1;
        let dd = &d[y * w + x0..y * w + x1];
        let s = &src[sy * w + x0 + kx - 1..sy * w + x1 + kx - 1];
        for (a, b) in dd.iter().zip(s) {
            acc += a * b;
        }
    }
    acc
}

/// Output rows (or columns) whose tap offset stays inside the image.
#[inline]
fn tap_range(len: usize, k: usize) -> (usize, usize) {
    match k {
        0 => (1.min(len), len),
        1 => (0, len),
        _ => (0, len.saturating_sub(1)),
    }
}
