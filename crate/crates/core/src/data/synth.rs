//! Synthetic two-domain datasets.
//!
//! Family A: filled, nearly round ellipses brighter than a smooth noisy
//! background. Family B: long thin rotated bars darker than their background,
//! so both shape and contrast polarity shift between the two.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, Sample};
use crate::mask::BinaryMask;
use crate::neuro::Image;
use crate::seeds::mix;

pub const MIN_AREA_FRACTION: f64 = 0.02;
pub const MAX_AREA_FRACTION: f64 = 0.40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    A,
    B,
}

impl Family {
    pub fn tag(self) -> &'static str {
        match self {
            Family::A => "a",
            Family::B => "b",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "a" | "A" => Ok(Family::A),
            "b" | "B" => Ok(Family::B),
            other => Err(crate::Error::Config(format!("unknown family `{other}`, expected a or b"))),
        }
    }
}

/// `count` samples of `family`. Sample `i` depends only on `(family, seed, i)`.
pub fn synth_dataset(family: Family, count: usize, seed: u64, resolution: (usize, usize)) -> Dataset {
    let samples = (0..count).map(|i| synth_sample(family, seed, i, resolution)).collect();
    Dataset { resolution, samples }
}

pub fn synth_sample(family: Family, seed: u64, index: usize, (h, w): (usize, usize)) -> Sample {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(mix(seed, family as u64), index as u64));
    let mask = loop {
        let m = shape(family, &mut rng, h, w);
        let frac = m.area() as f64 / (h * w) as f64;
        if (MIN_AREA_FRACTION..=MAX_AREA_FRACTION).contains(&frac) {
            break m;
        }
    };

    let (bg, fg): ([f64; 3], [f64; 3]) = {
        let mut bg = [0.0; 3];
        let mut fg = [0.0; 3];
        for ch in 0..3 {
            let contrast = rng.random_range(0.3..0.45);
            match family {
                Family::A => {
                    bg[ch] = rng.random_range(0.15..0.4);
                    fg[ch] = bg[ch] + contrast;
                }
                Family::B => {
                    bg[ch] = rng.random_range(0.55..0.8);
                    fg[ch] = bg[ch] - contrast;
                }
            }
        }
        (bg, fg)
    };
    let fields: Vec<Vec<f64>> = (0..3).map(|_| smooth_field(&mut rng, h, w, 4)).collect();
    let grain: Vec<f64> = (0..3 * h * w).map(|_| rng.random_range(-1.0..1.0)).collect();
    let image = Image::from_fn(h, w, |r, c| {
        let i = r * w + c;
        let base = if mask.get(r, c) { fg } else { bg };
        std::array::from_fn(|ch| base[ch] + 0.2 * (fields[ch][i] - 0.5) + 0.04 * grain[ch * h * w + i])
    });
    Sample {
        id: format!("{}-{index:04}", family.tag()),
        class: None,
        image,
        mask,
    }
}

fn shape(family: Family, rng: &mut ChaCha8Rng, h: usize, w: usize) -> BinaryMask {
    let m = h.min(w) as f64;
    let cy = rng.random_range(0.3..0.7) * h as f64;
    let cx = rng.random_range(0.3..0.7) * w as f64;
    let theta = rng.random_range(0.0..PI);
    let (sin, cos) = theta.sin_cos();
    let (a, b) = match family {
        Family::A => {
            let a = rng.random_range(0.12..0.28) * m;
            (a, a * rng.random_range(0.7..1.0))
        }
        Family::B => {
            let a = rng.random_range(0.3..0.45) * m;
            (a, a * rng.random_range(0.25..0.4))
        }
    };
    BinaryMask::from_fn(h, w, |r, c| {
        let (y, x) = (r as f64 + 0.5 - cy, c as f64 + 0.5 - cx);
        let u = x * cos + y * sin;
        let v = -x * sin + y * cos;
        match family {
            Family::A => (u / a).powi(2) + (v / b).powi(2) <= 1.0,
            Family::B => u.abs() <= a && v.abs() <= b,
        }
    })
}

/// Random values on a `(grid+1)^2` lattice, bilinearly interpolated.
fn smooth_field(rng: &mut ChaCha8Rng, h: usize, w: usize, grid: usize) -> Vec<f64> {
    let n = grid + 1;
    let lattice: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>()).collect();
    let mut out = Vec::with_capacity(h * w);
    for r in 0..h {
        let fy = r as f64 / (h.max(2) - 1) as f64 * grid as f64;
        let y0 = (fy.floor() as usize).min(grid - 1);
        let ty = fy - y0 as f64;
        for c in 0..w {
            let fx = c as f64 / (w.max(2) - 1) as f64 * grid as f64;
            let x0 = (fx.floor() as usize).min(grid - 1);
            let tx = fx - x0 as f64;
            let at = |y: usize, x: usize| lattice[y * n + x];
            let top = at(y0, x0) * (1.0 - tx) + at(y0, x0 + 1) * tx;
            let bottom = at(y0 + 1, x0) * (1.0 - tx) + at(y0 + 1, x0 + 1) * tx;
            out.push(top * (1.0 - ty) + bottom * ty);
        }
    }
    out
}

/// Eccentricity of the foreground's second-moment ellipse, in `[0, 1)`.
pub fn mask_eccentricity(mask: &BinaryMask) -> f64 {
    let (mut n, mut sy, mut sx) = (0.0, 0.0, 0.0);
    for r in 0..mask.height() {
        for c in 0..mask.width() {
            if mask.get(r, c) {
                n += 1.0;
                sy += r as f64;
                sx += c as f64;
            }
        }
    }
    if n == 0.0 {
        return 0.0;
    }
    let (my, mx) = (sy / n, sx / n);
    let (mut syy, mut sxx, mut sxy) = (0.0, 0.0, 0.0);
    for r in 0..mask.height() {
        for c in 0..mask.width() {
            if mask.get(r, c) {
                let (dy, dx) = (r as f64 - my, c as f64 - mx);
                syy += dy * dy;
                sxx += dx * dx;
                sxy += dx * dy;
            }
        }
    }
    let (syy, sxx, sxy) = (syy / n, sxx / n, sxy / n);
    let mean = (syy + sxx) / 2.0;
    let spread = (((syy - sxx) / 2.0).powi(2) + sxy * sxy).sqrt();
    let (major, minor) = (mean + spread, mean - spread);
    if major <= 0.0 {
        return 0.0;
    }
    (1.0 - (minor / major).max(0.0)).sqrt()
}
