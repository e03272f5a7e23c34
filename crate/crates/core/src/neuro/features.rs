//! Frozen image encoder.
//!
//! Channel layout: R, G, B, normalized row, normalized column, 3x3 local mean
//! of each color, then `random_kernels` fixed random 3x3x3 convolutions drawn
//! from the feature seed. Borders replicate the edge pixel, so a constant
//! image yields constant channels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Image;

const FIXED_CHANNELS: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn plane(&self, channel: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[channel * n..(channel + 1) * n]
    }

    /// All planes back to back.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn byte_size(&self) -> usize {
        self.data.len() * std::mem::size_of::<f64>()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FeatureExtractor {
    pub seed: u64,
    pub random_kernels: usize,
}

impl FeatureExtractor {
    pub fn new(seed: u64, random_kernels: usize) -> Self {
        Self {
            seed,
            random_kernels,
        }
    }

    pub fn channels(&self) -> usize {
        FIXED_CHANNELS + self.random_kernels
    }

    fn kernels(&self) -> Vec<[f64; 27]> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.random_kernels)
            .map(|_| {
                let mut k = [0.0; 27];
                for v in &mut k {
                    *v = rng.random_range(-1.0..1.0) / 3.0;
                }
                k
            })
            .collect()
    }

    pub fn extract(&self, image: &Image) -> FeatureMap {
        let (h, w) = image.dims();
        let n = h * w;
        let channels = self.channels();
        let mut data = vec![0.0; channels * n];

        for ch in 0..3 {
            data[ch * n..(ch + 1) * n].copy_from_slice(image.plane(ch));
        }
        let row_scale = if h > 1 { 1.0 / (h - 1) as f64 } else { 0.0 };
        let col_scale = if w > 1 { 1.0 / (w - 1) as f64 } else { 0.0 };
        for r in 0..h {
            for c in 0..w {
                data[3 * n + r * w + c] = r as f64 * row_scale;
                data[4 * n + r * w + c] = c as f64 * col_scale;
            }
        }

        let clamp_r = |r: i64| r.clamp(0, h as i64 - 1) as usize;
        let clamp_c = |c: i64| c.clamp(0, w as i64 - 1) as usize;
        for ch in 0..3 {
            let src = image.plane(ch);
            let dst = &mut data[(5 + ch) * n..(6 + ch) * n];
            for r in 0..h {
                for c in 0..w {
                    let mut acc = 0.0;
                    for dr in -1..=1 {
                        for dc in -1..=1 {
                            acc += src[clamp_r(r as i64 + dr) * w + clamp_c(c as i64 + dc)];
                        }
                    }
                    dst[r * w + c] = acc / 9.0;
                }
            }
        }

        for (k, kernel) in self.kernels().iter().enumerate() {
            let base = (FIXED_CHANNELS + k) * n;
            for r in 0..h {
                for c in 0..w {
                    let mut acc = 0.0;
                    for ch in 0..3 {
                        let src = image.plane(ch);
                        for dr in 0..3 {
                            for dc in 0..3 {
                                let rr = clamp_r(r as i64 + dr as i64 - 1);
                                let cc = clamp_c(c as i64 + dc as i64 - 1);
                                acc += kernel[ch * 9 + dr * 3 + dc] * src[rr * w + cc];
                            }
                        }
                    }
                    data[base + r * w + c] = acc;
                }
            }
        }

        FeatureMap {
            height: h,
            width: w,
            channels,
            data,
        }
    }
}
