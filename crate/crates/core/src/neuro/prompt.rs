//! Prompt encoding: click planes plus the previous prediction.

use crate::error::{Error, Result};
use crate::mask::{BinaryMask, Click, ClickLabel};

/// Per-pixel foreground probability.
///
/// Decoder outputs lie strictly inside `(0, 1)`; the only other value in use
/// is the all-zero prior before the first click.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbMask {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ProbMask {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidGrid("mask dimensions must be positive".into()));
        }
        if data.len() != height * width {
            return Err(Error::ShapeMismatch {
                expected: height * width,
                actual: data.len(),
            });
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidGrid("probabilities must lie in [0, 1]".into()));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// The prior before any click: every pixel background.
    pub fn background(height: usize, width: usize) -> Self {
        Self::new(height, width, vec![0.0; height * width]).expect("valid dims")
    }

    pub fn uniform(height: usize, width: usize, value: f64) -> Self {
        Self::new(height, width, vec![value; height * width]).expect("valid dims")
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Foreground where the probability exceeds one half.
    pub fn threshold(&self) -> BinaryMask {
        let data = self.data.iter().map(|&p| (p > 0.5) as u8).collect();
        BinaryMask::new(self.height, self.width, data).expect("same shape")
    }
}

/// Positive-click plane, negative-click plane and previous prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct PromptMap {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl PromptMap {
    pub const CHANNELS: usize = 3;

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn plane(&self, channel: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[channel * n..(channel + 1) * n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PromptEncoder {
    pub sigma: f64,
}

impl PromptEncoder {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!("prompt sigma must be positive, got {sigma}")));
        }
        Ok(Self { sigma })
    }

    pub fn encode(&self, clicks: &[Click], prev: &ProbMask) -> Result<PromptMap> {
        let (h, w) = prev.dims();
        let n = h * w;
        let mut data = vec![0.0; 3 * n];
        let inv = 1.0 / (2.0 * self.sigma * self.sigma);
        let mut row_f = vec![0.0; h];
        let mut col_f = vec![0.0; w];
        for click in clicks {
            click.check_bounds(h, w)?;
            // The Gaussian is separable: one row factor times one column factor.
            for (r, f) in row_f.iter_mut().enumerate() {
                let d = r as f64 - click.row as f64;
                *f = (-d * d * inv).exp();
            }
            for (c, f) in col_f.iter_mut().enumerate() {
                let d = c as f64 - click.col as f64;
                *f = (-d * d * inv).exp();
            }
            let plane = match click.label {
                ClickLabel::Positive => 0,
                ClickLabel::Negative => 1,
            };
            let dst = &mut data[plane * n..(plane + 1) * n];
            for r in 0..h {
                let rf = row_f[r];
                for (d, &cf) in dst[r * w..(r + 1) * w].iter_mut().zip(&col_f) {
                    *d += rf * cf;
                }
            }
        }
        for v in &mut data[..2 * n] {
            *v = v.min(1.0);
        }
        data[2 * n..].copy_from_slice(prev.as_slice());
        Ok(PromptMap {
            height: h,
            width: w,
            data,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_prompt_passes_prior_through() {
        let enc = PromptEncoder::new(2.0).unwrap();
        let p = enc.encode(&[], &ProbMask::uniform(3, 4, 0.5)).unwrap();
        assert!(p.plane(0).iter().all(|&v| v == 0.0));
        assert!(p.plane(1).iter().all(|&v| v == 0.0));
        assert!(p.plane(2).iter().all(|&v| v == 0.5));
    }

    #[test]
    fn click_peaks_at_its_pixel() {
        let enc = PromptEncoder::new(2.0).unwrap();
        let p = enc
            .encode(&[Click::positive(2, 3)], &ProbMask::background(6, 6))
            .unwrap();
        let plane = p.plane(0);
        assert_eq!(plane[2 * 6 + 3], 1.0);
        assert!(plane.iter().all(|&v| v <= 1.0));
        assert!(plane[2 * 6 + 4] < 1.0);
        assert!(p.plane(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn coincident_clicks_match_single_click_where_clipped() {
        let enc = PromptEncoder::new(2.0).unwrap();
        let prev = ProbMask::background(9, 9);
        let one = enc.encode(&[Click::positive(4, 4)], &prev).unwrap();
        let two = enc
            .encode(&[Click::positive(4, 4), Click::positive(4, 4)], &prev)
            .unwrap();
        assert_eq!(one.plane(0)[4 * 9 + 4], two.plane(0)[4 * 9 + 4]);
        for (a, b) in one.plane(0).iter().zip(two.plane(0)) {
            let expected = (2.0 * a).min(1.0);
            assert!((b - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_out_of_bounds() {
        let enc = PromptEncoder::new(1.0).unwrap();
        let err = enc.encode(&[Click::negative(5, 0)], &ProbMask::background(5, 5));
        assert!(matches!(err, Err(Error::OutOfBounds { .. })));
        assert!(PromptEncoder::new(0.0).is_err());
    }
}
