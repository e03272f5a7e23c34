use crate::error::{Error, Result};

/// RGB image with values in `[0, 1]`, stored as three row-major planes.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    planes: Vec<f64>,
}

impl Image {
    pub const CHANNELS: usize = 3;

    /// `planes` holds the R, G and B planes back to back.
    pub fn from_planes(height: usize, width: usize, planes: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidGrid("image dimensions must be positive".into()));
        }
        if planes.len() != 3 * height * width {
            return Err(Error::ShapeMismatch {
                expected: 3 * height * width,
                actual: planes.len(),
            });
        }
        if planes.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return Err(Error::InvalidGrid("image values must lie in [0, 1]".into()));
        }
        Ok(Self {
            height,
            width,
            planes,
        })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Self {
        let n = height * width;
        let mut planes = vec![0.0; 3 * n];
        for r in 0..height {
            for c in 0..width {
                let px = f(r, c);
                for (ch, v) in px.into_iter().enumerate() {
                    planes[ch * n + r * width + c] = v.clamp(0.0, 1.0);
                }
            }
        }
        Self::from_planes(height, width, planes).expect("clamped values")
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

    pub fn plane(&self, channel: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.planes[channel * n..(channel + 1) * n]
    }

    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.plane(channel)[row * self.width + col]
    }
}
