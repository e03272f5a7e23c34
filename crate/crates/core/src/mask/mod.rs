//! Pixel masks and the operations the adaptation pipeline builds on.
//!
//! All grids are stored row-major. Binary masks hold `{0, 1}`, ternary masks
//! hold `{-1, 0, 1}` where `-1` marks a pixel without a label.

mod distance;
mod morph;
mod rle;
mod sparse;

pub use distance::{edt, DistanceField};
pub use morph::{dilate_k, erode_k, prune_result_mask};
pub use rle::{decode_rle, encode_rle, rle_runs};
pub use sparse::{build_sparse_mask, merge_ternary};

#[cfg(test)]
pub(crate) use distance::oracle as distance_oracle;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Value a [`TernaryMask`] uses for unlabeled pixels.
pub const UNLABELED: i8 = -1;

fn check_dims(height: usize, width: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidGrid(format!(
            "dimensions must be positive, got {height}x{width}"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        check_dims(height, width)?;
        if data.len() != height * width {
            return Err(Error::ShapeMismatch {
                expected: height * width,
                actual: data.len(),
            });
        }
        if let Some(v) = data.iter().find(|&&v| v > 1) {
            return Err(Error::InvalidGrid(format!("binary mask holds value {v}")));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn zeros(height: usize, width: usize) -> Self {
        assert!(height > 0 && width > 0, "mask dimensions must be positive");
        Self {
            height,
            width,
            data: vec![0; height * width],
        }
    }

    pub fn ones(height: usize, width: usize) -> Self {
        let mut m = Self::zeros(height, width);
        m.data.fill(1);
        m
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::zeros(height, width);
        for r in 0..height {
            for c in 0..width {
                m.data[r * width + c] = f(r, c) as u8;
            }
        }
        m
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

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col] != 0
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.data[row * self.width + col] = value as u8;
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    /// Number of foreground pixels.
    pub fn area(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    pub fn complement(&self) -> Self {
        Self {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| 1 - v).collect(),
        }
    }

    pub fn ensure_same_dims(&self, other: &BinaryMask) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::dims(self.dims(), other.dims()));
        }
        Ok(())
    }

    /// Ternary copy with every pixel labeled.
    pub fn to_ternary(&self) -> TernaryMask {
        TernaryMask {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| v as i8).collect(),
        }
    }
}

/// Intersection over union. Two empty masks count as a perfect match.
pub fn iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    a.ensure_same_dims(b)?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.data.iter().zip(&b.data) {
        inter += (x & y) as usize;
        union += (x | y) as usize;
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TernaryMask {
    height: usize,
    width: usize,
    data: Vec<i8>,
}

impl TernaryMask {
    pub fn new(height: usize, width: usize, data: Vec<i8>) -> Result<Self> {
        check_dims(height, width)?;
        if data.len() != height * width {
            return Err(Error::ShapeMismatch {
                expected: height * width,
                actual: data.len(),
            });
        }
        if let Some(v) = data.iter().find(|&&v| !(-1..=1).contains(&v)) {
            return Err(Error::InvalidGrid(format!("ternary mask holds value {v}")));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn unlabeled(height: usize, width: usize) -> Self {
        assert!(height > 0 && width > 0, "mask dimensions must be positive");
        Self {
            height,
            width,
            data: vec![UNLABELED; height * width],
        }
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

    pub fn get(&self, row: usize, col: usize) -> i8 {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: i8) {
        debug_assert!((-1..=1).contains(&value));
        self.data[row * self.width + col] = value;
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.data
    }

    pub fn count(&self, value: i8) -> usize {
        self.data.iter().filter(|&&v| v == value).count()
    }

    pub fn labeled_count(&self) -> usize {
        self.data.len() - self.count(UNLABELED)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClickLabel {
    Positive,
    Negative,
}

impl ClickLabel {
    pub fn value(self) -> i8 {
        match self {
            ClickLabel::Positive => 1,
            ClickLabel::Negative => 0,
        }
    }
}

/// A user interaction: a pixel and whether it belongs to the object.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Click {
    pub row: usize,
    pub col: usize,
    pub label: ClickLabel,
}

impl Click {
    pub fn positive(row: usize, col: usize) -> Self {
        Self {
            row,
            col,
            label: ClickLabel::Positive,
        }
    }

    pub fn negative(row: usize, col: usize) -> Self {
        Self {
            row,
            col,
            label: ClickLabel::Negative,
        }
    }

    pub fn check_bounds(&self, height: usize, width: usize) -> Result<()> {
        if self.row >= height || self.col >= width {
            return Err(Error::OutOfBounds {
                row: self.row,
                col: self.col,
                height,
                width,
            });
        }
        Ok(())
    }
}
