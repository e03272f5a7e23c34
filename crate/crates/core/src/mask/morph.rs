//! Binary morphology with the 4-connected cross structuring element.
//!
//! Pixels outside the image count as background for both erosion and dilation.

use super::{BinaryMask, TernaryMask, UNLABELED};

fn erode_once(mask: &BinaryMask) -> BinaryMask {
    let (h, w) = mask.dims();
    let src = mask.as_slice();
    let mut out = vec![0u8; h * w];
    for r in 1..h.saturating_sub(1) {
        for c in 1..w.saturating_sub(1) {
            let i = r * w + c;
            out[i] = src[i] & src[i - 1] & src[i + 1] & src[i - w] & src[i + w];
        }
    }
    BinaryMask::new(h, w, out).expect("same shape")
}

fn dilate_once(mask: &BinaryMask) -> BinaryMask {
    let (h, w) = mask.dims();
    let src = mask.as_slice();
    let mut out = src.to_vec();
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            if src[i] == 1 {
                continue;
            }
            let hit = (c > 0 && src[i - 1] == 1)
                || (c + 1 < w && src[i + 1] == 1)
                || (r > 0 && src[i - w] == 1)
                || (r + 1 < h && src[i + w] == 1);
            out[i] = hit as u8;
        }
    }
    BinaryMask::new(h, w, out).expect("same shape")
}

/// `k`-fold erosion; `k = 0` returns the mask unchanged.
pub fn erode_k(mask: &BinaryMask, k: usize) -> BinaryMask {
    let mut out = mask.clone();
    for _ in 0..k {
        if out.is_empty() {
            break;
        }
        out = erode_once(&out);
    }
    out
}

/// `k`-fold dilation with the same structuring element.
pub fn dilate_k(mask: &BinaryMask, k: usize) -> BinaryMask {
    let mut out = mask.clone();
    for _ in 0..k {
        out = dilate_once(&out);
    }
    out
}

/// Erodes foreground and background separately and marks the band in
/// between as unlabeled.
pub fn prune_result_mask(result: &BinaryMask, k: usize) -> TernaryMask {
    let fg = erode_k(result, k);
    let bg = erode_k(&result.complement(), k);
    let (h, w) = result.dims();
    let mut out = TernaryMask::unlabeled(h, w);
    for r in 0..h {
        for c in 0..w {
            let v = match (fg.get(r, c), bg.get(r, c)) {
                (true, _) => 1,
                (false, true) => 0,
                (false, false) => UNLABELED,
            };
            out.set(r, c, v);
        }
    }
    out
}
