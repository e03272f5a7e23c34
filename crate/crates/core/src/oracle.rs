//! Simulated annotator: clicks the most interior pixel of the error regions.

use crate::error::{Error, Result};
use crate::mask::{edt, BinaryMask, Click, ClickLabel};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ErrorRegions {
    pub false_positive: BinaryMask,
    pub false_negative: BinaryMask,
}

pub fn error_masks(pred: &BinaryMask, gt: &BinaryMask) -> Result<ErrorRegions> {
    pred.ensure_same_dims(gt)?;
    let (h, w) = pred.dims();
    let p = pred.as_slice();
    let g = gt.as_slice();
    let fp = p.iter().zip(g).map(|(&p, &g)| p & (1 - g)).collect();
    let fn_ = p.iter().zip(g).map(|(&p, &g)| (1 - p) & g).collect();
    Ok(ErrorRegions {
        false_positive: BinaryMask::new(h, w, fp)?,
        false_negative: BinaryMask::new(h, w, fn_)?,
    })
}

/// Next click of the simulated user.
///
/// Picks the pixel with the largest distance-transform value over both error
/// regions. Ties go to the false-negative region, then to the smallest
/// row-major index.
pub fn simulate_click(pred: &BinaryMask, gt: &BinaryMask) -> Result<Click> {
    let regions = error_masks(pred, gt)?;
    let d_fp = edt(&regions.false_positive);
    let d_fn = edt(&regions.false_negative);
    let w = pred.width();

    // (squared distance, prefers FN, index): larger key wins, except index
    // where smaller wins.
    let mut best: Option<(u32, bool, usize)> = None;
    let candidates = d_fn
        .squared_values()
        .iter()
        .map(|&d| (d, true))
        .enumerate()
        .chain(d_fp.squared_values().iter().map(|&d| (d, false)).enumerate());
    for (idx, (d, is_fn)) in candidates {
        if d == 0 {
            continue;
        }
        let better = match best {
            None => true,
            Some((bd, bfn, bidx)) => {
                d > bd || (d == bd && is_fn && !bfn) || (d == bd && is_fn == bfn && idx < bidx)
            }
        };
        if better {
            best = Some((d, is_fn, idx));
        }
    }
    let (_, is_fn, idx) = best.ok_or(Error::NoMisclassifiedPixels)?;
    Ok(Click {
        row: idx / w,
        col: idx % w,
        label: if is_fn {
            ClickLabel::Positive
        } else {
            ClickLabel::Negative
        },
    })
}
