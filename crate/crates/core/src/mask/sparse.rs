use std::collections::HashMap;

use super::{Click, TernaryMask, UNLABELED};
use crate::error::{Error, Result};

/// Ternary label grid from clicks: 1 at positive clicks, 0 at negative
/// clicks, unlabeled elsewhere.
pub fn build_sparse_mask(clicks: &[Click], dims: (usize, usize)) -> Result<TernaryMask> {
    let (h, w) = dims;
    let mut seen: HashMap<(usize, usize), i8> = HashMap::with_capacity(clicks.len());
    let mut out = TernaryMask::unlabeled(h, w);
    for click in clicks {
        click.check_bounds(h, w)?;
        let v = click.label.value();
        match seen.insert((click.row, click.col), v) {
            Some(prev) if prev != v => {
                return Err(Error::ConflictingClicks {
                    row: click.row,
                    col: click.col,
                })
            }
            _ => out.set(click.row, click.col, v),
        }
    }
    Ok(out)
}

/// Union of two label grids. Where both carry a label and disagree, the
/// click label wins.
pub fn merge_ternary(clicks: &TernaryMask, eroded: &TernaryMask) -> Result<TernaryMask> {
    if clicks.dims() != eroded.dims() {
        return Err(Error::dims(clicks.dims(), eroded.dims()));
    }
    let data = clicks
        .as_slice()
        .iter()
        .zip(eroded.as_slice())
        .map(|(&c, &e)| if c != UNLABELED { c } else { e })
        .collect();
    TernaryMask::new(clicks.height(), clicks.width(), data)
}
