//! Exact Euclidean distance transform.
//!
//! Two separable passes (Meijster et al.): a vertical scan per column followed
//! by a lower envelope of parabolas per row. Everything runs on integer squared
//! distances so ties stay exact. The image is surrounded by a virtual ring of
//! zeros, so a region touching the border still has a well-defined interior.

use super::BinaryMask;

/// Per-pixel distance to the nearest zero pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistanceField {
    height: usize,
    width: usize,
    squared: Vec<u32>,
}

impl DistanceField {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn squared(&self, row: usize, col: usize) -> u32 {
        self.squared[row * self.width + col]
    }

    pub fn squared_values(&self) -> &[u32] {
        &self.squared
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        (self.squared(row, col) as f64).sqrt()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.squared.iter().map(|&d| (d as f64).sqrt()).collect()
    }
}

pub fn edt(mask: &BinaryMask) -> DistanceField {
    let (h, w) = mask.dims();
    let (ph, pw) = (h + 2, w + 2);
    let inside = |r: usize, c: usize| r > 0 && c > 0 && r <= h && c <= w && mask.get(r - 1, c - 1);

    // Vertical pass: distance to the nearest zero within the padded column.
    let mut g = vec![0i64; ph * pw];
    for c in 0..pw {
        for r in 1..ph {
            g[r * pw + c] = if inside(r, c) { g[(r - 1) * pw + c] + 1 } else { 0 };
        }
        for r in (0..ph - 1).rev() {
            let below = g[(r + 1) * pw + c];
            if below < g[r * pw + c] {
                g[r * pw + c] = below + 1;
            }
        }
    }

    let mut squared = vec![0u32; h * w];
    let mut s = vec![0i64; pw];
    let mut t = vec![0i64; pw];
    for r in 1..=h {
        let row = &g[r * pw..(r + 1) * pw];
        let f = |x: i64, i: i64| (x - i) * (x - i) + row[i as usize] * row[i as usize];
        let sep = |i: i64, u: i64| {
            let gi = row[i as usize];
            let gu = row[u as usize];
            (u * u - i * i + gu * gu - gi * gi).div_euclid(2 * (u - i))
        };
        let m = pw as i64;
        let mut q: i64 = 0;
        s[0] = 0;
        t[0] = 0;
        for u in 1..m {
            while q >= 0 && f(t[q as usize], s[q as usize]) > f(t[q as usize], u) {
                q -= 1;
            }
            if q < 0 {
                q = 0;
                s[0] = u;
            } else {
                let wv = 1 + sep(s[q as usize], u);
                if wv < m {
                    q += 1;
                    s[q as usize] = u;
                    t[q as usize] = wv;
                }
            }
        }
        for u in (0..m).rev() {
            let d = f(u, s[q as usize]);
            if u >= 1 && u <= w as i64 {
                squared[(r - 1) * w + (u as usize - 1)] = d as u32;
            }
            if u == t[q as usize] {
                q -= 1;
            }
        }
    }

    DistanceField {
        height: h,
        width: w,
        squared,
    }
}
