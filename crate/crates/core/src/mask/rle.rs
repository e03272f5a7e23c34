//! Binary run-length codec.
//!
//! Layout, all fields little-endian `u32`: height, width, then run lengths in
//! row-major order, alternating zero-runs and one-runs and starting with a
//! zero-run (which may have length 0).

use super::BinaryMask;
use crate::error::{Error, Result};

pub fn rle_runs(mask: &BinaryMask) -> Vec<u32> {
    let mut runs = Vec::new();
    let mut current = 0u8;
    let mut len = 0u32;
    for &v in mask.as_slice() {
        if v != current {
            runs.push(len);
            len = 0;
            current = v;
        }
        len += 1;
    }
    runs.push(len);
    runs
}

pub fn encode_rle(mask: &BinaryMask) -> Vec<u8> {
    let runs = rle_runs(mask);
    let mut out = Vec::with_capacity(8 + 4 * runs.len());
    out.extend_from_slice(&(mask.height() as u32).to_le_bytes());
    out.extend_from_slice(&(mask.width() as u32).to_le_bytes());
    for r in runs {
        out.extend_from_slice(&r.to_le_bytes());
    }
    out
}

pub fn decode_rle(bytes: &[u8]) -> Result<BinaryMask> {
    let malformed = |m: &str| Error::MalformedEncoding(m.to_string());
    if bytes.len() < 12 || !bytes.len().is_multiple_of(4) {
        return Err(malformed("length must be a multiple of 4 and hold a header plus one run"));
    }
    let words: Vec<u32> = bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let (h, w) = (words[0] as usize, words[1] as usize);
    if h == 0 || w == 0 {
        return Err(malformed("zero dimension"));
    }
    let total = h
        .checked_mul(w)
        .ok_or_else(|| malformed("dimensions overflow"))?;
    let mut data = Vec::with_capacity(total);
    let mut value = 0u8;
    for (i, &run) in words[2..].iter().enumerate() {
        if run == 0 && i > 0 {
            return Err(malformed("empty run after the leading zero-run"));
        }
        if data.len() + run as usize > total {
            return Err(malformed("runs exceed the pixel count"));
        }
        data.resize(data.len() + run as usize, value);
        value ^= 1;
    }
    if data.len() != total {
        return Err(malformed("runs do not cover the image"));
    }
    BinaryMask::new(h, w, data)
}
