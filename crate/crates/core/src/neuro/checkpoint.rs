//! Versioned binary checkpoint.
//!
//! Little-endian layout:
//!
//! ```text
//! magic          8 bytes  "CLKADPT\0"
//! version        u32      1
//! features       u32      feature channels F
//! hidden         u32      hidden width C_h
//! random_kernels u32      random convolution channels (F - 8)
//! feature_seed   u64
//! sigma          f32      prompt Gaussian width in pixels
//! count          u32      weight count
//! weights        f32 * count
//! adam_m         f32 * count
//! adam_v         f32 * count
//! step_count     u64
//! crc32          u32      over every preceding byte
//! ```

use std::path::Path;

use super::{parameter_count, DecoderState, FeatureExtractor, PromptEncoder, Surrogate};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"CLKADPT\0";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub surrogate: Surrogate,
    pub decoder: DecoderState,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let d = &self.decoder;
        let n = d.parameter_count();
        let mut out = Vec::with_capacity(48 + 12 * n);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(d.feature_channels() as u32).to_le_bytes());
        out.extend_from_slice(&(d.hidden() as u32).to_le_bytes());
        out.extend_from_slice(&(self.surrogate.features.random_kernels as u32).to_le_bytes());
        out.extend_from_slice(&self.surrogate.features.seed.to_le_bytes());
        out.extend_from_slice(&(self.surrogate.prompt.sigma as f32).to_le_bytes());
        out.extend_from_slice(&(n as u32).to_le_bytes());
        let (m, v) = d.adam_moments();
        for block in [d.weights(), m, v] {
            for &x in block {
                out.extend_from_slice(&(x as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&d.step_count().to_le_bytes());
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: String| Error::Checkpoint(m);
        if bytes.len() < 48 {
            return Err(bad(format!("file too short ({} bytes)", bytes.len())));
        }
        if &bytes[..8] != MAGIC {
            return Err(bad("bad magic".into()));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        let actual = crc32fast::hash(body);
        if stored != actual {
            return Err(bad(format!(
                "checksum mismatch (stored {stored:08x}, computed {actual:08x})"
            )));
        }

        let mut r = Reader { buf: body, pos: 8 };
        let version = r.u32()?;
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let features = r.u32()? as usize;
        let hidden = r.u32()? as usize;
        let random_kernels = r.u32()? as usize;
        let seed = r.u64()?;
        let sigma = r.f32()? as f64;
        let count = r.u32()? as usize;
        let extractor = FeatureExtractor::new(seed, random_kernels);
        if extractor.channels() != features {
            return Err(bad(format!(
                "feature count {features} does not match {random_kernels} random kernels"
            )));
        }
        if count != parameter_count(features, hidden) {
            return Err(bad(format!(
                "weight count {count} does not match F={features}, C_h={hidden}"
            )));
        }
        let weights = r.f32s(count)?;
        let m = r.f32s(count)?;
        let v = r.f32s(count)?;
        let step_count = r.u64()?;
        if r.pos != body.len() {
            return Err(bad("trailing bytes".into()));
        }
        if weights.iter().chain(&m).chain(&v).any(|x| !x.is_finite()) {
            return Err(bad("non-finite value".into()));
        }
        let decoder = DecoderState::from_parts(features, hidden, weights)?.with_optimizer_state(m, v, step_count)?;
        Ok(Self {
            surrogate: Surrogate {
                features: extractor,
                prompt: PromptEncoder::new(sigma)?,
            },
            decoder,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        Self::from_bytes(&bytes)
    }

    /// CRC-32 of the serialized form, for display.
    pub fn digest(&self) -> u32 {
        crc32fast::hash(&self.to_bytes())
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(4 * n)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect())
    }
}
