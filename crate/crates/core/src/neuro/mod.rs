//! Surrogate promptable segmentation model.
//!
//! Three parts, as in large promptable models: a frozen image encoder run
//! once per image, a parameter-free prompt encoder, and a small trainable
//! decoder. Only the decoder is ever adapted.

mod checkpoint;
mod decoder;
mod features;
mod image;
mod prompt;
mod registry;

pub use checkpoint::Checkpoint;
pub use decoder::{parameter_count, DecoderState, ForwardCache, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use features::{FeatureExtractor, FeatureMap};
pub use image::Image;
pub use prompt::{ProbMask, PromptEncoder, PromptMap};
pub use registry::DecoderRegistry;

use crate::error::Result;
use crate::mask::Click;

pub const DEFAULT_RANDOM_KERNELS: usize = 4;
pub const DEFAULT_HIDDEN: usize = 16;
pub const DEFAULT_SIGMA: f64 = 3.0;

/// The frozen parts of the model: image encoder and prompt encoder.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Surrogate {
    pub features: FeatureExtractor,
    pub prompt: PromptEncoder,
}

impl Surrogate {
    pub fn new(feature_seed: u64, random_kernels: usize, sigma: f64) -> Result<Self> {
        Ok(Self {
            features: FeatureExtractor::new(feature_seed, random_kernels),
            prompt: PromptEncoder::new(sigma)?,
        })
    }

    pub fn feature_channels(&self) -> usize {
        self.features.channels()
    }

    pub fn embed(&self, image: &Image) -> FeatureMap {
        self.features.extract(image)
    }

    /// Encodes the prompt and runs the decoder.
    pub fn predict(
        &self,
        decoder: &DecoderState,
        feats: &FeatureMap,
        clicks: &[Click],
        prev: &ProbMask,
    ) -> Result<(ProbMask, ForwardCache)> {
        let prompt = self.prompt.encode(clicks, prev)?;
        decoder.forward(feats, &prompt)
    }
}
