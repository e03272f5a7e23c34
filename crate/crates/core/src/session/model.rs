use super::{Adapter, Segmenter, Turn};
use crate::adapt::{self, AdaptationConfig, AdaptationContext, ImageDoneSummary};
use crate::error::Result;
use crate::mask::{BinaryMask, Click};
use crate::neuro::{DecoderState, FeatureMap, Image, ProbMask, Surrogate};

/// The surrogate with one decoder it owns.
#[derive(Clone, Debug, PartialEq)]
pub struct SurrogateModel {
    pub surrogate: Surrogate,
    pub decoder: DecoderState,
}

impl Segmenter for SurrogateModel {
    type Embedding = FeatureMap;

    fn embed(&self, image: &Image) -> Result<FeatureMap> {
        Ok(self.surrogate.embed(image))
    }

    fn predict(&self, feats: &FeatureMap, clicks: &[Click], prev: &ProbMask) -> Result<ProbMask> {
        Ok(self.surrogate.predict(&self.decoder, feats, clicks, prev)?.0)
    }
}

/// Applies an [`AdaptationConfig`] to a [`SurrogateModel`].
#[derive(Clone, Debug, PartialEq)]
pub struct ConfiguredAdapter {
    pub config: AdaptationConfig,
}

impl ConfiguredAdapter {
    pub fn new(config: AdaptationConfig) -> Self {
        Self { config }
    }
}

fn context<'a>(
    model: &'a mut SurrogateModel,
    turn: &'a Turn<'_, FeatureMap>,
    result: Option<&'a BinaryMask>,
) -> AdaptationContext<'a> {
    AdaptationContext {
        decoder: &mut model.decoder,
        prompt: &model.surrogate.prompt,
        feats: turn.embedding,
        clicks: turn.clicks,
        prompt_prev: turn.prev,
        result_mask: result,
    }
}

impl Adapter<SurrogateModel> for ConfiguredAdapter {
    fn begin_image(&mut self, model: &mut SurrogateModel) -> Result<()> {
        adapt::on_image_start(&self.config, &mut model.decoder);
        Ok(())
    }

    fn on_click(&mut self, model: &mut SurrogateModel, turn: &Turn<'_, FeatureMap>) -> Result<Option<f64>> {
        adapt::on_click(&self.config, &mut context(model, turn, None))
    }

    fn on_image_done(
        &mut self,
        model: &mut SurrogateModel,
        turn: &Turn<'_, FeatureMap>,
        result: &BinaryMask,
    ) -> Result<ImageDoneSummary> {
        adapt::on_image_done(&self.config, &mut context(model, turn, Some(result)))
    }
}
