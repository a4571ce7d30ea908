use candle_core::{DType, Device, Tensor};

use super::aggregator::Aggregator;
use super::checkpoint::CheckpointManifest;
use super::config::{BackboneProvider, Conditioning, Variant, VlsmConfig};
use super::decoder::Decoder;
use super::params::{ParamBuilder, ParamStore};
use super::text::{TextEncoder, TextEncoding};
use super::vision::{VisionEncoder, VisionFeatures};
use super::SegModel;
use crate::data::InputSpec;
use crate::error::Result;
use crate::prompt::stable_seed;

pub const TEXT_ENCODER: &str = "text_encoder";
pub const IMAGE_ENCODER: &str = "image_encoder";
pub const AGGREGATOR: &str = "aggregator";
pub const DECODER: &str = "decoder";
/// Manifest entry holding a CLIPSeg aggregator and decoder.
pub const CLIPSEG_DECODER: &str = "clipseg_decoder";

/// Text encoder, image encoder, aggregator and vision-language decoder.
#[derive(Debug, Clone)]
pub struct Vlsm {
    pub config: VlsmConfig,
    params: ParamStore,
    text: TextEncoder,
    vision: VisionEncoder,
    aggregator: Aggregator,
    decoder: Decoder,
}

/// Initialisation streams per component. The BiomedCLIP variants share
/// their encoders; the `_d` variant takes the CLIPSeg decoder stream while
/// the plain variant gets a fresh one.
fn stream_names(variant: Variant) -> [&'static str; 4] {
    match variant {
        Variant::Clipseg => ["clip/text", "clip/image", "clipseg/aggregator", "clipseg/decoder"],
        Variant::Cris => ["clip/text", "clip/image", "cris/aggregator", "cris/decoder"],
        Variant::Biomedclipseg => [
            "biomedclip/text",
            "biomedclip/image",
            "biomedclipseg/aggregator",
            "biomedclipseg/decoder",
        ],
        Variant::BiomedclipsegD => [
            "biomedclip/text",
            "biomedclip/image",
            "clipseg/aggregator",
            "clipseg/decoder",
        ],
    }
}

impl Vlsm {
    /// Build with the initialisation streams of `variant` derived from `seed`.
    fn init(config: &VlsmConfig, seed: u64, device: &Device, dtype: DType) -> Result<Self> {
        config.validate()?;
        let [t, i, a, d] = stream_names(config.variant).map(|s| stable_seed(s, seed));
        let mut params = ParamStore::new(dtype, device.clone());
        let text = TextEncoder::new(&mut ParamBuilder::new(&mut params, TEXT_ENCODER, t), config)?;
        let vision = VisionEncoder::new(&mut ParamBuilder::new(&mut params, IMAGE_ENCODER, i), config)?;
        let aggregator = Aggregator::new(&mut ParamBuilder::new(&mut params, AGGREGATOR, a), config)?;
        let decoder = Decoder::new(&mut ParamBuilder::new(&mut params, DECODER, d), config)?;
        Ok(Self {
            config: config.clone(),
            params,
            text,
            vision,
            aggregator,
            decoder,
        })
    }

    pub fn encode_text<S: AsRef<str>>(&self, prompts: &[S]) -> Result<TextEncoding> {
        self.text.encode(prompts)
    }

    pub fn encode_image(&self, images: &Tensor) -> Result<VisionFeatures> {
        self.vision.forward(images)
    }

    pub fn aggregate(&self, vision: &VisionFeatures, text: &TextEncoding, mode: Conditioning) -> Result<Vec<Tensor>> {
        self.aggregator.forward(vision, text, mode)
    }

    pub fn decode(&self, stack: &[Tensor], grid: usize) -> Result<Tensor> {
        self.decoder.forward(stack, grid)
    }
}

impl SegModel for Vlsm {
    fn name(&self) -> String {
        self.config.variant.as_str().to_string()
    }

    fn input_spec(&self) -> &InputSpec {
        &self.config.input
    }

    fn output_side(&self) -> usize {
        self.config.output_side()
    }

    fn params(&self) -> &ParamStore {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn forward(&self, images: &Tensor, prompts: &[String]) -> Result<Tensor> {
        let vision = self.encode_image(images)?;
        let text = self.encode_text(prompts)?;
        let stack = self.aggregate(&vision, &text, self.config.conditioning)?;
        self.decode(&stack, vision.grid)
    }
}

/// Assemble a variant and fill its weights from the configured provider.
///
/// With a toy provider every component is seeded. With a pretrained
/// manifest the encoders come from `text_encoder` / `image_encoder`
/// entries; CLIPSeg and CRIS also load `aggregator` and `decoder`,
/// BiomedCLIPSeg-D loads both from `clipseg_decoder`, and BiomedCLIPSeg
/// keeps its seeded random decoder.
pub fn build_variant(config: &VlsmConfig, device: &Device, dtype: DType) -> Result<Vlsm> {
    let seed = match &config.provider {
        BackboneProvider::Toy { seed } => *seed,
        BackboneProvider::Pretrained { .. } => 0,
    };
    let mut model = Vlsm::init(config, seed, device, dtype)?;
    if let BackboneProvider::Pretrained { manifest } = &config.provider {
        let manifest = CheckpointManifest::load(manifest)?;
        manifest.load_into(TEXT_ENCODER, &[TEXT_ENCODER], &model.params)?;
        manifest.load_into(IMAGE_ENCODER, &[IMAGE_ENCODER], &model.params)?;
        match config.variant {
            Variant::Clipseg | Variant::Cris => {
                manifest.load_into(AGGREGATOR, &[AGGREGATOR], &model.params)?;
                manifest.load_into(DECODER, &[DECODER], &model.params)?;
            }
            Variant::BiomedclipsegD => manifest.load_into(CLIPSEG_DECODER, &[AGGREGATOR, DECODER], &model.params)?,
            Variant::Biomedclipseg => {}
        }
    }
    if config.freeze_text {
        model.params.freeze(TEXT_ENCODER);
    }
    if config.freeze_image {
        model.params.freeze(IMAGE_ENCODER);
    }
    Ok(model)
}
