//! Vision-language segmentation models and the shared model interface.

mod aggregator;
mod checkpoint;
mod config;
mod constant;
mod decoder;
pub mod layers;
mod params;
mod text;
mod unet;
mod vision;
mod vlsm;

use candle_core::Tensor;

pub use aggregator::{film, Aggregator, CrossFusion, Film};
pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, sha256_hex, CheckpointManifest, ComponentEntry,
    CHECKPOINT_VERSION,
};
pub use config::{BackboneProvider, Conditioning, Variant, VlsmConfig};
pub use constant::ConstantModel;
pub use decoder::{pixel_shuffle, Decoder};
pub use params::{component_of, ParamBuilder, ParamStore};
pub use text::{split_words, TextEncoder, TextEncoding, Tokenizer, BOS, EOS, PAD};
pub use unet::{CnnConfig, UNet, UNetSkips, UNET};
pub use vision::{VisionEncoder, VisionFeatures};
pub use vlsm::{build_variant, Vlsm, AGGREGATOR, CLIPSEG_DECODER, DECODER, IMAGE_ENCODER, TEXT_ENCODER};

use crate::data::InputSpec;
use crate::error::{Error, Result};

/// Any trainable segmentation architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ModelKind {
    Vlsm(Variant),
    Unet,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Vlsm(Variant::Clipseg),
        ModelKind::Vlsm(Variant::Cris),
        ModelKind::Vlsm(Variant::Biomedclipseg),
        ModelKind::Vlsm(Variant::BiomedclipsegD),
        ModelKind::Unet,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Vlsm(v) => v.as_str(),
            ModelKind::Unet => UNET,
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::Vlsm(v) => v.display_name(),
            ModelKind::Unet => "UNet",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<ModelKind> for String {
    fn from(k: ModelKind) -> String {
        k.as_str().to_string()
    }
}

impl TryFrom<String> for ModelKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case(UNET) {
            return Ok(ModelKind::Unet);
        }
        s.parse::<Variant>()
            .map(ModelKind::Vlsm)
            .map_err(|_| Error::Config(format!("unknown model `{s}`")))
    }
}

/// A segmentation network mapping preprocessed images (and prompts) to
/// one-channel logits.
pub trait SegModel {
    fn name(&self) -> String;

    fn input_spec(&self) -> &InputSpec;

    /// Side of the square logit map.
    fn output_side(&self) -> usize;

    fn params(&self) -> &ParamStore;

    fn params_mut(&mut self) -> &mut ParamStore;

    /// `images`: B x 3 x S x S; returns B x 1 x O x O logits.
    fn forward(&self, images: &Tensor, prompts: &[String]) -> Result<Tensor>;

    /// Whether the prompt can influence the output.
    fn uses_prompts(&self) -> bool {
        true
    }
}
