use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::InputSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Clipseg,
    Cris,
    Biomedclipseg,
    BiomedclipsegD,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Clipseg, Variant::Cris, Variant::Biomedclipseg, Variant::BiomedclipsegD];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Clipseg => "clipseg",
            Variant::Cris => "cris",
            Variant::Biomedclipseg => "biomedclipseg",
            Variant::BiomedclipsegD => "biomedclipseg_d",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Variant::Clipseg => "CLIPSeg",
            Variant::Cris => "CRIS",
            Variant::Biomedclipseg => "BiomedCLIPSeg",
            Variant::BiomedclipsegD => "BiomedCLIPSeg-D",
        }
    }

    pub fn conditioning(self) -> Conditioning {
        match self {
            Variant::Cris => Conditioning::TokenLevel,
            _ => Conditioning::SentenceLevel,
        }
    }

    /// CLIPSeg-style models share learning rate, batch size and patience.
    pub fn is_clipseg_family(self) -> bool {
        self != Variant::Cris
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('-', "_");
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == key)
            .ok_or_else(|| Error::Config(format!("unknown model variant `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conditioning {
    SentenceLevel,
    TokenLevel,
}

/// Where backbone weights come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackboneProvider {
    /// Seeded random initialisation of every component.
    Toy { seed: u64 },
    /// Components loaded from the files listed in a checkpoint manifest.
    Pretrained { manifest: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VlsmConfig {
    pub variant: Variant,
    pub conditioning: Conditioning,
    pub input: InputSpec,
    pub context_length: usize,
    pub vocab_size: usize,
    pub text_dim: usize,
    pub vision_dim: usize,
    /// Width of the pooled sentence embedding.
    pub joint_dim: usize,
    pub decoder_dim: usize,
    pub text_layers: usize,
    pub vision_layers: usize,
    pub heads: usize,
    pub mlp_ratio: usize,
    pub patch: usize,
    /// 1-based vision block indices whose outputs feed the aggregator.
    pub extract_depths: Vec<usize>,
    pub freeze_text: bool,
    pub freeze_image: bool,
    pub provider: BackboneProvider,
}

impl VlsmConfig {
    /// Desk-scale configuration: 32 px input, 8 px patches, two-layer
    /// encoders of width 32 and a decoder of width 16.
    pub fn toy(variant: Variant, seed: u64) -> Self {
        Self {
            variant,
            conditioning: variant.conditioning(),
            input: InputSpec::clip(32),
            context_length: 32,
            vocab_size: 1024,
            text_dim: 32,
            vision_dim: 32,
            joint_dim: 32,
            decoder_dim: 16,
            text_layers: 2,
            vision_layers: 2,
            heads: 2,
            mlp_ratio: 2,
            patch: 8,
            extract_depths: vec![1, 2],
            freeze_text: false,
            freeze_image: false,
            provider: BackboneProvider::Toy { seed },
        }
    }

    /// Smallest useful configuration, under 1k parameters.
    pub fn micro(variant: Variant, seed: u64) -> Self {
        Self {
            input: InputSpec::clip(8),
            context_length: 8,
            vocab_size: 16,
            text_dim: 4,
            vision_dim: 4,
            joint_dim: 4,
            decoder_dim: 4,
            text_layers: 1,
            vision_layers: 1,
            heads: 1,
            mlp_ratio: 1,
            patch: 4,
            extract_depths: vec![1],
            ..Self::toy(variant, seed)
        }
    }

    pub fn output_side(&self) -> usize {
        self.input.side / 4
    }

    pub fn grid(&self) -> usize {
        self.input.side / self.patch
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidModelConfig(m));
        if self.conditioning != self.variant.conditioning() {
            return bad(format!(
                "{} requires {:?} conditioning, got {:?}",
                self.variant,
                self.variant.conditioning(),
                self.conditioning
            ));
        }
        if self.patch == 0 || self.patch % 4 != 0 || self.input.side % self.patch != 0 {
            return bad(format!(
                "patch {} must be a multiple of 4 dividing the input side {}",
                self.patch, self.input.side
            ));
        }
        if self.context_length < 2 || self.vocab_size < 4 {
            return bad("context length must be at least 2 and vocabulary at least 4".into());
        }
        if self.extract_depths.is_empty() || self.extract_depths.iter().any(|&d| d == 0 || d > self.vision_layers) {
            return bad(format!(
                "extraction depths {:?} must lie in 1..={}",
                self.extract_depths, self.vision_layers
            ));
        }
        if self.extract_depths.windows(2).any(|w| w[0] >= w[1]) {
            return bad("extraction depths must be strictly increasing".into());
        }
        if self.extract_depths.last() != Some(&self.vision_layers) {
            return bad(format!(
                "the deepest extraction depth must be the last vision block ({})",
                self.vision_layers
            ));
        }
        for (name, dim) in [
            ("text", self.text_dim),
            ("vision", self.vision_dim),
            ("decoder", self.decoder_dim),
        ] {
            if dim == 0 || self.heads == 0 || dim % self.heads != 0 {
                return bad(format!("{name} width {dim} not divisible into {} heads", self.heads));
            }
        }
        if self.joint_dim == 0 || self.mlp_ratio == 0 {
            return bad("joint width and mlp ratio must be positive".into());
        }
        Ok(())
    }
}
