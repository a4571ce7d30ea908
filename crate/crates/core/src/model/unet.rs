//! Image-only UNet baseline.

use candle_core::{DType, Device, Tensor};
use serde::{Deserialize, Serialize};

use super::params::{ParamBuilder, ParamStore};
use super::SegModel;
use crate::data::InputSpec;
use crate::error::{Error, Result};

pub const UNET: &str = "unet";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnConfig {
    pub input: InputSpec,
    /// Channel width of each encoder level; the depth is its length.
    pub widths: Vec<usize>,
    pub seed: u64,
}

impl CnnConfig {
    pub fn toy(seed: u64) -> Self {
        Self {
            input: InputSpec::clip(32),
            widths: vec![8, 16],
            seed,
        }
    }

    pub fn depth(&self) -> usize {
        self.widths.len()
    }

    pub fn validate(&self) -> Result<()> {
        let factor = 1usize << self.depth();
        if self.widths.is_empty() || self.widths.contains(&0) {
            return Err(Error::InvalidModelConfig("UNet needs at least one non-zero level width".into()));
        }
        if self.input.side % factor != 0 {
            return Err(Error::InvalidModelConfig(format!(
                "input side {} not divisible by 2^{}",
                self.input.side,
                self.depth()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Conv {
    weight: Tensor,
    bias: Tensor,
    padding: usize,
}

impl Conv {
    fn new(b: &mut ParamBuilder<'_>, name: &str, input: usize, output: usize, kernel: usize) -> Result<Self> {
        let bound = (6.0 / (input * kernel * kernel) as f64).sqrt();
        let mut p = b.sub(name);
        Ok(Self {
            weight: p.uniform("weight", &[output, input, kernel, kernel], bound)?,
            bias: p.constant("bias", &[output], 0.0)?,
            padding: kernel / 2,
        })
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = x.conv2d(&self.weight, self.padding, 1, 1, 1)?;
        Ok(y.broadcast_add(&self.bias.reshape((1, (), 1, 1))?)?)
    }
}

#[derive(Debug, Clone)]
struct DoubleConv(Conv, Conv);

impl DoubleConv {
    fn new(b: &mut ParamBuilder<'_>, input: usize, output: usize) -> Result<Self> {
        Ok(Self(Conv::new(b, "conv1", input, output, 3)?, Conv::new(b, "conv2", output, output, 3)?))
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.1.forward(&self.0.forward(x)?.relu()?)?.relu()?)
    }
}

/// Encoder of double convolutions with 2x pooling, a bottleneck, and a
/// decoder that upsamples and concatenates the matching skip at each level.
#[derive(Debug, Clone)]
pub struct UNet {
    pub config: CnnConfig,
    params: ParamStore,
    down: Vec<DoubleConv>,
    bottleneck: DoubleConv,
    up: Vec<DoubleConv>,
    head: Conv,
}

/// Encoder activations kept for the decoder, shallowest first.
pub struct UNetSkips(pub Vec<Tensor>);

impl UNet {
    pub fn new(config: &CnnConfig, device: &Device, dtype: DType) -> Result<Self> {
        config.validate()?;
        let mut params = ParamStore::new(dtype, device.clone());
        let mut b = ParamBuilder::new(&mut params, UNET, config.seed);
        let mut down = Vec::new();
        let mut channels = 3;
        for (i, &w) in config.widths.iter().enumerate() {
            down.push(DoubleConv::new(&mut b.sub(format!("down.{i}")), channels, w)?);
            channels = w;
        }
        let bottom = channels * 2;
        let bottleneck = DoubleConv::new(&mut b.sub("bottleneck"), channels, bottom)?;
        let mut up = Vec::new();
        let mut below = bottom;
        for (i, &w) in config.widths.iter().enumerate().rev() {
            up.push(DoubleConv::new(&mut b.sub(format!("up.{i}")), below + w, w)?);
            below = w;
        }
        let head = Conv::new(&mut b, "head", below, 1, 1)?;
        Ok(Self {
            config: config.clone(),
            params,
            down,
            bottleneck,
            up,
            head,
        })
    }

    pub fn encode(&self, images: &Tensor) -> Result<(Tensor, UNetSkips)> {
        let mut x = images.clone();
        let mut skips = Vec::with_capacity(self.down.len());
        for level in &self.down {
            x = level.forward(&x)?;
            skips.push(x.clone());
            x = x.max_pool2d(2)?;
        }
        Ok((self.bottleneck.forward(&x)?, UNetSkips(skips)))
    }
}

impl SegModel for UNet {
    fn name(&self) -> String {
        UNET.to_string()
    }

    fn input_spec(&self) -> &InputSpec {
        &self.config.input
    }

    fn output_side(&self) -> usize {
        self.config.input.side
    }

    fn params(&self) -> &ParamStore {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Prompts are ignored.
    fn forward(&self, images: &Tensor, _prompts: &[String]) -> Result<Tensor> {
        let (_, c, h, w) = images.dims4()?;
        let side = self.config.input.side;
        if c != 3 || h != side || w != side {
            return Err(Error::ShapeMismatch {
                expected: vec![3, side, side],
                got: vec![c, h, w],
            });
        }
        let (mut x, UNetSkips(skips)) = self.encode(images)?;
        for (level, skip) in self.up.iter().zip(skips.iter().rev()) {
            let (_, _, sh, sw) = skip.dims4()?;
            x = Tensor::cat(&[&x.upsample_nearest2d(sh, sw)?, skip], 1)?;
            x = level.forward(&x)?;
        }
        self.head.forward(&x)
    }

    fn uses_prompts(&self) -> bool {
        false
    }
}
