use candle_core::Tensor;

use super::config::VlsmConfig;
use super::layers::Block;
use super::params::ParamBuilder;
use crate::error::{Error, Result};

/// Output of the vision encoder.
#[derive(Debug, Clone)]
pub struct VisionFeatures {
    /// Output of the last block, B x N x Dv with N = grid * grid, row-major.
    pub final_map: Tensor,
    /// Block outputs at the configured depths, each B x N x Dv.
    pub skips: Vec<Tensor>,
    pub grid: usize,
}

#[derive(Debug, Clone)]
pub struct VisionEncoder {
    patch_weight: Tensor,
    patch_bias: Tensor,
    position: Tensor,
    blocks: Vec<Block>,
    patch: usize,
    side: usize,
    dim: usize,
    depths: Vec<usize>,
}

impl VisionEncoder {
    pub fn new(b: &mut ParamBuilder<'_>, config: &VlsmConfig) -> Result<Self> {
        let d = config.vision_dim;
        let fan_in = 3 * config.patch * config.patch;
        let bound = 1.0 / (fan_in as f64).sqrt();
        let grid = config.grid();
        let blocks = (0..config.vision_layers)
            .map(|i| Block::new(&mut b.sub(format!("blocks.{i}")), d, config.heads, config.mlp_ratio))
            .collect::<Result<_>>()?;
        Ok(Self {
            patch_weight: b.uniform("patch.weight", &[d, 3, config.patch, config.patch], bound)?,
            patch_bias: b.uniform("patch.bias", &[d], bound)?,
            position: b.uniform("position", &[grid * grid, d], 0.5)?,
            blocks,
            patch: config.patch,
            side: config.input.side,
            dim: d,
            depths: config.extract_depths.clone(),
        })
    }

    /// `images`: B x 3 x S x S, already normalised.
    pub fn forward(&self, images: &Tensor) -> Result<VisionFeatures> {
        let (b, c, h, w) = images.dims4()?;
        if c != 3 || h != self.side || w != self.side {
            return Err(Error::ShapeMismatch {
                expected: vec![b, 3, self.side, self.side],
                got: vec![b, c, h, w],
            });
        }
        let grid = self.side / self.patch;
        let x = images.conv2d(&self.patch_weight, 0, self.patch, 1, 1)?;
        let x = x.broadcast_add(&self.patch_bias.reshape((1, self.dim, 1, 1))?)?;
        let x = x.flatten_from(2)?.transpose(1, 2)?.contiguous()?;
        let mut x = x.broadcast_add(&self.position)?;
        let mut skips = Vec::with_capacity(self.depths.len());
        for (i, block) in self.blocks.iter().enumerate() {
            x = block.forward(&x, None)?;
            if self.depths.contains(&(i + 1)) {
                skips.push(x.clone());
            }
        }
        Ok(VisionFeatures {
            final_map: x,
            skips,
            grid,
        })
    }
}
