use candle_core::Tensor;

use super::config::VlsmConfig;
use super::layers::{Block, Linear};
use super::params::ParamBuilder;
use crate::error::{Error, Result};

/// Rearrange per-token `r x r` logits (B x g*g x r*r) into a B x 1 x gr x gr map.
pub fn pixel_shuffle(x: &Tensor, grid: usize, r: usize) -> Result<Tensor> {
    let (b, n, rr) = x.dims3()?;
    if n != grid * grid || rr != r * r {
        return Err(Error::ShapeMismatch {
            expected: vec![b, grid * grid, r * r],
            got: vec![b, n, rr],
        });
    }
    Ok(x.reshape((b, grid, grid, r, r))?
        .permute((0, 1, 3, 2, 4))?
        .contiguous()?
        .reshape((b, 1, grid * r, grid * r))?)
}

/// Transformer decoder over the conditioned activations, followed by a
/// per-token head that emits logits at a quarter of the input resolution.
#[derive(Debug, Clone)]
pub struct Decoder {
    reduce: Vec<Linear>,
    blocks: Vec<Block>,
    head_hidden: Linear,
    head_out: Linear,
    upscale: usize,
}

impl Decoder {
    pub fn new(b: &mut ParamBuilder<'_>, config: &VlsmConfig) -> Result<Self> {
        let d = config.decoder_dim;
        let n = config.extract_depths.len();
        let upscale = config.patch / 4;
        Ok(Self {
            reduce: (0..n)
                .map(|i| Linear::new(b, &format!("reduce.{i}"), config.vision_dim, d))
                .collect::<Result<_>>()?,
            blocks: (0..n)
                .map(|i| Block::new(&mut b.sub(format!("blocks.{i}")), d, config.heads, config.mlp_ratio))
                .collect::<Result<_>>()?,
            head_hidden: Linear::new(b, "head.hidden", d, d)?,
            head_out: Linear::new(b, "head.out", d, upscale * upscale)?,
            upscale,
        })
    }

    /// Deepest activation first, as in the reference design.
    pub fn forward(&self, stack: &[Tensor], grid: usize) -> Result<Tensor> {
        if stack.len() != self.reduce.len() {
            return Err(Error::DimMismatch {
                layer: "decoder".into(),
                expected: vec![self.reduce.len()],
                got: vec![stack.len()],
            });
        }
        let mut x: Option<Tensor> = None;
        for ((act, reduce), block) in stack.iter().rev().zip(self.reduce.iter().rev()).zip(&self.blocks) {
            let r = reduce.forward(act)?;
            let h = match x {
                None => r,
                Some(prev) => (prev + r)?,
            };
            x = Some(block.forward(&h, None)?);
        }
        let x = x.expect("stack is non-empty");
        let logits = self.head_out.forward(&self.head_hidden.forward(&x)?.gelu()?)?;
        pixel_shuffle(&logits, grid, self.upscale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::Device;

    #[test]
    fn pixel_shuffle_layout() {
        // token (row 0, col 1) of a 2x2 grid with r = 2 fills output rows 0..2, cols 2..4
        let mut data = vec![0f32; 4 * 4];
        for k in 0..4 {
            data[4 + k] = (k + 1) as f32;
        }
        let x = Tensor::from_vec(data, (1, 4, 4), &Device::Cpu).unwrap();
        let y = pixel_shuffle(&x, 2, 2).unwrap().squeeze(0).unwrap().squeeze(0).unwrap();
        let y = y.to_vec2::<f32>().unwrap();
        assert_eq!(y[0], vec![0.0, 0.0, 1.0, 2.0]);
        assert_eq!(y[1], vec![0.0, 0.0, 3.0, 4.0]);
        assert_eq!(y[2], vec![0.0; 4]);
    }
}
