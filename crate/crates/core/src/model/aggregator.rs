//! Fusion of vision features with the text encoding.

use candle_core::Tensor;

use super::config::{Conditioning, VlsmConfig};
use super::layers::{Attention, LayerNorm, Linear};
use super::params::ParamBuilder;
use super::text::TextEncoding;
use super::vision::VisionFeatures;
use crate::error::{Error, Result};

/// Feature-wise affine modulation: `x * scale + shift`, with `scale` and
/// `shift` (B x D) broadcast over the N positions of `x` (B x N x D).
pub fn film(x: &Tensor, scale: &Tensor, shift: &Tensor) -> Result<Tensor> {
    Ok(x.broadcast_mul(&scale.unsqueeze(1)?)?.broadcast_add(&shift.unsqueeze(1)?)?)
}

#[derive(Debug, Clone)]
pub struct Film {
    scale: Linear,
    shift: Linear,
}

impl Film {
    fn new(b: &mut ParamBuilder<'_>, joint: usize, dim: usize) -> Result<Self> {
        Ok(Self {
            scale: Linear::constant_bias(b, "scale", joint, dim, 1.0)?,
            shift: Linear::constant_bias(b, "shift", joint, dim, 0.0)?,
        })
    }

    pub fn forward(&self, x: &Tensor, pooled: &Tensor) -> Result<Tensor> {
        film(x, &self.scale.forward(pooled)?, &self.shift.forward(pooled)?)
    }
}

/// Residual cross-attention from pixels onto tokens, plus a shift from the
/// sentence embedding. Both residual branches start at zero.
#[derive(Debug, Clone)]
pub struct CrossFusion {
    ln: LayerNorm,
    attn: Attention,
    sentence: Linear,
}

impl CrossFusion {
    fn new(b: &mut ParamBuilder<'_>, vision: usize, text: usize, joint: usize, heads: usize) -> Result<Self> {
        Ok(Self {
            ln: LayerNorm::new(b, "ln", vision)?,
            attn: Attention::with_out(&mut b.sub("attn"), vision, text, vision, heads, true)?,
            sentence: Linear::zeros(b, "sentence", joint, vision)?,
        })
    }

    pub fn forward(&self, x: &Tensor, text: &TextEncoding) -> Result<Tensor> {
        let fused = self.attn.forward(&self.ln.forward(x)?, &text.tokens, Some(&text.key_bias()?))?;
        let shift = self.sentence.forward(&text.pooled)?.unsqueeze(1)?;
        Ok((x + fused)?.broadcast_add(&shift)?)
    }
}

#[derive(Debug, Clone)]
pub enum Aggregator {
    Sentence(Vec<Film>),
    Token(Vec<CrossFusion>),
}

impl Aggregator {
    pub fn new(b: &mut ParamBuilder<'_>, config: &VlsmConfig) -> Result<Self> {
        let n = config.extract_depths.len();
        Ok(match config.conditioning {
            Conditioning::SentenceLevel => Aggregator::Sentence(
                (0..n)
                    .map(|i| Film::new(&mut b.sub(format!("film.{i}")), config.joint_dim, config.vision_dim))
                    .collect::<Result<_>>()?,
            ),
            Conditioning::TokenLevel => Aggregator::Token(
                (0..n)
                    .map(|i| {
                        CrossFusion::new(
                            &mut b.sub(format!("fusion.{i}")),
                            config.vision_dim,
                            config.text_dim,
                            config.joint_dim,
                            config.heads,
                        )
                    })
                    .collect::<Result<_>>()?,
            ),
        })
    }

    pub fn mode(&self) -> Conditioning {
        match self {
            Aggregator::Sentence(_) => Conditioning::SentenceLevel,
            Aggregator::Token(_) => Conditioning::TokenLevel,
        }
    }

    /// Condition every skip activation on the text.
    pub fn forward(&self, vision: &VisionFeatures, text: &TextEncoding, mode: Conditioning) -> Result<Vec<Tensor>> {
        if mode != self.mode() {
            return Err(Error::InvalidModelConfig(format!(
                "aggregator built for {:?} called with {mode:?}",
                self.mode()
            )));
        }
        let expected = match self {
            Aggregator::Sentence(f) => f.len(),
            Aggregator::Token(f) => f.len(),
        };
        if vision.skips.len() != expected {
            return Err(Error::DimMismatch {
                layer: "aggregator".into(),
                expected: vec![expected],
                got: vec![vision.skips.len()],
            });
        }
        match self {
            Aggregator::Sentence(films) => films
                .iter()
                .zip(&vision.skips)
                .map(|(f, x)| f.forward(x, &text.pooled))
                .collect(),
            Aggregator::Token(fusions) => fusions.iter().zip(&vision.skips).map(|(f, x)| f.forward(x, text)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::{DType, Device};

    #[test]
    fn identity_modulation_returns_input() {
        let dev = Device::Cpu;
        let x = Tensor::arange(0f32, 24.0, &dev).unwrap().reshape((2, 3, 4)).unwrap();
        let scale = Tensor::ones((2, 4), DType::F32, &dev).unwrap();
        let shift = Tensor::zeros((2, 4), DType::F32, &dev).unwrap();
        let y = film(&x, &scale, &shift).unwrap();
        assert_eq!(y.to_vec3::<f32>().unwrap(), x.to_vec3::<f32>().unwrap());
    }

    #[test]
    fn film_is_per_sample_affine() {
        let dev = Device::Cpu;
        let x = Tensor::ones((2, 3, 2), DType::F64, &dev).unwrap();
        let scale = Tensor::new(&[[2.0f64, 3.0], [0.5, 1.0]], &dev).unwrap();
        let shift = Tensor::new(&[[1.0f64, 0.0], [0.0, -1.0]], &dev).unwrap();
        let y = film(&x, &scale, &shift).unwrap().to_vec3::<f64>().unwrap();
        assert_eq!(y[0][2], vec![3.0, 3.0]);
        assert_eq!(y[1][0], vec![0.5, 0.0]);
    }
}
