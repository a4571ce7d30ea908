use candle_core::{Tensor, D};

use crate::error::{Error, Result};
use crate::model::layers::sigmoid;

pub const PROB_EPS: f64 = 1e-7;

fn check_shapes(a: &Tensor, b: &Tensor) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::ShapeMismatch {
            expected: a.dims().to_vec(),
            got: b.dims().to_vec(),
        });
    }
    Ok(())
}

/// Per-sample sums over every non-batch axis: B x ... -> B.
fn per_sample_sum(x: &Tensor) -> Result<Tensor> {
    Ok(x.flatten_from(1)?.sum(D::Minus1)?)
}

/// `1 - (2 sum(p t) + s) / (sum(p) + sum(t) + s)` per sample, averaged over
/// the batch (the leading axis).
pub fn dice_loss(probs: &Tensor, target: &Tensor, smooth: f64) -> Result<Tensor> {
    check_shapes(probs, target)?;
    let inter = per_sample_sum(&(probs * target)?)?;
    let denom = (per_sample_sum(probs)? + per_sample_sum(target)?)?;
    let ratio = ((inter * 2.0)? + smooth)?.div(&(denom + smooth)?)?;
    Ok(ratio.affine(-1.0, 1.0)?.mean_all()?)
}

/// Mean binary cross-entropy of `sigmoid(logits)` with probabilities clamped
/// to `[1e-7, 1 - 1e-7]`.
pub fn bce_with_logits(logits: &Tensor, target: &Tensor) -> Result<Tensor> {
    check_shapes(logits, target)?;
    let p = sigmoid(logits)?.clamp(PROB_EPS, 1.0 - PROB_EPS)?;
    let pos = (target * p.log()?)?;
    let neg = (target.affine(-1.0, 1.0)? * p.affine(-1.0, 1.0)?.log()?)?;
    Ok((pos + neg)?.mean_all()?.neg()?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub bce_weight: f64,
    pub dice_smooth: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            bce_weight: 0.2,
            dice_smooth: 1.0,
        }
    }
}

/// Loss value with its two terms.
#[derive(Debug, Clone)]
pub struct LossTerms {
    pub total: Tensor,
    pub dice: Tensor,
    pub bce: Tensor,
}

/// `dice_loss(sigmoid(logits), target) + bce_weight * bce(logits, target)`.
pub fn combined_loss(logits: &Tensor, target: &Tensor, config: &LossConfig) -> Result<LossTerms> {
    let dice = dice_loss(&sigmoid(logits)?, target, config.dice_smooth)?;
    let bce = bce_with_logits(logits, target)?;
    let total = if config.bce_weight == 0.0 {
        dice.clone()
    } else {
        (&dice + (&bce * config.bce_weight)?)?
    };
    Ok(LossTerms { total, dice, bce })
}
