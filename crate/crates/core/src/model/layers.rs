//! Building blocks written from primitive tensor ops so every layer has a
//! backward pass.

use candle_core::{Tensor, D};

use super::params::ParamBuilder;
use crate::error::{Error, Result};

/// Check the trailing dimension of `x` before feeding it to `layer`.
pub fn expect_last_dim(layer: &str, x: &Tensor, expected: usize) -> Result<()> {
    let got = x.dim(D::Minus1)?;
    if got != expected {
        return Err(Error::DimMismatch {
            layer: layer.to_string(),
            expected: vec![expected],
            got: vec![got],
        });
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Linear {
    name: String,
    /// `in x out`
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    pub fn new(b: &mut ParamBuilder<'_>, name: &str, input: usize, output: usize) -> Result<Self> {
        let bound = 1.0 / (input as f64).sqrt();
        let mut p = b.sub(name);
        Ok(Self {
            name: p.prefix().to_string(),
            weight: p.uniform("weight", &[input, output], bound)?,
            bias: p.uniform("bias", &[output], bound)?,
        })
    }

    /// Linear layer whose weight and bias start at zero.
    pub fn zeros(b: &mut ParamBuilder<'_>, name: &str, input: usize, output: usize) -> Result<Self> {
        let mut p = b.sub(name);
        Ok(Self {
            name: p.prefix().to_string(),
            weight: p.uniform("weight", &[input, output], 0.0)?,
            bias: p.uniform("bias", &[output], 0.0)?,
        })
    }

    /// Linear layer with small random weights and a constant bias.
    pub fn constant_bias(b: &mut ParamBuilder<'_>, name: &str, input: usize, output: usize, bias: f64) -> Result<Self> {
        let bound = 0.1 / (input as f64).sqrt();
        let mut p = b.sub(name);
        Ok(Self {
            name: p.prefix().to_string(),
            weight: p.uniform("weight", &[input, output], bound)?,
            bias: p.constant("bias", &[output], bias)?,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.dims()[0]
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        expect_last_dim(&self.name, x, self.in_dim())?;
        Ok(x.broadcast_matmul(&self.weight)?.broadcast_add(&self.bias)?)
    }
}

#[derive(Debug, Clone)]
pub struct LayerNorm {
    gamma: Tensor,
    beta: Tensor,
    eps: f64,
}

impl LayerNorm {
    pub fn new(b: &mut ParamBuilder<'_>, name: &str, dim: usize) -> Result<Self> {
        let mut p = b.sub(name);
        Ok(Self {
            gamma: p.constant("gamma", &[dim], 1.0)?,
            beta: p.constant("beta", &[dim], 0.0)?,
            eps: 1e-5,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mean = x.mean_keepdim(D::Minus1)?;
        let centred = x.broadcast_sub(&mean)?;
        let var = centred.sqr()?.mean_keepdim(D::Minus1)?;
        let normed = centred.broadcast_div(&(var + self.eps)?.sqrt()?)?;
        Ok(normed.broadcast_mul(&self.gamma)?.broadcast_add(&self.beta)?)
    }
}

pub fn softmax_last(x: &Tensor) -> Result<Tensor> {
    let max = x.max_keepdim(D::Minus1)?.detach();
    let e = x.broadcast_sub(&max)?.exp()?;
    Ok(e.broadcast_div(&e.sum_keepdim(D::Minus1)?)?)
}

pub fn sigmoid(x: &Tensor) -> Result<Tensor> {
    Ok((x.neg()?.exp()? + 1.0)?.recip()?)
}

/// Multi-head attention from `query_dim` inputs onto `kv_dim` inputs.
#[derive(Debug, Clone)]
pub struct Attention {
    q: Linear,
    k: Linear,
    v: Linear,
    pub out: Linear,
    heads: usize,
    inner: usize,
}

impl Attention {
    pub fn new(b: &mut ParamBuilder<'_>, query_dim: usize, kv_dim: usize, inner: usize, heads: usize) -> Result<Self> {
        Self::with_out(b, query_dim, kv_dim, inner, heads, false)
    }

    /// `zero_out` starts the output projection at zero, so the block is an
    /// identity map when used residually.
    pub fn with_out(
        b: &mut ParamBuilder<'_>,
        query_dim: usize,
        kv_dim: usize,
        inner: usize,
        heads: usize,
        zero_out: bool,
    ) -> Result<Self> {
        if heads == 0 || inner % heads != 0 {
            return Err(Error::InvalidModelConfig(format!("{inner} not divisible into {heads} heads")));
        }
        let out = if zero_out {
            Linear::zeros(b, "out", inner, query_dim)?
        } else {
            Linear::new(b, "out", inner, query_dim)?
        };
        Ok(Self {
            q: Linear::new(b, "q", query_dim, inner)?,
            k: Linear::new(b, "k", kv_dim, inner)?,
            v: Linear::new(b, "v", kv_dim, inner)?,
            out,
            heads,
            inner,
        })
    }

    fn split_heads(&self, x: &Tensor) -> Result<Tensor> {
        let (b, n, _) = x.dims3()?;
        Ok(x.reshape((b, n, self.heads, self.inner / self.heads))?.transpose(1, 2)?.contiguous()?)
    }

    /// `query`: B x Nq x Dq, `kv`: B x Nk x Dk. `bias` is added to the
    /// attention scores and broadcasts to B x heads x Nq x Nk.
    pub fn forward(&self, query: &Tensor, kv: &Tensor, bias: Option<&Tensor>) -> Result<Tensor> {
        let (b, nq, _) = query.dims3()?;
        let q = self.split_heads(&self.q.forward(query)?)?;
        let k = self.split_heads(&self.k.forward(kv)?)?;
        let v = self.split_heads(&self.v.forward(kv)?)?;
        let scale = 1.0 / ((self.inner / self.heads) as f64).sqrt();
        let mut scores = (q.matmul(&k.t()?.contiguous()?)? * scale)?;
        if let Some(bias) = bias {
            scores = scores.broadcast_add(bias)?;
        }
        let attn = softmax_last(&scores)?;
        let mixed = attn.matmul(&v)?.transpose(1, 2)?.contiguous()?.reshape((b, nq, self.inner))?;
        self.out.forward(&mixed)
    }
}

#[derive(Debug, Clone)]
pub struct Mlp {
    fc1: Linear,
    fc2: Linear,
}

impl Mlp {
    pub fn new(b: &mut ParamBuilder<'_>, dim: usize, hidden: usize) -> Result<Self> {
        Ok(Self {
            fc1: Linear::new(b, "fc1", dim, hidden)?,
            fc2: Linear::new(b, "fc2", hidden, dim)?,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.fc2.forward(&self.fc1.forward(x)?.gelu()?)
    }
}

/// Pre-norm transformer block.
#[derive(Debug, Clone)]
pub struct Block {
    ln1: LayerNorm,
    attn: Attention,
    ln2: LayerNorm,
    mlp: Mlp,
}

impl Block {
    pub fn new(b: &mut ParamBuilder<'_>, dim: usize, heads: usize, mlp_ratio: usize) -> Result<Self> {
        Ok(Self {
            ln1: LayerNorm::new(b, "ln1", dim)?,
            attn: Attention::new(&mut b.sub("attn"), dim, dim, dim, heads)?,
            ln2: LayerNorm::new(b, "ln2", dim)?,
            mlp: Mlp::new(&mut b.sub("mlp"), dim, dim * mlp_ratio)?,
        })
    }

    pub fn forward(&self, x: &Tensor, bias: Option<&Tensor>) -> Result<Tensor> {
        let h = self.ln1.forward(x)?;
        let x = (x + self.attn.forward(&h, &h, bias)?)?;
        let h = self.ln2.forward(&x)?;
        Ok((&x + self.mlp.forward(&h)?)?)
    }
}
