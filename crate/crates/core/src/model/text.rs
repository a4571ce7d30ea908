use candle_core::{DType, Device, Tensor};

use super::config::VlsmConfig;
use super::layers::{Block, LayerNorm, Linear};
use super::params::ParamBuilder;
use crate::error::Result;

pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const EOS: u32 = 2;
const RESERVED: u32 = 3;

/// Word-level tokenizer with a hashed vocabulary. Words are lowercase
/// alphanumeric runs (hyphens and apostrophes kept); other punctuation
/// marks are tokens of their own.
#[derive(Debug, Clone)]
pub struct Tokenizer {
    vocab_size: u32,
    context_length: usize,
}

fn fnv1a(s: &str) -> u64 {
    s.bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

pub fn split_words(prompt: &str) -> Vec<String> {
    let mut words = Vec::new();
    let mut current = String::new();
    for ch in prompt.chars() {
        if ch.is_alphanumeric() || ch == '-' || ch == '\'' {
            current.extend(ch.to_lowercase());
        } else {
            if !current.is_empty() {
                words.push(std::mem::take(&mut current));
            }
            if !ch.is_whitespace() {
                words.push(ch.to_string());
            }
        }
    }
    if !current.is_empty() {
        words.push(current);
    }
    words
}

impl Tokenizer {
    pub fn new(vocab_size: usize, context_length: usize) -> Self {
        Self {
            vocab_size: vocab_size as u32,
            context_length,
        }
    }

    pub fn token_id(&self, word: &str) -> u32 {
        RESERVED + (fnv1a(word) % (self.vocab_size - RESERVED) as u64) as u32
    }

    /// `BOS w1 .. wn EOS`, truncated to the context length.
    pub fn encode(&self, prompt: &str) -> Vec<u32> {
        let words = split_words(prompt);
        let room = self.context_length - 2;
        if words.len() > room {
            log::warn!(
                "prompt of {} tokens truncated to the context length {}",
                words.len() + 2,
                self.context_length
            );
        }
        let mut ids = Vec::with_capacity(words.len().min(room) + 2);
        ids.push(BOS);
        ids.extend(words.iter().take(room).map(|w| self.token_id(w)));
        ids.push(EOS);
        ids
    }
}

/// Output of the text encoder for a batch of prompts.
#[derive(Debug, Clone)]
pub struct TextEncoding {
    /// B x L x Dt
    pub tokens: Tensor,
    /// B x Dj, the projected end-of-sequence embedding.
    pub pooled: Tensor,
    /// B x L, 1 for real tokens and 0 for padding.
    pub mask: Tensor,
    pub lengths: Vec<usize>,
}

impl TextEncoding {
    /// Additive attention bias (B x 1 x 1 x L) hiding padded keys.
    pub fn key_bias(&self) -> Result<Tensor> {
        let (b, l) = self.mask.dims2()?;
        Ok(((&self.mask - 1.0)? * 1e9)?.reshape((b, 1, 1, l))?)
    }
}

#[derive(Debug, Clone)]
pub struct TextEncoder {
    tokenizer: Tokenizer,
    embedding: Tensor,
    position: Tensor,
    blocks: Vec<Block>,
    ln: LayerNorm,
    proj: Linear,
    dim: usize,
}

impl TextEncoder {
    pub fn new(b: &mut ParamBuilder<'_>, config: &VlsmConfig) -> Result<Self> {
        let d = config.text_dim;
        let embedding = b.uniform("embedding", &[config.vocab_size, d], 0.5)?;
        let position = b.uniform("position", &[config.context_length, d], 0.1)?;
        let blocks = (0..config.text_layers)
            .map(|i| Block::new(&mut b.sub(format!("blocks.{i}")), d, config.heads, config.mlp_ratio))
            .collect::<Result<_>>()?;
        Ok(Self {
            tokenizer: Tokenizer::new(config.vocab_size, config.context_length),
            embedding,
            position,
            blocks,
            ln: LayerNorm::new(b, "ln_final", d)?,
            proj: Linear::new(b, "proj", d, config.joint_dim)?,
            dim: d,
        })
    }

    pub fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    pub fn encode<S: AsRef<str>>(&self, prompts: &[S]) -> Result<TextEncoding> {
        let device: &Device = self.embedding.device();
        let dtype: DType = self.embedding.dtype();
        let ids: Vec<Vec<u32>> = prompts.iter().map(|p| self.tokenizer.encode(p.as_ref())).collect();
        let lengths: Vec<usize> = ids.iter().map(Vec::len).collect();
        let batch = ids.len();
        let l = lengths.iter().copied().max().unwrap_or(2);

        let mut flat = Vec::with_capacity(batch * l);
        let mut mask = Vec::with_capacity(batch * l);
        let mut eos = vec![0f64; batch * l];
        for (i, row) in ids.iter().enumerate() {
            for j in 0..l {
                flat.push(row.get(j).copied().unwrap_or(PAD));
                mask.push(if j < row.len() { 1f64 } else { 0.0 });
            }
            eos[i * l + row.len() - 1] = 1.0;
        }
        let ids = Tensor::from_vec(flat, batch * l, device)?;
        let mask = Tensor::from_vec(mask, (batch, l), device)?.to_dtype(dtype)?;
        let eos = Tensor::from_vec(eos, (batch, 1, l), device)?.to_dtype(dtype)?;

        let x = self.embedding.index_select(&ids, 0)?.reshape((batch, l, self.dim))?;
        let mut x = x.broadcast_add(&self.position.narrow(0, 0, l)?)?;

        // causal mask combined with key padding
        let causal: Vec<f64> = (0..l * l)
            .map(|k| if k % l <= k / l { 0.0 } else { -1e9 })
            .collect();
        let causal = Tensor::from_vec(causal, (1, 1, l, l), device)?.to_dtype(dtype)?;
        let padding = ((&mask - 1.0)? * 1e9)?.reshape((batch, 1, 1, l))?;
        let bias = causal.broadcast_add(&padding)?;
        for block in &self.blocks {
            x = block.forward(&x, Some(&bias))?;
        }
        let tokens = self.ln.forward(&x)?;
        let pooled = self.proj.forward(&eos.matmul(&tokens)?.squeeze(1)?)?;
        Ok(TextEncoding {
            tokens,
            pooled,
            mask,
            lengths,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::Variant;
    use crate::model::params::ParamStore;

    fn encoder() -> TextEncoder {
        let config = VlsmConfig::toy(Variant::Clipseg, 3);
        let mut store = ParamStore::new(DType::F32, Device::Cpu);
        TextEncoder::new(&mut ParamBuilder::new(&mut store, "text_encoder", 3), &config).unwrap()
    }

    #[test]
    fn word_splitting() {
        assert_eq!(
            split_words("One small pink polyp, located in the top-left."),
            vec!["one", "small", "pink", "polyp", ",", "located", "in", "the", "top-left", "."]
        );
    }

    #[test]
    fn empty_prompt_is_special_tokens_only() {
        let enc = encoder().encode(&[""]).unwrap();
        assert_eq!(enc.lengths, vec![2]);
        assert_eq!(enc.tokens.dims(), &[1, 2, 32]);
    }

    #[test]
    fn long_prompts_are_truncated() {
        let long = vec!["word"; 500].join(" ");
        let t = Tokenizer::new(1024, 32);
        assert_eq!(t.encode(&long).len(), 32);
        let enc = encoder().encode(&[long.as_str()]).unwrap();
        assert_eq!(enc.tokens.dims()[1], 32);
    }

    #[test]
    fn location_words_get_distinct_ids() {
        let t = Tokenizer::new(1024, 32);
        let ids: std::collections::BTreeSet<u32> =
            ["top", "bottom", "left", "right", "center", "small", "large", "medium"]
                .iter()
                .map(|w| t.token_id(w))
                .collect();
        assert_eq!(ids.len(), 8);
    }

    #[test]
    fn padding_does_not_change_pooled_embedding() {
        let enc = encoder();
        let alone = enc.encode(&["polyp"]).unwrap().pooled.to_vec2::<f32>().unwrap();
        let padded = enc
            .encode(&["polyp", "one small pink round polyp located in the top left"])
            .unwrap()
            .pooled
            .to_vec2::<f32>()
            .unwrap();
        for (a, b) in alone[0].iter().zip(&padded[0]) {
            assert!((a - b).abs() < 1e-5);
        }
    }
}
