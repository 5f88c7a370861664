//! A RoBERTa-style transformer encoder over named parameters.
//!
//! Parameter names follow the Hugging Face layout (without the `roberta.`
//! prefix) so pretrained XLM-R weights load unchanged.

use std::collections::BTreeMap;

use candle_core::{DType, Device, Module, Tensor, Var, D};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::tokenizer::PAD_ID;
use super::ModelError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub hidden_size: usize,
    pub num_hidden_layers: usize,
    pub num_attention_heads: usize,
    pub intermediate_size: usize,
    pub max_position_embeddings: usize,
    #[serde(default = "one")]
    pub type_vocab_size: usize,
    #[serde(default = "default_eps")]
    pub layer_norm_eps: f64,
    #[serde(default = "default_dropout")]
    pub hidden_dropout_prob: f64,
    #[serde(default = "default_dropout")]
    pub attention_probs_dropout_prob: f64,
}

fn one() -> usize {
    1
}

fn default_eps() -> f64 {
    1e-5
}

fn default_dropout() -> f64 {
    0.1
}

impl EncoderConfig {
    /// 2 layers, hidden size 32: small enough for CPU smoke runs.
    pub fn tiny() -> Self {
        EncoderConfig {
            vocab_size: 2048,
            hidden_size: 32,
            num_hidden_layers: 2,
            num_attention_heads: 2,
            intermediate_size: 64,
            max_position_embeddings: 130,
            type_vocab_size: 1,
            layer_norm_eps: 1e-5,
            hidden_dropout_prob: 0.1,
            attention_probs_dropout_prob: 0.1,
        }
    }

    /// Shape of XLM-R base.
    pub fn base() -> Self {
        EncoderConfig {
            vocab_size: 250_002,
            hidden_size: 768,
            num_hidden_layers: 12,
            num_attention_heads: 12,
            intermediate_size: 3072,
            max_position_embeddings: 514,
            ..EncoderConfig::tiny()
        }
    }

    pub fn check(&self) -> Result<(), ModelError> {
        if self.num_attention_heads == 0
            || !self.hidden_size.is_multiple_of(self.num_attention_heads)
        {
            return Err(ModelError::ShapeMismatch(format!(
                "hidden size {} is not divisible by {} heads",
                self.hidden_size, self.num_attention_heads
            )));
        }
        Ok(())
    }

    /// Parameter names and shapes of the encoder.
    pub fn parameter_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let h = self.hidden_size;
        let mut out = vec![
            (
                "embeddings.word_embeddings.weight".to_string(),
                vec![self.vocab_size, h],
            ),
            (
                "embeddings.position_embeddings.weight".into(),
                vec![self.max_position_embeddings, h],
            ),
            (
                "embeddings.token_type_embeddings.weight".into(),
                vec![self.type_vocab_size, h],
            ),
            ("embeddings.LayerNorm.weight".into(), vec![h]),
            ("embeddings.LayerNorm.bias".into(), vec![h]),
        ];
        for l in 0..self.num_hidden_layers {
            let p = format!("encoder.layer.{l}");
            for name in [
                "attention.self.query",
                "attention.self.key",
                "attention.self.value",
                "attention.output.dense",
            ] {
                out.push((format!("{p}.{name}.weight"), vec![h, h]));
                out.push((format!("{p}.{name}.bias"), vec![h]));
            }
            out.push((format!("{p}.attention.output.LayerNorm.weight"), vec![h]));
            out.push((format!("{p}.attention.output.LayerNorm.bias"), vec![h]));
            out.push((
                format!("{p}.intermediate.dense.weight"),
                vec![self.intermediate_size, h],
            ));
            out.push((
                format!("{p}.intermediate.dense.bias"),
                vec![self.intermediate_size],
            ));
            out.push((
                format!("{p}.output.dense.weight"),
                vec![h, self.intermediate_size],
            ));
            out.push((format!("{p}.output.dense.bias"), vec![h]));
            out.push((format!("{p}.output.LayerNorm.weight"), vec![h]));
            out.push((format!("{p}.output.LayerNorm.bias"), vec![h]));
        }
        out
    }
}

/// Named trainable tensors.
#[derive(Clone, Debug, Default)]
pub struct Params {
    pub vars: BTreeMap<String, Var>,
}

impl Params {
    pub fn get(&self, name: &str) -> Result<&Tensor, ModelError> {
        self.vars
            .get(name)
            .map(Var::as_tensor)
            .ok_or_else(|| ModelError::ShapeMismatch(format!("missing parameter `{name}`")))
    }

    /// Normal(0, 0.02) weights, unit LayerNorm scales, zero biases, drawn in
    /// name order from `rng`.
    pub fn init(
        shapes: &[(String, Vec<usize>)],
        rng: &mut ChaCha8Rng,
        device: &Device,
    ) -> Result<Self, ModelError> {
        let normal = Normal::new(0.0f32, 0.02).expect("valid normal");
        let mut sorted: Vec<&(String, Vec<usize>)> = shapes.iter().collect();
        sorted.sort_by(|a, b| a.0.cmp(&b.0));
        let mut vars = BTreeMap::new();
        for (name, shape) in sorted {
            let n: usize = shape.iter().product();
            let data: Vec<f32> = if name.ends_with(".bias") {
                vec![0.0; n]
            } else if name.contains("LayerNorm") {
                vec![1.0; n]
            } else {
                (0..n).map(|_| normal.sample(rng)).collect()
            };
            let var = Var::from_vec(data, shape.as_slice(), device)?;
            vars.insert(name.clone(), var);
        }
        Ok(Params { vars })
    }
}

/// Hands out seeded dropout masks during training.
pub struct Dropout<'a> {
    pub rng: &'a mut ChaCha8Rng,
}

impl Dropout<'_> {
    fn apply(&mut self, x: &Tensor, p: f64) -> Result<Tensor, ModelError> {
        if p <= 0.0 {
            return Ok(x.clone());
        }
        let n = x.elem_count();
        let scale = (1.0 / (1.0 - p)) as f32;
        let keep: Vec<f32> = (0..n)
            .map(|_| {
                if self.rng.random::<f64>() < p {
                    0.0
                } else {
                    scale
                }
            })
            .collect();
        let mask = Tensor::from_vec(keep, x.shape(), x.device())?;
        Ok(x.mul(&mask)?)
    }
}

fn drop(x: Tensor, p: f64, dropout: &mut Option<Dropout<'_>>) -> Result<Tensor, ModelError> {
    match dropout {
        Some(d) => d.apply(&x, p),
        None => Ok(x),
    }
}

pub fn linear(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor, ModelError> {
    Ok(x.broadcast_matmul(&w.t()?)?.broadcast_add(b)?)
}

fn layer_norm(x: &Tensor, w: &Tensor, b: &Tensor, eps: f64) -> Result<Tensor, ModelError> {
    let mean = x.mean_keepdim(D::Minus1)?;
    let centered = x.broadcast_sub(&mean)?;
    let var = centered.sqr()?.mean_keepdim(D::Minus1)?;
    let normed = centered.broadcast_div(&(var + eps)?.sqrt()?)?;
    Ok(normed.broadcast_mul(w)?.broadcast_add(b)?)
}

/// A padded batch of token ids.
#[derive(Clone, Debug)]
pub struct Batch {
    pub ids: Tensor,
    pub positions: Tensor,
    /// 1.0 for real tokens, 0.0 for padding; shape (batch, len).
    pub mask: Vec<f32>,
    pub len: usize,
    pub size: usize,
}

impl Batch {
    /// Right-pads every sequence to the longest one. Positions follow the
    /// RoBERTa convention: real tokens count from `PAD_ID + 1`, padding sits
    /// at `PAD_ID`.
    pub fn new(seqs: &[&[u32]], device: &Device) -> Result<Self, ModelError> {
        let size = seqs.len();
        let len = seqs.iter().map(|s| s.len()).max().unwrap_or(0).max(1);
        let mut ids = Vec::with_capacity(size * len);
        let mut positions = Vec::with_capacity(size * len);
        let mut mask = Vec::with_capacity(size * len);
        for s in seqs {
            for i in 0..len {
                if let Some(id) = s.get(i) {
                    ids.push(*id);
                    positions.push(PAD_ID + 1 + i as u32);
                    mask.push(1.0);
                } else {
                    ids.push(PAD_ID);
                    positions.push(PAD_ID);
                    mask.push(0.0);
                }
            }
        }
        Ok(Batch {
            ids: Tensor::from_vec(ids, (size, len), device)?,
            positions: Tensor::from_vec(positions, (size, len), device)?,
            mask,
            len,
            size,
        })
    }
}

struct Embedding<'a>(&'a Tensor);

impl Module for Embedding<'_> {
    fn forward(&self, ids: &Tensor) -> candle_core::Result<Tensor> {
        let dims = ids.dims().to_vec();
        let flat = ids.flatten_all()?;
        let out = self.0.index_select(&flat, 0)?;
        let mut shape = dims;
        shape.push(self.0.dim(1)?);
        out.reshape(shape)
    }
}

/// Final-layer embedding of the first (`<s>`) token, shape (batch, hidden).
pub fn encode(
    cfg: &EncoderConfig,
    p: &Params,
    batch: &Batch,
    mut dropout: Option<Dropout<'_>>,
) -> Result<Tensor, ModelError> {
    let (b, l, h) = (batch.size, batch.len, cfg.hidden_size);
    let heads = cfg.num_attention_heads;
    let dh = h / heads;
    let device = batch.ids.device();

    let words = Embedding(p.get("embeddings.word_embeddings.weight")?).forward(&batch.ids)?;
    let pos =
        Embedding(p.get("embeddings.position_embeddings.weight")?).forward(&batch.positions)?;
    let token_type = p
        .get("embeddings.token_type_embeddings.weight")?
        .narrow(0, 0, 1)?;
    let x = words.add(&pos)?.broadcast_add(&token_type)?;
    let x = layer_norm(
        &x,
        p.get("embeddings.LayerNorm.weight")?,
        p.get("embeddings.LayerNorm.bias")?,
        cfg.layer_norm_eps,
    )?;
    let mut x = drop(x, cfg.hidden_dropout_prob, &mut dropout)?;

    let bias: Vec<f32> = batch.mask.iter().map(|m| (1.0 - m) * -1e9).collect();
    let bias = Tensor::from_vec(bias, (b, 1, 1, l), device)?;
    let scale = 1.0 / (dh as f64).sqrt();

    for layer in 0..cfg.num_hidden_layers {
        let n = |s: &str| format!("encoder.layer.{layer}.{s}");
        let lin = |x: &Tensor, s: &str| {
            linear(
                x,
                p.get(&n(&format!("{s}.weight")))?,
                p.get(&n(&format!("{s}.bias")))?,
            )
        };
        let split = |t: Tensor| -> Result<Tensor, ModelError> {
            Ok(t.reshape((b, l, heads, dh))?
                .transpose(1, 2)?
                .contiguous()?)
        };
        let q = split(lin(&x, "attention.self.query")?)?;
        let k = split(lin(&x, "attention.self.key")?)?;
        let v = split(lin(&x, "attention.self.value")?)?;
        let scores = (q.matmul(&k.t()?)? * scale)?.broadcast_add(&bias)?;
        let probs = candle_nn::ops::softmax(&scores, D::Minus1)?;
        let probs = drop(probs, cfg.attention_probs_dropout_prob, &mut dropout)?;
        let ctx = probs
            .matmul(&v)?
            .transpose(1, 2)?
            .contiguous()?
            .reshape((b, l, h))?;
        let attn = drop(
            lin(&ctx, "attention.output.dense")?,
            cfg.hidden_dropout_prob,
            &mut dropout,
        )?;
        let x1 = layer_norm(
            &attn.add(&x)?,
            p.get(&n("attention.output.LayerNorm.weight"))?,
            p.get(&n("attention.output.LayerNorm.bias"))?,
            cfg.layer_norm_eps,
        )?;
        let ff = lin(&x1, "intermediate.dense")?.gelu_erf()?;
        let ff = drop(
            lin(&ff, "output.dense")?,
            cfg.hidden_dropout_prob,
            &mut dropout,
        )?;
        x = layer_norm(
            &ff.add(&x1)?,
            p.get(&n("output.LayerNorm.weight"))?,
            p.get(&n("output.LayerNorm.bias"))?,
            cfg.layer_norm_eps,
        )?;
    }
    Ok(x.narrow(1, 0, 1)?.squeeze(1)?.to_dtype(DType::F32)?)
}
