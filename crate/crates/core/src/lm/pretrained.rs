//! Hugging Face BERT directories (`config.json`, `vocab.txt`,
//! `model.safetensors`).

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use safetensors::tensor::{Dtype, TensorView};
use safetensors::SafeTensors;
use serde::Deserialize;

use super::model::{Model, ModelConfig, Slot};
use super::optim::Adam;
use super::transformer::{BackendKind, Freeze, Stage, TransformerLm};
use crate::corpus::WordPiece;
use crate::error::{Error, Result};

#[derive(Deserialize)]
struct HfConfig {
    vocab_size: usize,
    hidden_size: usize,
    num_hidden_layers: usize,
    num_attention_heads: usize,
    intermediate_size: usize,
    max_position_embeddings: usize,
    #[serde(default = "two")]
    type_vocab_size: usize,
    #[serde(default = "default_eps")]
    layer_norm_eps: f64,
    #[serde(default = "default_dropout")]
    hidden_dropout_prob: f64,
    #[serde(default)]
    hidden_act: Option<String>,
}

fn two() -> usize {
    2
}
fn default_eps() -> f64 {
    1e-12
}
fn default_dropout() -> f64 {
    0.1
}

/// How a stored tensor maps onto a layout slot.
#[derive(Clone, Copy)]
enum Store {
    AsIs,
    /// Stored `[out, in]`; the layout wants `[in, out]`.
    Transposed { out: usize, inp: usize },
}

fn tensor_map(cfg: &ModelConfig, model: &Model) -> Vec<(String, Slot, Store)> {
    let lay = &model.layout;
    let h = cfg.hidden_size;
    let i = cfg.intermediate_size;
    let sq = Store::Transposed { out: h, inp: h };
    let mut m = vec![
        ("bert.embeddings.word_embeddings.weight".to_string(), lay.word, Store::AsIs),
        ("bert.embeddings.position_embeddings.weight".into(), lay.pos, Store::AsIs),
        ("bert.embeddings.token_type_embeddings.weight".into(), lay.typ, Store::AsIs),
        ("bert.embeddings.LayerNorm.weight".into(), lay.emb_ln_g, Store::AsIs),
        ("bert.embeddings.LayerNorm.bias".into(), lay.emb_ln_b, Store::AsIs),
    ];
    for (l, s) in lay.layers.iter().enumerate() {
        let p = |n: &str| format!("bert.encoder.layer.{l}.{n}");
        m.extend([
            (p("attention.self.query.weight"), s.q_w, sq),
            (p("attention.self.query.bias"), s.q_b, Store::AsIs),
            (p("attention.self.key.weight"), s.k_w, sq),
            (p("attention.self.key.bias"), s.k_b, Store::AsIs),
            (p("attention.self.value.weight"), s.v_w, sq),
            (p("attention.self.value.bias"), s.v_b, Store::AsIs),
            (p("attention.output.dense.weight"), s.o_w, sq),
            (p("attention.output.dense.bias"), s.o_b, Store::AsIs),
            (p("attention.output.LayerNorm.weight"), s.ln1_g, Store::AsIs),
            (p("attention.output.LayerNorm.bias"), s.ln1_b, Store::AsIs),
            (p("intermediate.dense.weight"), s.ff1_w, Store::Transposed { out: i, inp: h }),
            (p("intermediate.dense.bias"), s.ff1_b, Store::AsIs),
            (p("output.dense.weight"), s.ff2_w, Store::Transposed { out: h, inp: i }),
            (p("output.dense.bias"), s.ff2_b, Store::AsIs),
            (p("output.LayerNorm.weight"), s.ln2_g, Store::AsIs),
            (p("output.LayerNorm.bias"), s.ln2_b, Store::AsIs),
        ]);
    }
    m.extend([
        ("cls.predictions.transform.dense.weight".into(), lay.mlm_w, sq),
        ("cls.predictions.transform.dense.bias".into(), lay.mlm_b, Store::AsIs),
        ("cls.predictions.transform.LayerNorm.weight".into(), lay.mlm_ln_g, Store::AsIs),
        ("cls.predictions.transform.LayerNorm.bias".into(), lay.mlm_ln_b, Store::AsIs),
        ("cls.predictions.decoder.weight".into(), lay.dec_w, Store::AsIs),
        ("cls.predictions.bias".into(), lay.dec_b, Store::AsIs),
    ]);
    m
}

fn legacy_names(name: &str) -> Vec<String> {
    let mut out = vec![name.to_string()];
    if let Some(rest) = name.strip_prefix("bert.") {
        out.push(rest.to_string());
    }
    let more: Vec<String> = out
        .iter()
        .filter(|n| n.contains("LayerNorm."))
        .map(|n| n.replace("LayerNorm.weight", "LayerNorm.gamma").replace("LayerNorm.bias", "LayerNorm.beta"))
        .collect();
    out.extend(more);
    out
}

fn to_f64(view: &TensorView<'_>, name: &str) -> Result<Vec<f64>> {
    let data = view.data();
    match view.dtype() {
        Dtype::F64 => Ok(data.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()),
        Dtype::F32 => Ok(data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect()),
        Dtype::BF16 => Ok(data
            .chunks_exact(2)
            .map(|c| f32::from_bits((u16::from_le_bytes([c[0], c[1]]) as u32) << 16) as f64)
            .collect()),
        other => Err(Error::Unsupported {
            backend: "pretrained".into(),
            operation: format!("tensor {name} has dtype {other:?}"),
        }),
    }
}

impl TransformerLm {
    /// Loads a BERT masked-LM directory and attaches a fresh `num_classes`-way
    /// classifier head seeded by `seed`. A missing decoder weight is tied to
    /// the word embeddings.
    pub fn load_pretrained(dir: &Path, num_classes: usize, seed: u64) -> Result<Self> {
        let read = |name: &str| {
            let p = dir.join(name);
            fs::read(&p).map_err(|e| Error::io(&p, e))
        };
        let hf: HfConfig = serde_json::from_slice(&read("config.json")?)?;
        if let Some(act) = &hf.hidden_act {
            if act != "gelu" {
                return Err(Error::Unsupported {
                    backend: "pretrained".into(),
                    operation: format!("activation {act}"),
                });
            }
        }
        let vocab = String::from_utf8(read("vocab.txt")?)
            .map_err(|_| Error::InvalidArgument("vocab.txt is not UTF-8".into()))?;
        let tokenizer = WordPiece::from_vocab(vocab.lines().map(str::to_string).collect())?;
        let cfg = ModelConfig {
            vocab_size: hf.vocab_size,
            hidden_size: hf.hidden_size,
            num_layers: hf.num_hidden_layers,
            num_heads: hf.num_attention_heads,
            intermediate_size: hf.intermediate_size,
            max_positions: hf.max_position_embeddings,
            type_vocab_size: hf.type_vocab_size,
            layer_norm_eps: hf.layer_norm_eps,
            dropout: hf.hidden_dropout_prob,
            num_classes,
        };
        let bytes = read("model.safetensors")?;
        let st = SafeTensors::deserialize(&bytes)
            .map_err(|e| Error::InvalidArgument(format!("model.safetensors: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = Model::init(cfg.clone(), &mut rng);
        let available: HashMap<String, ()> = st.names().into_iter().map(|n| (n.clone(), ())).collect();
        for (name, slot, store) in tensor_map(&cfg, &model) {
            let found = legacy_names(&name).into_iter().find(|n| available.contains_key(n));
            let (view, key) = match found {
                Some(n) => (st.tensor(&n).map_err(|e| Error::InvalidArgument(format!("{n}: {e}")))?, n),
                None if name == "cls.predictions.decoder.weight" => {
                    let (w, d) = (model.layout.word, model.layout.dec_w);
                    let tied = model.params[w.range()].to_vec();
                    model.params[d.range()].copy_from_slice(&tied);
                    continue;
                }
                None => return Err(Error::InvalidArgument(format!("model.safetensors lacks {name}"))),
            };
            let values = to_f64(&view, &key)?;
            if values.len() != slot.len {
                return Err(Error::DimensionMismatch {
                    expected: slot.len,
                    found: values.len(),
                });
            }
            let dst = &mut model.params[slot.range()];
            match store {
                Store::AsIs => dst.copy_from_slice(&values),
                Store::Transposed { out, inp } => {
                    for o in 0..out {
                        for i in 0..inp {
                            dst[i * out + o] = values[o * inp + i];
                        }
                    }
                }
            }
        }
        let optimizer = Adam::new(model.params.len());
        TransformerLm::assemble(
            BackendKind::Pretrained,
            tokenizer,
            model,
            optimizer,
            Stage::Base,
            Freeze::default(),
            seed,
        )
    }

    /// Writes the encoder and MLM head as a BERT directory readable by
    /// [`TransformerLm::load_pretrained`] (64-bit tensors).
    pub fn export_pretrained(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let cfg = &self.model.cfg;
        let config = serde_json::json!({
            "architectures": ["BertForMaskedLM"],
            "model_type": "bert",
            "vocab_size": cfg.vocab_size,
            "hidden_size": cfg.hidden_size,
            "num_hidden_layers": cfg.num_layers,
            "num_attention_heads": cfg.num_heads,
            "intermediate_size": cfg.intermediate_size,
            "max_position_embeddings": cfg.max_positions,
            "type_vocab_size": cfg.type_vocab_size,
            "layer_norm_eps": cfg.layer_norm_eps,
            "hidden_dropout_prob": cfg.dropout,
            "attention_probs_dropout_prob": cfg.dropout,
            "hidden_act": "gelu",
        });
        let p = dir.join("config.json");
        fs::write(&p, serde_json::to_string_pretty(&config)? + "\n").map_err(|e| Error::io(&p, e))?;
        self.tokenizer.save(&dir.join("vocab.txt"))?;
        let mut buffers: Vec<(String, Vec<usize>, Vec<u8>)> = Vec::new();
        for (name, slot, store) in tensor_map(cfg, &self.model) {
            let src = &self.model.params[slot.range()];
            let (shape, values) = match store {
                Store::AsIs => (vec![slot.len], src.to_vec()),
                Store::Transposed { out, inp } => {
                    let mut v = vec![0.0; slot.len];
                    for o in 0..out {
                        for i in 0..inp {
                            v[o * inp + i] = src[i * out + o];
                        }
                    }
                    (vec![out, inp], v)
                }
            };
            buffers.push((name, shape, values.iter().flat_map(|v| v.to_le_bytes()).collect()));
        }
        let views: Vec<(String, TensorView<'_>)> = buffers
            .iter()
            .map(|(n, s, b)| (n.clone(), TensorView::new(Dtype::F64, s.clone(), b).expect("consistent shape")))
            .collect();
        let bytes = safetensors::serialize(views, &None)
            .map_err(|e| Error::InvalidArgument(format!("serialize: {e}")))?;
        let p = dir.join("model.safetensors");
        fs::write(&p, bytes).map_err(|e| Error::io(&p, e))
    }
}
