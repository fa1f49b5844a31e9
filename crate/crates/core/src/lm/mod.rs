//! Masked language model backends.
//!
//! [`MaskedLm`] is the read-only surface used to generate supervision
//! (replacement candidates from the MLM head). [`TransformerLm`] additionally
//! trains: it owns an encoder, a frozen-by-default MLM head, a K-way
//! classifier head and the Adam state. [`StubLm`] answers `mlm_topk` from
//! programmed tables so counting logic can be checked exactly.

mod checkpoint;
pub mod model;
pub mod ops;
mod optim;
mod pretrained;
mod stub;
mod transformer;

use serde::{Deserialize, Serialize};

use crate::corpus::{TokenSequence, WordPiece};
use crate::error::{Error, Result};

pub use checkpoint::{CheckpointManifest, CHECKPOINT_FORMAT_VERSION};
pub use model::ModelConfig;
pub use optim::{Adam, LrSchedule};
pub use stub::{ranked, StubLm};
pub use transformer::{BackendKind, Freeze, MlmPretraining, Stage, Supervision, TrainExample, TransformerLm};

/// One MLM replacement candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replacement {
    pub word: String,
    pub prob: f64,
}

impl Replacement {
    pub fn new(word: impl Into<String>, prob: f64) -> Self {
        Replacement {
            word: word.into(),
            prob,
        }
    }
}

/// Read-only masked-LM access: replacement candidates at word positions.
pub trait MaskedLm: Sync {
    fn backend_id(&self) -> String;

    fn tokenizer(&self) -> &WordPiece;

    /// Top-`k` single-token whole words at the word's (first-subtoken)
    /// position, by descending probability.
    fn mlm_topk(&self, seq: &TokenSequence, word_index: usize, k: usize) -> Result<Vec<Replacement>>;

    /// `mlm_topk` for several words of one sequence.
    fn mlm_topk_many(
        &self,
        seq: &TokenSequence,
        word_indices: &[usize],
        k: usize,
    ) -> Result<Vec<Vec<Replacement>>> {
        word_indices.iter().map(|&w| self.mlm_topk(seq, w, k)).collect()
    }
}

/// Hidden vector at one token position.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextualEmbedding(pub Vec<f64>);

impl ContextualEmbedding {
    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Linear classification head `softmax(W_c h + b_c)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierHead {
    pub num_classes: usize,
    pub hidden_size: usize,
    /// Row-major `num_classes × hidden_size`.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ClassifierHead {
    pub fn zeros(num_classes: usize, hidden_size: usize) -> Self {
        ClassifierHead {
            num_classes,
            hidden_size,
            weight: vec![0.0; num_classes * hidden_size],
            bias: vec![0.0; num_classes],
        }
    }
}

/// Class distribution for one embedding.
pub fn classify(h: &ContextualEmbedding, head: &ClassifierHead) -> Result<Vec<f64>> {
    if h.dim() != head.hidden_size {
        return Err(Error::DimensionMismatch {
            expected: head.hidden_size,
            found: h.dim(),
        });
    }
    let logits: Vec<f64> = (0..head.num_classes)
        .map(|c| {
            let row = &head.weight[c * head.hidden_size..(c + 1) * head.hidden_size];
            head.bias[c] + row.iter().zip(&h.0).map(|(w, x)| w * x).sum::<f64>()
        })
        .collect();
    Ok(ops::softmax(&logits))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum StStrategy {
    #[default]
    Soft,
    Hard,
}

impl std::str::FromStr for StStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "soft" => Ok(StStrategy::Soft),
            "hard" => Ok(StStrategy::Hard),
            other => Err(Error::InvalidArgument(format!(
                "unknown self-training strategy {other:?} (expected soft or hard)"
            ))),
        }
    }
}

/// Pipeline hyperparameters. Defaults are the full-scale settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparameters {
    pub top_k_replacement: usize,
    pub vocab_size_per_class: usize,
    pub indicative_threshold: usize,
    pub st_update_interval: usize,
    pub batch_size: usize,
    pub lr_mcp: f64,
    pub lr_selftrain: f64,
    pub max_seq_len: usize,
    pub st_strategy: StStrategy,
    pub hard_threshold: f64,
    pub mcp_epochs: usize,
    pub st_epochs: usize,
    pub warmup_fraction: f64,
    /// Remove stopwords and cross-class words before the top-N cut instead of after.
    pub filter_before_cut: bool,
    /// Skip stopword positions during indicative-word detection.
    pub skip_stopword_positions: bool,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            top_k_replacement: 50,
            vocab_size_per_class: 100,
            indicative_threshold: 20,
            st_update_interval: 50,
            batch_size: 128,
            lr_mcp: 2e-5,
            lr_selftrain: 1e-6,
            max_seq_len: 200,
            st_strategy: StStrategy::Soft,
            hard_threshold: 0.95,
            mcp_epochs: 3,
            st_epochs: 1,
            warmup_fraction: 0.1,
            filter_before_cut: false,
            skip_stopword_positions: true,
        }
    }
}

impl Hyperparameters {
    /// Full-scale defaults with the per-dataset maximum sequence length.
    pub fn for_dataset(name: &str) -> Self {
        Hyperparameters {
            max_seq_len: max_seq_len_for(name),
            ..Default::default()
        }
    }

    /// Settings for the tiny trainable backend on desk-scale corpora.
    pub fn tiny_profile() -> Self {
        Hyperparameters {
            batch_size: 16,
            lr_mcp: 1e-3,
            lr_selftrain: 5e-5,
            vocab_size_per_class: 60,
            max_seq_len: 64,
            mcp_epochs: 3,
            st_epochs: 4,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("top_k_replacement", self.top_k_replacement),
            ("vocab_size_per_class", self.vocab_size_per_class),
            ("indicative_threshold", self.indicative_threshold),
            ("st_update_interval", self.st_update_interval),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.max_seq_len < 3 {
            return Err(Error::Config("max_seq_len must be at least 3".into()));
        }
        if self.indicative_threshold > self.top_k_replacement {
            return Err(Error::Config(
                "indicative_threshold must not exceed top_k_replacement".into(),
            ));
        }
        if !(self.hard_threshold > 0.0 && self.hard_threshold < 1.0) {
            return Err(Error::Config("hard_threshold must lie in (0, 1)".into()));
        }
        if !(self.lr_mcp >= 0.0 && self.lr_selftrain >= 0.0) {
            return Err(Error::Config("learning rates must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.warmup_fraction) {
            return Err(Error::Config("warmup_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Maximum sequence length used for each benchmark.
pub fn max_seq_len_for(dataset: &str) -> usize {
    let d = dataset.to_ascii_lowercase().replace(['_', '-', ' '], "");
    if d.contains("imdb") {
        512
    } else {
        200
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_head_is_uniform() {
        let head = ClassifierHead::zeros(4, 3);
        let p = classify(&ContextualEmbedding(vec![1.0, -2.0, 0.5]), &head).unwrap();
        assert!(p.iter().all(|&x| (x - 0.25).abs() < 1e-15));
    }

    #[test]
    fn closed_form_two_class() {
        let mut head = ClassifierHead::zeros(2, 1);
        head.bias[0] = 3f64.ln();
        let p = classify(&ContextualEmbedding(vec![0.0]), &head).unwrap();
        assert!((p[0] - 0.75).abs() < 1e-12 && (p[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let head = ClassifierHead::zeros(2, 3);
        assert!(matches!(
            classify(&ContextualEmbedding(vec![0.0; 2]), &head),
            Err(Error::DimensionMismatch { expected: 3, found: 2 })
        ));
    }

    #[test]
    fn defaults_and_validation() {
        let hp = Hyperparameters::default();
        assert_eq!((hp.top_k_replacement, hp.vocab_size_per_class, hp.indicative_threshold), (50, 100, 20));
        assert_eq!((hp.st_update_interval, hp.batch_size), (50, 128));
        assert_eq!((hp.lr_mcp, hp.lr_selftrain), (2e-5, 1e-6));
        hp.validate().unwrap();
        assert_eq!(max_seq_len_for("AG News"), 200);
        assert_eq!(max_seq_len_for("dbpedia"), 200);
        assert_eq!(max_seq_len_for("imdb"), 512);
        assert_eq!(max_seq_len_for("amazon"), 200);
        let bad = Hyperparameters { indicative_threshold: 60, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = Hyperparameters { hard_threshold: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    /// Independent 64-bit softmax.
    fn oracle_softmax(z: &[f64]) -> Vec<f64> {
        let m = z.iter().cloned().fold(f64::MIN, f64::max);
        let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
        let s: f64 = e.iter().sum();
        e.into_iter().map(|v| v / s).collect()
    }

    proptest! {
        #[test]
        fn classify_is_distribution_and_matches_oracle(
            h in proptest::collection::vec(-3.0f64..3.0, 8),
            w in proptest::collection::vec(-2.0f64..2.0, 32),
            b in proptest::collection::vec(-1.0f64..1.0, 4),
        ) {
            let head = ClassifierHead { num_classes: 4, hidden_size: 8, weight: w.clone(), bias: b.clone() };
            let p = classify(&ContextualEmbedding(h.clone()), &head).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            prop_assert!(p.iter().all(|&x| x > 0.0));
            let z: Vec<f64> = (0..4).map(|c| b[c] + (0..8).map(|j| w[c * 8 + j] * h[j]).sum::<f64>()).collect();
            for (a, o) in p.iter().zip(oracle_softmax(&z)) {
                prop_assert!((a - o).abs() < 1e-6);
            }
        }
    }
}
