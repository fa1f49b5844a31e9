//! Comparison methods and the accuracy harness.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, LabelNameSet, TokenSequence, TokenizedCorpus};
use crate::error::{Error, Result};
use crate::lm::{Hyperparameters, LrSchedule, Stage, Supervision, TrainExample, TransformerLm};

/// What to do with a document containing label words of several classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MultiMatch {
    /// Drop the document.
    #[default]
    Skip,
    /// Use the class of the first label word in the document.
    First,
    /// Emit one pseudo-label per matched class.
    All,
}

impl FromStr for MultiMatch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "skip" => Ok(MultiMatch::Skip),
            "first" => Ok(MultiMatch::First),
            "all" => Ok(MultiMatch::All),
            other => Err(Error::InvalidArgument(format!(
                "unknown multi-match policy {other:?} (expected skip, first or all)"
            ))),
        }
    }
}

/// `(doc_id, class)` pseudo-labels from label-name matching.
pub fn simple_match_labels(corpus: &TokenizedCorpus, names: &LabelNameSet, policy: MultiMatch) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (doc_id, seq) in corpus.sequences().iter().enumerate() {
        let mut classes: Vec<usize> = Vec::new();
        for w in &seq.words {
            if let Some(c) = names.class_of(w) {
                if !classes.contains(&c) {
                    classes.push(c);
                }
            }
        }
        match (classes.len(), policy) {
            (0, _) => {}
            (1, _) | (_, MultiMatch::First) => out.push((doc_id, classes[0])),
            (_, MultiMatch::Skip) => {}
            (_, MultiMatch::All) => {
                classes.sort_unstable();
                out.extend(classes.into_iter().map(|c| (doc_id, c)));
            }
        }
    }
    out
}

/// Document-level cross-entropy fine-tuning at `[CLS]` on `(doc_id, class)`
/// pairs with the MCP learning rate, for `epochs` shuffled passes. Returns
/// the mean loss of each epoch.
pub fn train_on_labels(
    corpus: &TokenizedCorpus,
    labels: &[(usize, usize)],
    lm: &mut TransformerLm,
    hp: &Hyperparameters,
    epochs: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if labels.is_empty() {
        return Err(Error::NoSupervision);
    }
    let per_epoch = labels.len().div_ceil(hp.batch_size);
    let schedule = LrSchedule {
        peak: hp.lr_mcp,
        total_steps: per_epoch * epochs,
        warmup_fraction: hp.warmup_fraction,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order = labels.to_vec();
    let mut means = Vec::with_capacity(epochs);
    let mut step = 0;
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for chunk in order.chunks(hp.batch_size) {
            let batch: Vec<TrainExample> = chunk
                .iter()
                .map(|&(d, class)| TrainExample {
                    tokens: corpus.get(d).token_ids.clone(),
                    supervision: Supervision::Class { position: 0, class },
                })
                .collect();
            sum += lm.train_step(&batch, schedule.lr(step))?;
            step += 1;
        }
        means.push(sum / per_epoch as f64);
    }
    Ok(means)
}

/// Seeded sample of `n_per_class` gold-labelled documents per class.
pub fn sample_per_class(corpus: &Corpus, n_per_class: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    if n_per_class == 0 {
        return Err(Error::InsufficientLabeled("n_per_class must be positive".into()));
    }
    let gold = corpus
        .gold_labels()
        .ok_or_else(|| Error::MissingGoldLabels(corpus.name().to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for c in 0..corpus.num_classes() {
        let mut pool: Vec<usize> = (0..gold.len()).filter(|&i| gold[i] == c).collect();
        if pool.len() < n_per_class {
            return Err(Error::InsufficientLabeled(format!(
                "class {c} has {} documents, {n_per_class} requested",
                pool.len()
            )));
        }
        pool.shuffle(&mut rng);
        out.extend(pool[..n_per_class].iter().map(|&d| (d, c)));
    }
    out.sort_unstable();
    Ok(out)
}

/// Supervised fine-tuning on `n_per_class` sampled gold labels.
pub fn train_supervised(
    corpus: &Corpus,
    tokenized: &TokenizedCorpus,
    lm: &mut TransformerLm,
    n_per_class: usize,
    hp: &Hyperparameters,
    epochs: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let labels = sample_per_class(corpus, n_per_class, seed)?;
    let trace = train_on_labels(tokenized, &labels, lm, hp, epochs, seed)?;
    lm.set_stage(Stage::PostSupervised);
    Ok(trace)
}

/// Anything producing a class distribution per document.
pub trait DocumentClassifier: Sync {
    fn predict(&self, seq: &TokenSequence) -> Vec<f64>;
}

impl DocumentClassifier for TransformerLm {
    fn predict(&self, seq: &TokenSequence) -> Vec<f64> {
        self.predict_proba(seq)
    }
}

impl<F: Fn(&TokenSequence) -> Vec<f64> + Sync> DocumentClassifier for F {
    fn predict(&self, seq: &TokenSequence) -> Vec<f64> {
        self(seq)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub accuracy: f64,
    /// `confusion[gold][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub per_class: Vec<ClassMetrics>,
    pub metadata: BTreeMap<String, String>,
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

impl EvalReport {
    /// Report from predicted distributions against gold labels.
    pub fn from_predictions(method: &str, predictions: &[Vec<f64>], gold: &[usize], num_classes: usize) -> Result<Self> {
        if predictions.len() != gold.len() {
            return Err(Error::DimensionMismatch {
                expected: gold.len(),
                found: predictions.len(),
            });
        }
        let mut confusion = vec![vec![0usize; num_classes]; num_classes];
        for (p, &g) in predictions.iter().zip(gold) {
            confusion[g][argmax(p)] += 1;
        }
        let correct: usize = (0..num_classes).map(|c| confusion[c][c]).sum();
        let per_class = (0..num_classes)
            .map(|c| {
                let support: usize = confusion[c].iter().sum();
                let predicted: usize = confusion.iter().map(|r| r[c]).sum();
                let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
                ClassMetrics {
                    precision: ratio(confusion[c][c], predicted),
                    recall: ratio(confusion[c][c], support),
                    support,
                }
            })
            .collect();
        Ok(EvalReport {
            method: method.to_string(),
            accuracy: correct as f64 / gold.len().max(1) as f64,
            confusion,
            per_class,
            metadata: BTreeMap::new(),
        })
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable") + "\n"
    }
}

/// Argmax accuracy of `model` on a labelled test corpus.
pub fn evaluate<C: DocumentClassifier + ?Sized>(
    method: &str,
    model: &C,
    test: &Corpus,
    tokenized: &TokenizedCorpus,
) -> Result<EvalReport> {
    use rayon::prelude::*;
    let gold = test
        .gold_labels()
        .ok_or_else(|| Error::MissingGoldLabels(test.name().to_string()))?;
    let preds: Vec<Vec<f64>> = tokenized.sequences().par_iter().map(|s| model.predict(s)).collect();
    EvalReport::from_predictions(method, &preds, &gold, test.num_classes())
}

/// Published full-scale accuracies: `(method, [AG News, DBPedia, IMDB, Amazon])`.
pub const REFERENCE_ACCURACIES: &[(&str, [f64; 4])] = &[
    ("Dataless", [0.696, 0.634, 0.505, 0.501]),
    ("WeSTClass", [0.823, 0.811, 0.774, 0.753]),
    ("BERT w. simple match", [0.752, 0.722, 0.677, 0.654]),
    ("MCP only (no self-training)", [0.822, 0.860, 0.802, 0.853]),
    ("Full pipeline", [0.864, 0.911, 0.865, 0.916]),
    ("UDA (10 labels/class)", [0.869, 0.986, 0.887, 0.960]),
    ("char-CNN (supervised)", [0.872, 0.983, 0.853, 0.945]),
    ("BERT (supervised)", [0.944, 0.993, 0.945, 0.972]),
];

pub const REFERENCE_DATASETS: [&str; 4] = ["AG News", "DBPedia", "IMDB", "Amazon"];

/// Side-by-side accuracy table of several reports.
pub fn comparison_table(reports: &[EvalReport]) -> String {
    let width = reports.iter().map(|r| r.method.len()).max().unwrap_or(6).max(6);
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  accuracy", "method");
    for r in reports {
        let _ = writeln!(out, "{:<width$}  {:.4}", r.method, r.accuracy);
    }
    out
}
