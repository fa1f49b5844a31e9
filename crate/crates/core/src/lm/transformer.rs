use std::ops::Range;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{Model, ModelConfig};
use super::ops::{softmax, softmax_in_place, top_k};
use super::optim::{Adam, LrSchedule};
use super::{ClassifierHead, ContextualEmbedding, MaskedLm, Replacement};
use crate::corpus::{TokenSequence, TokenizedCorpus, WordPiece};
use crate::error::{Error, Result};

/// Where the weights came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    /// Externally supplied pretrained weights.
    Pretrained,
    /// Small transformer pretrained here with the MLM objective.
    Tiny,
}

impl BackendKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BackendKind::Pretrained => "pretrained",
            BackendKind::Tiny => "tiny",
        }
    }
}

/// Pipeline stage a set of weights belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Base,
    PostMcp,
    PostSupervised,
    PostSelftrain,
}

impl Stage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Base => "base",
            Stage::PostMcp => "post-mcp",
            Stage::PostSupervised => "post-supervised",
            Stage::PostSelftrain => "post-selftrain",
        }
    }
}

/// Which parameter groups the optimizer leaves untouched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Freeze {
    pub encoder: bool,
    pub mlm_head: bool,
    pub classifier: bool,
}

impl Default for Freeze {
    fn default() -> Self {
        Freeze {
            encoder: false,
            mlm_head: true,
            classifier: false,
        }
    }
}

/// What one training example is scored against.
#[derive(Debug, Clone, PartialEq)]
pub enum Supervision {
    /// Cross-entropy of the classifier at `position` (0 = `[CLS]`).
    Class { position: usize, class: usize },
    /// `KL(target ‖ p)` of the classifier at `position`. An all-zero target
    /// marks an excluded row.
    Soft { position: usize, target: Vec<f64> },
    /// MLM cross-entropy over the vocabulary at each `(position, token)`.
    Tokens(Vec<(usize, u32)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainExample {
    pub tokens: Vec<u32>,
    pub supervision: Supervision,
}

impl TrainExample {
    fn weight(&self) -> usize {
        match &self.supervision {
            Supervision::Class { .. } => 1,
            Supervision::Soft { target, .. } => usize::from(target.iter().any(|&q| q > 0.0)),
            Supervision::Tokens(t) => t.len(),
        }
    }
}

/// Parameter count above which gradients are accumulated in a single buffer.
const LARGE_MODEL: usize = 5_000_000;
const GRAD_CHUNKS: usize = 8;

fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Schedule for [`TransformerLm::pretrain_mlm`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlmPretraining {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Dropout used during pretraining only.
    pub dropout: f64,
}

impl Default for MlmPretraining {
    fn default() -> Self {
        MlmPretraining {
            epochs: 60,
            batch_size: 16,
            lr: 3e-3,
            dropout: 0.0,
        }
    }
}

/// Trainable transformer masked LM with a classification head.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformerLm {
    pub(crate) kind: BackendKind,
    pub(crate) tokenizer: WordPiece,
    pub(crate) model: Model,
    pub(crate) optimizer: Adam,
    pub(crate) stage: Stage,
    pub(crate) freeze: Freeze,
    pub(crate) seed: u64,
    candidates: Vec<bool>,
}

impl TransformerLm {
    pub(crate) fn assemble(
        kind: BackendKind,
        tokenizer: WordPiece,
        model: Model,
        optimizer: Adam,
        stage: Stage,
        freeze: Freeze,
        seed: u64,
    ) -> Result<Self> {
        if tokenizer.vocab_size() != model.cfg.vocab_size {
            return Err(Error::DimensionMismatch {
                expected: model.cfg.vocab_size,
                found: tokenizer.vocab_size(),
            });
        }
        if optimizer.m.len() != model.params.len() || optimizer.v.len() != model.params.len() {
            return Err(Error::DimensionMismatch {
                expected: model.params.len(),
                found: optimizer.m.len(),
            });
        }
        let candidates = (0..tokenizer.vocab_size() as u32)
            .map(|id| tokenizer.is_candidate_word(id))
            .collect();
        Ok(TransformerLm {
            kind,
            tokenizer,
            model,
            optimizer,
            stage,
            freeze,
            seed,
            candidates,
        })
    }

    /// Randomly initialized model; `kind` records the provenance.
    pub fn new_random(kind: BackendKind, tokenizer: WordPiece, cfg: ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = Model::init(cfg, &mut rng);
        let optimizer = Adam::new(model.params.len());
        Self::assemble(kind, tokenizer, model, optimizer, Stage::Base, Freeze::default(), seed)
            .expect("consistent sizes")
    }

    /// The 2-layer, hidden-32 backend over `tokenizer`.
    pub fn tiny(tokenizer: WordPiece, num_classes: usize, max_positions: usize, seed: u64) -> Self {
        let cfg = ModelConfig::tiny(tokenizer.vocab_size(), num_classes, max_positions);
        Self::new_random(BackendKind::Tiny, tokenizer, cfg, seed)
    }

    pub fn kind(&self) -> BackendKind {
        self.kind
    }

    pub fn config(&self) -> &ModelConfig {
        &self.model.cfg
    }

    pub fn hidden_size(&self) -> usize {
        self.model.cfg.hidden_size
    }

    pub fn num_classes(&self) -> usize {
        self.model.cfg.num_classes
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn set_stage(&mut self, stage: Stage) {
        self.stage = stage;
    }

    pub fn freeze(&self) -> Freeze {
        self.freeze
    }

    pub fn set_freeze(&mut self, freeze: Freeze) {
        self.freeze = freeze;
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }

    /// Optimizer steps taken so far.
    pub fn step(&self) -> u64 {
        self.optimizer.step
    }

    pub fn params(&self) -> &[f64] {
        &self.model.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.model.params
    }

    pub fn optimizer(&self) -> &Adam {
        &self.optimizer
    }

    /// Replaces the classifier with a freshly initialized `num_classes`-way
    /// head (zero bias, N(0, 0.02) weights) and clears its optimizer moments.
    pub fn init_classifier(&mut self, num_classes: usize, seed: u64) {
        let mut cfg = self.model.cfg.clone();
        cfg.num_classes = num_classes;
        let keep = self.model.layout.classifier_range().start;
        let mut params = self.model.params[..keep].to_vec();
        let total = super::model::Layout::new(&cfg).total;
        params.resize(total, 0.0);
        self.model = Model::from_params(cfg, params).expect("sized from layout");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.model.reset_classifier(&mut rng);
        self.optimizer.m.truncate(keep);
        self.optimizer.v.truncate(keep);
        self.optimizer.m.resize(total, 0.0);
        self.optimizer.v.resize(total, 0.0);
    }

    pub fn classifier_head(&self) -> ClassifierHead {
        let lay = &self.model.layout;
        ClassifierHead {
            num_classes: self.model.cfg.num_classes,
            hidden_size: self.model.cfg.hidden_size,
            weight: self.model.params[lay.cls_w.range()].to_vec(),
            bias: self.model.params[lay.cls_b.range()].to_vec(),
        }
    }

    /// Final hidden states `[T, H]` in evaluation mode.
    pub fn hidden_states(&self, tokens: &[u32]) -> Vec<f64> {
        self.model.encode(tokens, None).0
    }

    /// Hidden vector at the `[CLS]` position.
    pub fn cls_embedding(&self, seq: &TokenSequence) -> ContextualEmbedding {
        let h = self.hidden_size();
        ContextualEmbedding(self.hidden_states(&seq.token_ids)[..h].to_vec())
    }

    /// Class distribution from the `[CLS]` embedding.
    pub fn predict_proba(&self, seq: &TokenSequence) -> Vec<f64> {
        let h = self.hidden_size();
        let hidden = self.hidden_states(&seq.token_ids);
        softmax(&self.model.classifier_logits(&hidden[..h]))
    }

    /// Class distribution from the hidden state at token `position`.
    pub fn classify_at(&self, tokens: &[u32], position: usize) -> Result<Vec<f64>> {
        if position >= tokens.len() {
            return Err(Error::InvalidArgument(format!(
                "position {position} outside sequence of {}",
                tokens.len()
            )));
        }
        let h = self.hidden_size();
        let hidden = self.hidden_states(tokens);
        Ok(softmax(&self.model.classifier_logits(&hidden[position * h..(position + 1) * h])))
    }

    /// `predict_proba` over many sequences, in order.
    pub fn predict_many(&self, seqs: &[TokenSequence]) -> Vec<Vec<f64>> {
        seqs.par_iter().map(|s| self.predict_proba(s)).collect()
    }

    /// Full MLM distribution over the vocabulary at a word's first subtoken.
    pub fn mlm_distribution(&self, seq: &TokenSequence, word_index: usize) -> Result<Vec<f64>> {
        let span = seq.word_spans.get(word_index).ok_or(Error::PositionOutOfRange {
            position: word_index,
            words: seq.num_words(),
        })?;
        let hidden = self.hidden_states(&seq.token_ids);
        let (mut logits, _) = self.model.mlm_logits(&hidden, &[span.start]);
        softmax_in_place(&mut logits);
        Ok(logits)
    }

    fn trainable_ranges(&self) -> Vec<Range<usize>> {
        let lay = &self.model.layout;
        let mut out = Vec::new();
        if !self.freeze.encoder {
            out.push(lay.encoder_range());
        }
        if !self.freeze.mlm_head {
            out.push(lay.mlm_range());
        }
        if !self.freeze.classifier {
            out.push(lay.classifier_range());
        }
        out
    }

    /// Loss of one example (unnormalized); accumulates `scale ×` its gradient.
    fn example_loss(
        &self,
        ex: &TrainExample,
        scale: f64,
        rng: Option<&mut ChaCha8Rng>,
        grads: Option<&mut [f64]>,
    ) -> Result<f64> {
        let t = ex.tokens.len();
        if t == 0 || t > self.model.cfg.max_positions {
            return Err(Error::InvalidArgument(format!(
                "sequence length {t} outside 1..={}",
                self.model.cfg.max_positions
            )));
        }
        if let Some(&bad) = ex.tokens.iter().find(|&&id| id as usize >= self.model.cfg.vocab_size) {
            return Err(Error::InvalidArgument(format!("token id {bad} outside vocabulary")));
        }
        let h = self.hidden_size();
        let k = self.num_classes();
        let (hidden, cache) = self.model.encode(&ex.tokens, rng);
        let check_pos = |p: usize| {
            if p < t {
                Ok(p)
            } else {
                Err(Error::InvalidArgument(format!("position {p} outside sequence of {t}")))
            }
        };
        let mut d_hidden = grads.as_ref().map(|_| vec![0.0; t * h]);
        let loss;
        match &ex.supervision {
            Supervision::Class { position, class } => {
                let p = check_pos(*position)?;
                if *class >= k {
                    return Err(Error::InvalidArgument(format!("class {class} >= {k}")));
                }
                let logits = self.model.classifier_logits(&hidden[p * h..(p + 1) * h]);
                let probs = softmax(&logits);
                let lse = log_sum_exp(&logits);
                loss = lse - logits[*class];
                if let (Some(g), Some(dh)) = (grads, d_hidden.as_mut()) {
                    let mut dl = probs;
                    dl[*class] -= 1.0;
                    dl.iter_mut().for_each(|v| *v *= scale);
                    let d = self.model.classifier_backward(&hidden[p * h..(p + 1) * h], &dl, g);
                    dh[p * h..(p + 1) * h].copy_from_slice(&d);
                    self.model.encode_backward(&ex.tokens, &cache, d_hidden.unwrap(), g);
                }
            }
            Supervision::Soft { position, target } => {
                let p = check_pos(*position)?;
                if target.len() != k {
                    return Err(Error::DimensionMismatch {
                        expected: k,
                        found: target.len(),
                    });
                }
                let mass: f64 = target.iter().sum();
                if mass == 0.0 {
                    return Ok(0.0);
                }
                let logits = self.model.classifier_logits(&hidden[p * h..(p + 1) * h]);
                let lse = log_sum_exp(&logits);
                loss = target
                    .iter()
                    .zip(&logits)
                    .filter(|(&q, _)| q > 0.0)
                    .map(|(&q, &z)| q * (q.ln() - (z - lse)))
                    .sum();
                if let (Some(g), Some(dh)) = (grads, d_hidden.as_mut()) {
                    let probs = softmax(&logits);
                    let dl: Vec<f64> = probs
                        .iter()
                        .zip(target)
                        .map(|(p, q)| scale * (mass * p - q))
                        .collect();
                    let d = self.model.classifier_backward(&hidden[p * h..(p + 1) * h], &dl, g);
                    dh[p * h..(p + 1) * h].copy_from_slice(&d);
                    self.model.encode_backward(&ex.tokens, &cache, d_hidden.unwrap(), g);
                }
            }
            Supervision::Tokens(targets) => {
                if targets.is_empty() {
                    return Ok(0.0);
                }
                let positions: Vec<usize> = targets.iter().map(|&(p, _)| check_pos(p)).collect::<Result<_>>()?;
                let v = self.model.cfg.vocab_size;
                let (logits, mcache) = self.model.mlm_logits(&hidden, &positions);
                let mut total = 0.0;
                let mut dl = vec![0.0; logits.len()];
                for (r, &(_, tok)) in targets.iter().enumerate() {
                    let row = &logits[r * v..(r + 1) * v];
                    total += log_sum_exp(row) - row[tok as usize];
                    let probs = softmax(row);
                    for (j, p) in probs.into_iter().enumerate() {
                        dl[r * v + j] = scale * p;
                    }
                    dl[r * v + tok as usize] -= scale;
                }
                loss = total;
                if let (Some(g), Some(dh)) = (grads, d_hidden.as_mut()) {
                    let drows = self.model.mlm_backward(&mcache, &dl, g);
                    for (r, &p) in positions.iter().enumerate() {
                        for j in 0..h {
                            dh[p * h + j] += drows[r * h + j];
                        }
                    }
                    self.model.encode_backward(&ex.tokens, &cache, d_hidden.unwrap(), g);
                }
            }
        }
        Ok(loss)
    }

    fn normalizer(batch: &[TrainExample]) -> f64 {
        batch.iter().map(TrainExample::weight).sum::<usize>().max(1) as f64
    }

    /// Mean batch loss without dropout or gradients.
    pub fn batch_loss(&self, batch: &[TrainExample]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let norm = Self::normalizer(batch);
        let losses: Vec<f64> = batch
            .par_iter()
            .map(|ex| self.example_loss(ex, 1.0, None, None))
            .collect::<Result<_>>()?;
        Ok(losses.iter().sum::<f64>() / norm)
    }

    /// Mean batch loss and its gradient over all parameters. Dropout is
    /// applied when `dropout_seed` is given.
    pub fn loss_and_grad(&self, batch: &[TrainExample], dropout_seed: Option<u64>) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let n = self.model.params.len();
        let norm = Self::normalizer(batch);
        let scale = 1.0 / norm;
        let run = |offset: usize, chunk: &[TrainExample], g: &mut [f64]| -> Result<f64> {
            let mut total = 0.0;
            for (i, ex) in chunk.iter().enumerate() {
                let mut rng = dropout_seed
                    .map(|s| ChaCha8Rng::seed_from_u64(mix_seed(s, self.optimizer.step, (offset + i) as u64)));
                total += self.example_loss(ex, scale, rng.as_mut(), Some(g))?;
            }
            Ok(total)
        };
        if n > LARGE_MODEL {
            let mut g = vec![0.0; n];
            let total = run(0, batch, &mut g)?;
            return Ok((total / norm, g));
        }
        let chunk = batch.len().div_ceil(GRAD_CHUNKS);
        let parts: Vec<(f64, Vec<f64>)> = batch
            .par_chunks(chunk)
            .enumerate()
            .map(|(ci, c)| {
                let mut g = vec![0.0; n];
                run(ci * chunk, c, &mut g).map(|l| (l, g))
            })
            .collect::<Result<_>>()?;
        let mut grads = vec![0.0; n];
        let mut total = 0.0;
        for (l, g) in parts {
            total += l;
            for (a, b) in grads.iter_mut().zip(&g) {
                *a += b;
            }
        }
        Ok((total / norm, grads))
    }

    /// One Adam update. Returns the batch loss before the update.
    pub fn train_step(&mut self, batch: &[TrainExample], lr: f64) -> Result<f64> {
        let (loss, grads) = self.loss_and_grad(batch, Some(self.seed))?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                stage: "train_step".into(),
                step: self.optimizer.step as usize,
                lr,
            });
        }
        let ranges = self.trainable_ranges();
        self.optimizer.update(&mut self.model.params, &grads, lr, &ranges);
        Ok(loss)
    }

    /// Masked-LM pretraining with BERT-style corruption (15% of word tokens;
    /// 80% `[MASK]`, 10% random word, 10% unchanged). Trains the encoder and
    /// the MLM head; the classifier is left untouched. Returns mean loss per epoch.
    pub fn pretrain_mlm(&mut self, corpus: &TokenizedCorpus, settings: &MlmPretraining, seed: u64) -> Result<Vec<f64>> {
        let saved = (self.freeze, self.model.cfg.dropout);
        self.freeze = Freeze {
            encoder: false,
            mlm_head: false,
            classifier: true,
        };
        self.model.cfg.dropout = settings.dropout;
        let result = self.pretrain_inner(corpus, settings.epochs, settings.batch_size, settings.lr, seed);
        (self.freeze, self.model.cfg.dropout) = saved;
        result
    }

    fn pretrain_inner(
        &mut self,
        corpus: &TokenizedCorpus,
        epochs: usize,
        batch_size: usize,
        lr: f64,
        seed: u64,
    ) -> Result<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let words: Vec<u32> = (0..self.tokenizer.vocab_size() as u32)
            .filter(|&id| self.candidates[id as usize])
            .collect();
        let mask_id = self.tokenizer.mask_id();
        let steps_per_epoch = corpus.len().div_ceil(batch_size);
        let schedule = LrSchedule {
            peak: lr,
            total_steps: steps_per_epoch * epochs,
            warmup_fraction: 0.1,
        };
        let mut order: Vec<usize> = (0..corpus.len()).collect();
        let mut trace = Vec::with_capacity(epochs);
        let mut step = 0;
        for _ in 0..epochs {
            order.shuffle(&mut rng);
            let mut sum = 0.0;
            for chunk in order.chunks(batch_size) {
                let batch: Vec<TrainExample> = chunk
                    .iter()
                    .filter_map(|&d| {
                        let seq = corpus.get(d);
                        let inner = seq.len().saturating_sub(2);
                        if inner == 0 {
                            return None;
                        }
                        let mut tokens = seq.token_ids.clone();
                        let mut targets = Vec::new();
                        for p in 1..=inner {
                            if rng.gen::<f64>() < 0.15 {
                                targets.push((p, tokens[p]));
                            }
                        }
                        if targets.is_empty() {
                            let p = rng.gen_range(1..=inner);
                            targets.push((p, tokens[p]));
                        }
                        for &(p, _) in &targets {
                            let r: f64 = rng.gen();
                            if r < 0.8 {
                                tokens[p] = mask_id;
                            } else if r < 0.9 {
                                tokens[p] = *words.choose(&mut rng).unwrap();
                            }
                        }
                        // [CLS] predicts a random word of its document, standing in
                        // for the sentence-level objective of full-size pretraining.
                        let p = rng.gen_range(1..=inner);
                        targets.push((0, seq.token_ids[p]));
                        Some(TrainExample {
                            tokens,
                            supervision: Supervision::Tokens(targets),
                        })
                    })
                    .collect();
                if batch.is_empty() {
                    continue;
                }
                let lr = schedule.lr(step);
                let loss = self.train_step(&batch, lr).map_err(|e| match e {
                    Error::NonFiniteLoss { lr, .. } => Error::NonFiniteLoss {
                        stage: "mlm-pretraining".into(),
                        step,
                        lr,
                    },
                    other => other,
                })?;
                sum += loss;
                step += 1;
            }
            trace.push(sum / steps_per_epoch.max(1) as f64);
        }
        Ok(trace)
    }
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

impl MaskedLm for TransformerLm {
    fn backend_id(&self) -> String {
        self.kind.as_str().to_string()
    }

    fn tokenizer(&self) -> &WordPiece {
        &self.tokenizer
    }

    fn mlm_topk(&self, seq: &TokenSequence, word_index: usize, k: usize) -> Result<Vec<Replacement>> {
        Ok(self.mlm_topk_many(seq, &[word_index], k)?.pop().unwrap())
    }

    fn mlm_topk_many(
        &self,
        seq: &TokenSequence,
        word_indices: &[usize],
        k: usize,
    ) -> Result<Vec<Vec<Replacement>>> {
        let v = self.model.cfg.vocab_size;
        if k > v {
            return Err(Error::InvalidArgument(format!("k = {k} exceeds vocabulary size {v}")));
        }
        let mut positions = Vec::with_capacity(word_indices.len());
        for &w in word_indices {
            let span = seq.word_spans.get(w).ok_or(Error::PositionOutOfRange {
                position: w,
                words: seq.num_words(),
            })?;
            positions.push(span.start);
        }
        if positions.is_empty() {
            return Ok(Vec::new());
        }
        let hidden = self.hidden_states(&seq.token_ids);
        let (mut logits, _) = self.model.mlm_logits(&hidden, &positions);
        Ok(logits
            .chunks_mut(v)
            .map(|row| {
                softmax_in_place(row);
                top_k(row, &self.candidates, k)
                    .into_iter()
                    .map(|id| Replacement::new(self.tokenizer.token(id as u32), row[id]))
                    .collect()
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Corpus, Split};

    fn setup() -> (TransformerLm, TokenizedCorpus) {
        let texts = ["the team won the game", "shares fell in the market", "the coach praised the team"];
        let corpus = Corpus::new("t", Split::Train, 2, texts.iter().map(|t| (t.to_string(), None))).unwrap();
        let wp = WordPiece::build(texts, 1, 100);
        let tc = TokenizedCorpus::new(corpus.unlabeled(), &wp, 16);
        (TransformerLm::tiny(wp, 2, 16, 3), tc)
    }

    #[test]
    fn cls_embedding_shape_and_determinism() {
        let (lm, tc) = setup();
        let a = lm.cls_embedding(tc.get(0));
        assert_eq!(a.dim(), 32);
        assert_eq!(a, lm.cls_embedding(tc.get(0)));
        assert_ne!(a, lm.cls_embedding(tc.get(1)));
    }

    #[test]
    fn classifier_head_snapshot_agrees_with_predict() {
        let (lm, tc) = setup();
        let p = lm.predict_proba(tc.get(1));
        let q = super::super::classify(&lm.cls_embedding(tc.get(1)), &lm.classifier_head()).unwrap();
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn mlm_topk_is_sorted_distribution_over_words() {
        let (lm, tc) = setup();
        let top = lm.mlm_topk(tc.get(0), 1, 5).unwrap();
        assert_eq!(top.len(), 5);
        assert!(top.windows(2).all(|w| w[0].prob >= w[1].prob));
        assert!(top.iter().all(|r| !r.word.starts_with("##") && !r.word.starts_with('[')));
        let dist = lm.mlm_distribution(tc.get(0), 1).unwrap();
        assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(matches!(lm.mlm_topk(tc.get(0), 9, 5), Err(Error::PositionOutOfRange { .. })));
    }

    #[test]
    fn empty_batch_and_zero_lr() {
        let (mut lm, tc) = setup();
        assert!(matches!(lm.train_step(&[], 1e-3), Err(Error::EmptyBatch)));
        let batch = vec![TrainExample {
            tokens: tc.get(0).token_ids.clone(),
            supervision: Supervision::Class { position: 0, class: 1 },
        }];
        lm.model.cfg.dropout = 0.0;
        let before = lm.params().to_vec();
        let l1 = lm.train_step(&batch, 0.0).unwrap();
        let l2 = lm.train_step(&batch, 0.0).unwrap();
        assert_eq!(before, lm.params());
        assert_eq!(l1, l2);
    }

    #[test]
    fn init_classifier_resizes_head() {
        let (mut lm, tc) = setup();
        lm.init_classifier(5, 9);
        assert_eq!(lm.predict_proba(tc.get(0)).len(), 5);
        assert_eq!(lm.optimizer().m.len(), lm.params().len());
        assert!(lm.classifier_head().bias.iter().all(|&b| b == 0.0));
    }
}
