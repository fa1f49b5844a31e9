//! Category-indicative word detection and masked category prediction.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::category_vocab::CategoryVocabulary;
use crate::corpus::{TokenizedCorpus, WordSpan};
use crate::error::{Error, Result};
use crate::lm::{Hyperparameters, LrSchedule, MaskedLm, Replacement, Stage, Supervision, TrainExample, TransformerLm};
use crate::stopwords::is_stopword;

/// One word occurrence whose replacements point at a single class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndicativeEntry {
    pub doc_id: usize,
    pub word_index: usize,
    pub span: WordSpan,
    pub word: String,
    pub class: usize,
    /// Candidates of the occurrence found in the class's vocabulary.
    pub count: usize,
}

/// The word-level supervision set.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IndicativeWordSet {
    pub entries: Vec<IndicativeEntry>,
}

const TSV_HEADER: &str = "doc_id\ttoken_start\ttoken_end\tword\tclass\tcount";

impl IndicativeWordSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn class_counts(&self, num_classes: usize) -> Vec<usize> {
        let mut out = vec![0; num_classes];
        for e in &self.entries {
            out[e.class] += 1;
        }
        out
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from(TSV_HEADER);
        out.push('\n');
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                e.doc_id, e.span.start, e.span.end, e.word, e.class, e.count
            );
        }
        out
    }

    /// Parses a cache file; word indices are recovered from `corpus`.
    pub fn from_tsv(text: &str, corpus: &TokenizedCorpus) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if i == 0 && line == TSV_HEADER || line.is_empty() {
                continue;
            }
            let bad = |message: String| Error::MalformedRow { row: i + 1, message };
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 6 {
                return Err(bad(format!("expected 6 fields, found {}", f.len())));
            }
            let num = |s: &str| s.parse::<usize>().map_err(|e| bad(format!("{s:?}: {e}")));
            let (doc_id, start, end) = (num(f[0])?, num(f[1])?, num(f[2])?);
            let seq = corpus
                .sequences()
                .get(doc_id)
                .ok_or_else(|| bad(format!("doc {doc_id} not in corpus")))?;
            let span = WordSpan { start, end };
            let word_index = seq
                .word_spans
                .iter()
                .position(|s| *s == span)
                .ok_or_else(|| bad(format!("span {start}..{end} is not a word of doc {doc_id}")))?;
            entries.push(IndicativeEntry {
                doc_id,
                word_index,
                span,
                word: f[3].to_string(),
                class: num(f[4])?,
                count: num(f[5])?,
            });
        }
        Ok(IndicativeWordSet { entries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path, corpus: &TokenizedCorpus) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_tsv(&text, corpus)
    }
}

/// Per class, the number of distinct candidate words found in its vocabulary.
pub fn overlap_counts(candidates: &[Replacement], vocab: &[HashSet<String>]) -> Vec<usize> {
    let distinct: HashSet<&str> = candidates.iter().map(|c| c.word.as_str()).collect();
    vocab
        .iter()
        .map(|set| distinct.iter().filter(|w| set.contains(**w)).count())
        .collect()
}

/// The class an occurrence indicates: its overlap count must exceed
/// `threshold` and be the unique maximum.
pub fn indicated_class(counts: &[usize], threshold: usize) -> Option<(usize, usize)> {
    let best = *counts.iter().max()?;
    if best <= threshold || counts.iter().filter(|&&c| c == best).count() > 1 {
        return None;
    }
    counts.iter().position(|&c| c == best).map(|c| (c, best))
}

/// Scans every word position of every document for category-indicative
/// words. Positions holding stopwords are skipped when
/// `hp.skip_stopword_positions` is set.
pub fn detect_indicative<M: MaskedLm + ?Sized>(
    corpus: &TokenizedCorpus,
    vocab: &CategoryVocabulary,
    lm: &M,
    hp: &Hyperparameters,
) -> Result<IndicativeWordSet> {
    if let Some(c) = vocab.classes.iter().find(|c| c.entries.is_empty()) {
        return Err(Error::EmptyVocabularyClass { class: c.class.clone() });
    }
    let sets = vocab.word_sets();
    let per_doc: Vec<Vec<IndicativeEntry>> = corpus
        .sequences()
        .par_iter()
        .enumerate()
        .map(|(doc_id, seq)| {
            let positions: Vec<usize> = (0..seq.num_words())
                .filter(|&w| !(hp.skip_stopword_positions && is_stopword(&seq.words[w])))
                .collect();
            if positions.is_empty() {
                return Ok(Vec::new());
            }
            let lists = lm
                .mlm_topk_many(seq, &positions, hp.top_k_replacement)
                .map_err(|e| Error::AtOccurrence {
                    doc_id,
                    word_index: positions[0],
                    source: Box::new(e),
                })?;
            Ok(positions
                .iter()
                .zip(&lists)
                .filter_map(|(&w, cands)| {
                    let (class, count) = indicated_class(&overlap_counts(cands, &sets), hp.indicative_threshold)?;
                    Some(IndicativeEntry {
                        doc_id,
                        word_index: w,
                        span: seq.word_spans[w],
                        word: seq.words[w].clone(),
                        class,
                        count,
                    })
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(IndicativeWordSet {
        entries: per_doc.into_iter().flatten().collect(),
    })
}

/// The training example for one entry: the document with every subtoken of
/// the entry's word replaced by `[MASK]`, labelled at the word's first subtoken.
pub fn mcp_example(entry: &IndicativeEntry, corpus: &TokenizedCorpus, mask_id: u32) -> TrainExample {
    let mut tokens = corpus.get(entry.doc_id).token_ids.clone();
    tokens[entry.span.start..entry.span.end].fill(mask_id);
    TrainExample {
        tokens,
        supervision: Supervision::Class {
            position: entry.span.start,
            class: entry.class,
        },
    }
}

/// One shuffled epoch of MCP examples in batches of `hp.batch_size`.
pub fn build_mcp_batches(
    s_ind: &IndicativeWordSet,
    corpus: &TokenizedCorpus,
    mask_id: u32,
    hp: &Hyperparameters,
    seed: u64,
) -> Result<Vec<Vec<TrainExample>>> {
    if s_ind.is_empty() {
        return Err(Error::NoSupervision);
    }
    let mut examples: Vec<TrainExample> = s_ind.entries.iter().map(|e| mcp_example(e, corpus, mask_id)).collect();
    examples.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(examples.chunks(hp.batch_size).map(<[TrainExample]>::to_vec).collect())
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct McpTrace {
    pub batch_losses: Vec<f64>,
    pub epoch_means: Vec<f64>,
}

/// Trains the encoder and classifier head on masked category prediction for
/// `hp.mcp_epochs` epochs, reshuffling each epoch.
pub fn mcp_train(
    s_ind: &IndicativeWordSet,
    corpus: &TokenizedCorpus,
    lm: &mut TransformerLm,
    hp: &Hyperparameters,
    seed: u64,
) -> Result<McpTrace> {
    if s_ind.is_empty() {
        return Err(Error::NoSupervision);
    }
    let mask_id = lm.tokenizer().mask_id();
    let per_epoch = s_ind.len().div_ceil(hp.batch_size);
    let schedule = LrSchedule {
        peak: hp.lr_mcp,
        total_steps: per_epoch * hp.mcp_epochs,
        warmup_fraction: hp.warmup_fraction,
    };
    let mut trace = McpTrace::default();
    let mut step = 0;
    for epoch in 0..hp.mcp_epochs {
        let batches = build_mcp_batches(s_ind, corpus, mask_id, hp, seed.wrapping_add(epoch as u64))?;
        let mut sum = 0.0;
        for batch in &batches {
            let lr = schedule.lr(step);
            let loss = lm.train_step(batch, lr).map_err(|e| match e {
                Error::NonFiniteLoss { .. } => Error::NonFiniteLoss {
                    stage: "mcp".into(),
                    step,
                    lr,
                },
                other => other,
            })?;
            trace.batch_losses.push(loss);
            sum += loss;
            step += 1;
        }
        trace.epoch_means.push(sum / batches.len() as f64);
    }
    if step > 0 {
        lm.set_stage(Stage::PostMcp);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::category_vocab::{ClassVocabulary, Provenance, VocabEntry};
    use crate::corpus::{Corpus, Split, WordPiece};
    use crate::lm::StubLm;

    fn vocab(lists: &[&[&str]]) -> CategoryVocabulary {
        CategoryVocabulary {
            classes: lists
                .iter()
                .enumerate()
                .map(|(c, l)| ClassVocabulary {
                    class: format!("c{c}"),
                    entries: l
                        .iter()
                        .map(|w| VocabEntry {
                            word: w.to_string(),
                            count: 1,
                            similarity: None,
                        })
                        .collect(),
                })
                .collect(),
            provenance: Provenance {
                method: "test".into(),
                corpus: "t".into(),
                label_words: vec![],
                top_k_replacement: 50,
                vocab_size_per_class: 100,
                filter_before_cut: false,
                stopwords: "en-v1".into(),
            },
        }
    }

    fn tokenized(texts: &[&str]) -> (TokenizedCorpus, WordPiece) {
        let c = Corpus::new("t", Split::Train, 2, texts.iter().map(|t| (t.to_string(), None))).unwrap();
        let wp = WordPiece::build(texts.iter().copied(), 1, 1000);
        (TokenizedCorpus::new(c.unlabeled(), &wp, 32), wp)
    }

    fn words(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    fn replacements(ws: &[String]) -> Vec<Replacement> {
        ws.iter().map(|w| Replacement::new(w.clone(), 0.01)).collect()
    }

    #[test]
    fn threshold_is_strict() {
        let (tc, wp) = tokenized(&["alpha beta"]);
        let a = words("a", 60);
        let v = vocab(&[&a.iter().map(String::as_str).collect::<Vec<_>>(), &["zz"]]);
        let mut stub = StubLm::new(wp);
        let mut c21 = a[..21].to_vec();
        c21.extend(words("x", 29));
        let mut c20 = a[..20].to_vec();
        c20.extend(words("x", 30));
        stub.program_word("alpha", replacements(&c21));
        stub.program_word("beta", replacements(&c20));
        let s = detect_indicative(&tc, &v, &stub, &Hyperparameters::default()).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!((s.entries[0].word.as_str(), s.entries[0].class, s.entries[0].count), ("alpha", 0, 21));
    }

    #[test]
    fn tie_between_classes_is_skipped() {
        assert_eq!(indicated_class(&[22, 22, 3], 20), None);
        assert_eq!(indicated_class(&[22, 23, 3], 20), Some((1, 23)));
        assert_eq!(indicated_class(&[20, 1], 20), None);
    }

    #[test]
    fn batches_arithmetic_and_masking() {
        let (tc, _) = tokenized(&["one two three"]);
        let entry = |w: usize| IndicativeEntry {
            doc_id: 0,
            word_index: w,
            span: tc.get(0).word_spans[w],
            word: tc.get(0).words[w].clone(),
            class: 1,
            count: 25,
        };
        let s = IndicativeWordSet {
            entries: (0..257).map(|i| entry(i % 3)).collect(),
        };
        let hp = Hyperparameters::default();
        let b = build_mcp_batches(&s, &tc, 4, &hp, 1).unwrap();
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), [128, 128, 1]);
        assert_eq!(b, build_mcp_batches(&s, &tc, 4, &hp, 1).unwrap());
        let two = IndicativeWordSet {
            entries: vec![entry(0), entry(2)],
        };
        let ex: Vec<TrainExample> = two.entries.iter().map(|e| mcp_example(e, &tc, 4)).collect();
        assert_ne!(ex[0], ex[1]);
        for (e, x) in two.entries.iter().zip(&ex) {
            let masked: Vec<usize> = (0..x.tokens.len()).filter(|&i| x.tokens[i] == 4).collect();
            assert_eq!(masked, (e.span.start..e.span.end).collect::<Vec<_>>());
        }
        assert!(matches!(
            build_mcp_batches(&IndicativeWordSet::default(), &tc, 4, &hp, 1),
            Err(Error::NoSupervision)
        ));
    }

    #[test]
    fn tsv_round_trip() {
        let (tc, _) = tokenized(&["one two three", "four five"]);
        let s = IndicativeWordSet {
            entries: vec![IndicativeEntry {
                doc_id: 1,
                word_index: 1,
                span: tc.get(1).word_spans[1],
                word: "five".into(),
                class: 0,
                count: 30,
            }],
        };
        assert_eq!(IndicativeWordSet::from_tsv(&s.to_tsv(), &tc).unwrap(), s);
    }

    #[test]
    fn zero_epochs_leave_model_unchanged() {
        let (tc, wp) = tokenized(&["one two three"]);
        let mut lm = TransformerLm::tiny(wp, 2, 16, 1);
        let before = lm.clone();
        let s = IndicativeWordSet {
            entries: vec![IndicativeEntry {
                doc_id: 0,
                word_index: 0,
                span: tc.get(0).word_spans[0],
                word: "one".into(),
                class: 0,
                count: 30,
            }],
        };
        let hp = Hyperparameters { mcp_epochs: 0, ..Default::default() };
        mcp_train(&s, &tc, &mut lm, &hp, 3).unwrap();
        assert_eq!(lm, before);
    }
}
