//! Category vocabularies: per-class keyword lists mined from masked-LM
//! replacements of label-name occurrences, plus a static word-embedding
//! baseline and a directional overlap measure between lists.

mod embeddings;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{find_label_occurrences, LabelNameSet, LabelOccurrence, TokenizedCorpus};
use crate::error::{Error, Result};
use crate::lm::{Hyperparameters, MaskedLm, Replacement};
use crate::stopwords::{is_stopword, STOPWORDS_VERSION};

pub use embeddings::{static_embedding_vocab, EmbeddingTable};

/// Top-k replacements at one label-name occurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplacementSet {
    pub occurrence: LabelOccurrence,
    pub candidates: Vec<Replacement>,
}

/// Replacement candidates at every label-name occurrence, in corpus order.
/// Occurrences are processed in parallel, one forward pass per document.
pub fn collect_replacements<M: MaskedLm + ?Sized>(
    corpus: &TokenizedCorpus,
    names: &LabelNameSet,
    lm: &M,
    hp: &Hyperparameters,
) -> Result<Vec<ReplacementSet>> {
    let occurrences = find_label_occurrences(corpus, names)?;
    let mut by_doc: BTreeMap<usize, Vec<LabelOccurrence>> = BTreeMap::new();
    for occ in occurrences {
        by_doc.entry(occ.doc_id).or_default().push(occ);
    }
    let groups: Vec<Vec<LabelOccurrence>> = by_doc.into_values().collect();
    let sets: Vec<Vec<ReplacementSet>> = groups
        .par_iter()
        .map(|occs| {
            let seq = corpus.get(occs[0].doc_id);
            let idx: Vec<usize> = occs.iter().map(|o| o.word_index).collect();
            let lists = lm
                .mlm_topk_many(seq, &idx, hp.top_k_replacement)
                .map_err(|e| Error::AtOccurrence {
                    doc_id: occs[0].doc_id,
                    word_index: occs[0].word_index,
                    source: Box::new(e),
                })?;
            Ok(occs
                .iter()
                .zip(lists)
                .map(|(o, candidates)| ReplacementSet {
                    occurrence: *o,
                    candidates,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(sets.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub word: String,
    /// Number of occurrences whose candidate list contains the word.
    pub count: usize,
    /// Cosine similarity, for embedding-derived vocabularies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub similarity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub method: String,
    pub corpus: String,
    pub label_words: Vec<Vec<String>>,
    pub top_k_replacement: usize,
    pub vocab_size_per_class: usize,
    pub filter_before_cut: bool,
    pub stopwords: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassVocabulary {
    pub class: String,
    pub entries: Vec<VocabEntry>,
}

/// Ranked keyword list per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryVocabulary {
    pub classes: Vec<ClassVocabulary>,
    pub provenance: Provenance,
}

impl CategoryVocabulary {
    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn words(&self, class: usize) -> Vec<&str> {
        self.classes[class].entries.iter().map(|e| e.word.as_str()).collect()
    }

    /// Word sets per class, for membership tests.
    pub fn word_sets(&self) -> Vec<HashSet<String>> {
        self.classes
            .iter()
            .map(|c| c.entries.iter().map(|e| e.word.clone()).collect())
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Plain-text table: one row per class with its label words and the
    /// leading `top` words.
    pub fn to_table(&self, top: usize) -> String {
        let mut out = String::new();
        let width = self.classes.iter().map(|c| c.class.len()).max().unwrap_or(5).max(5);
        let _ = writeln!(out, "{:<width$}  {:<24}  category vocabulary", "class", "label name");
        for (c, cls) in self.classes.iter().enumerate() {
            let label = self.provenance.label_words.get(c).map(|w| w.join(", ")).unwrap_or_default();
            let words: Vec<&str> = cls.entries.iter().take(top).map(|e| e.word.as_str()).collect();
            let _ = writeln!(out, "{:<width$}  {:<24}  {}", cls.class, label, words.join(", "));
        }
        out
    }
}

/// Per-word `(count, best rank)` tallies for one class.
fn tally<'a>(sets: impl Iterator<Item = &'a ReplacementSet>) -> HashMap<&'a str, (usize, usize)> {
    let mut counts: HashMap<&str, (usize, usize)> = HashMap::new();
    for set in sets {
        let mut seen = HashSet::new();
        for (rank, cand) in set.candidates.iter().enumerate() {
            if !seen.insert(cand.word.as_str()) {
                continue;
            }
            let e = counts.entry(cand.word.as_str()).or_insert((0, rank));
            e.0 += 1;
            e.1 = e.1.min(rank);
        }
    }
    counts
}

/// Orders `(word, count, best_rank)` by count descending, then best rank,
/// then the word itself.
pub(crate) fn sort_ranked(list: &mut [(String, usize, usize)]) {
    list.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)).then(a.0.cmp(&b.0)));
}

/// Drops stopwords and every word that appears in two or more lists.
pub(crate) fn filter_lists<T>(lists: &mut [Vec<T>], word: impl Fn(&T) -> &str) {
    let mut seen: HashMap<String, usize> = HashMap::new();
    for list in lists.iter() {
        let distinct: HashSet<&str> = list.iter().map(&word).collect();
        for w in distinct {
            *seen.entry(w.to_string()).or_default() += 1;
        }
    }
    for list in lists.iter_mut() {
        list.retain(|e| {
            let w = word(e);
            !is_stopword(w) && seen[w] < 2
        });
    }
}

/// Builds the category vocabulary from replacement sets: counts each
/// candidate once per occurrence, pools the occurrences of all label words
/// of a class, ranks, cuts to `vocab_size_per_class` and filters stopwords
/// and cross-class words (or filters first with `filter_before_cut`).
pub fn rank_category_vocabulary(
    replacements: &[ReplacementSet],
    names: &LabelNameSet,
    hp: &Hyperparameters,
    corpus_name: &str,
) -> Result<CategoryVocabulary> {
    let k = names.num_classes();
    let mut lists: Vec<Vec<(String, usize, usize)>> = (0..k)
        .map(|c| {
            let mut list: Vec<(String, usize, usize)> =
                tally(replacements.iter().filter(|r| r.occurrence.class == c))
                    .into_iter()
                    .map(|(w, (n, r))| (w.to_string(), n, r))
                    .collect();
            sort_ranked(&mut list);
            list
        })
        .collect();
    let n = hp.vocab_size_per_class;
    if hp.filter_before_cut {
        filter_lists(&mut lists, |e| &e.0);
        lists.iter_mut().for_each(|l| l.truncate(n));
    } else {
        lists.iter_mut().for_each(|l| l.truncate(n));
        filter_lists(&mut lists, |e| &e.0);
    }
    let classes = build_classes(names, lists.into_iter().map(|l| {
        l.into_iter()
            .map(|(word, count, _)| VocabEntry {
                word,
                count,
                similarity: None,
            })
            .collect()
    }))?;
    Ok(CategoryVocabulary {
        classes,
        provenance: Provenance {
            method: "mlm-replacement".into(),
            corpus: corpus_name.to_string(),
            label_words: (0..k).map(|c| names.words(c).to_vec()).collect(),
            top_k_replacement: hp.top_k_replacement,
            vocab_size_per_class: n,
            filter_before_cut: hp.filter_before_cut,
            stopwords: STOPWORDS_VERSION.into(),
        },
    })
}

pub(crate) fn build_classes(
    names: &LabelNameSet,
    lists: impl Iterator<Item = Vec<VocabEntry>>,
) -> Result<Vec<ClassVocabulary>> {
    lists
        .zip(names.class_names())
        .map(|(entries, class)| {
            if entries.is_empty() {
                Err(Error::EmptyVocabularyClass { class: class.clone() })
            } else {
                Ok(ClassVocabulary {
                    class: class.clone(),
                    entries,
                })
            }
        })
        .collect()
}

/// Fraction of the distinct words of `a` that also appear in `b`.
pub fn vocab_overlap<S: AsRef<str>, T: AsRef<str>>(a: &[S], b: &[T]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("vocabulary overlap of an empty list".into()));
    }
    let a: HashSet<&str> = a.iter().map(AsRef::as_ref).collect();
    let b: HashSet<&str> = b.iter().map(AsRef::as_ref).collect();
    Ok(a.intersection(&b).count() as f64 / a.len() as f64)
}
