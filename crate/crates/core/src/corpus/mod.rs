//! Corpora, label names and tokenization.
//!
//! A [`Corpus`] owns documents together with their optional gold labels.
//! Training code never sees a `Corpus` directly: it receives an
//! [`UnlabeledView`] (or the [`TokenizedCorpus`] built from one), neither of
//! which exposes labels. Only evaluation reads [`Corpus::gold_labels`].

mod labels;
mod loaders;
mod synthetic;
mod tokenizer;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use labels::{find_label_occurrences, LabelNameSet, LabelOccurrence};
pub use loaders::{load_benchmark, BenchmarkFormat};
pub use synthetic::{make_synthetic, SyntheticCorpus, SyntheticSpec};
pub use tokenizer::{normalize_whitespace, split_words, TokenSequence, WordPiece, WordSpan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: usize,
    pub text: String,
    pub gold_label: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    name: String,
    split: Split,
    num_classes: usize,
    documents: Vec<Document>,
}

impl Corpus {
    /// Builds a corpus, assigning dense ids in the given order.
    pub fn new(
        name: impl Into<String>,
        split: Split,
        num_classes: usize,
        docs: impl IntoIterator<Item = (String, Option<usize>)>,
    ) -> Result<Self> {
        let mut documents = Vec::new();
        for (doc_id, (text, gold_label)) in docs.into_iter().enumerate() {
            let text = normalize_whitespace(&text);
            if text.is_empty() {
                return Err(Error::InvalidCorpus(format!(
                    "document {doc_id} is empty after whitespace normalization"
                )));
            }
            if let Some(label) = gold_label {
                if label >= num_classes {
                    return Err(Error::InvalidCorpus(format!(
                        "document {doc_id} has label {label} but the corpus has {num_classes} classes"
                    )));
                }
            }
            documents.push(Document {
                doc_id,
                text,
                gold_label,
            });
        }
        if documents.is_empty() {
            return Err(Error::NoDocuments);
        }
        Ok(Corpus {
            name: name.into(),
            split,
            num_classes,
            documents,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    /// Gold labels, one per document, if every document carries one.
    pub fn gold_labels(&self) -> Option<Vec<usize>> {
        self.documents.iter().map(|d| d.gold_label).collect()
    }

    /// The label-free view handed to all training operations.
    pub fn unlabeled(&self) -> UnlabeledView<'_> {
        UnlabeledView { corpus: self }
    }

    /// A new corpus containing the documents at `indices`, re-indexed densely.
    pub fn subset(&self, indices: &[usize]) -> Result<Corpus> {
        Corpus::new(
            self.name.clone(),
            self.split,
            self.num_classes,
            indices.iter().map(|&i| {
                let d = &self.documents[i];
                (d.text.clone(), d.gold_label)
            }),
        )
    }
}

/// Read-only corpus access without gold labels.
#[derive(Debug, Clone, Copy)]
pub struct UnlabeledView<'a> {
    corpus: &'a Corpus,
}

impl<'a> UnlabeledView<'a> {
    pub fn name(&self) -> &'a str {
        &self.corpus.name
    }

    pub fn num_classes(&self) -> usize {
        self.corpus.num_classes
    }

    pub fn len(&self) -> usize {
        self.corpus.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.corpus.documents.is_empty()
    }

    pub fn text(&self, doc_id: usize) -> &'a str {
        &self.corpus.documents[doc_id].text
    }

    pub fn texts(&self) -> impl Iterator<Item = &'a str> + 'a {
        self.corpus.documents.iter().map(|d| d.text.as_str())
    }
}

/// Tokenized documents, indexed by `doc_id`. Carries no labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedCorpus {
    name: String,
    sequences: Vec<TokenSequence>,
}

impl TokenizedCorpus {
    pub fn new(view: UnlabeledView<'_>, tokenizer: &WordPiece, max_seq_len: usize) -> Self {
        let texts: Vec<&str> = view.texts().collect();
        let sequences = texts
            .par_iter()
            .map(|t| tokenizer.encode(t, max_seq_len))
            .collect();
        TokenizedCorpus {
            name: view.name().to_string(),
            sequences,
        }
    }

    pub fn from_sequences(name: impl Into<String>, sequences: Vec<TokenSequence>) -> Self {
        TokenizedCorpus {
            name: name.into(),
            sequences,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn sequences(&self) -> &[TokenSequence] {
        &self.sequences
    }

    pub fn get(&self, doc_id: usize) -> &TokenSequence {
        &self.sequences[doc_id]
    }
}
