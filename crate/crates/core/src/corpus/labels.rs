use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{TokenizedCorpus, WordSpan};
use crate::error::{Error, Result};

pub const MAX_LABEL_WORDS: usize = 3;

/// Label names: 1 to 3 lowercase words per class, no word shared by two classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelNameSet {
    class_names: Vec<String>,
    label_words: Vec<Vec<String>>,
}

impl LabelNameSet {
    pub fn new(class_names: Vec<String>, label_words: Vec<Vec<String>>) -> Result<Self> {
        if class_names.is_empty() {
            return Err(Error::InvalidLabelNames("no classes".into()));
        }
        if class_names.len() != label_words.len() {
            return Err(Error::InvalidLabelNames(format!(
                "{} class names but {} label word lists",
                class_names.len(),
                label_words.len()
            )));
        }
        let mut owner: HashMap<String, usize> = HashMap::new();
        let mut normalized = Vec::with_capacity(label_words.len());
        for (class, words) in label_words.into_iter().enumerate() {
            if words.is_empty() || words.len() > MAX_LABEL_WORDS {
                return Err(Error::InvalidLabelNames(format!(
                    "class {:?} has {} label words; expected 1 to {MAX_LABEL_WORDS}",
                    class_names[class],
                    words.len()
                )));
            }
            let mut list = Vec::with_capacity(words.len());
            for w in words {
                let w = w.trim().to_lowercase();
                if w.is_empty() || w.contains(char::is_whitespace) {
                    return Err(Error::InvalidLabelNames(format!(
                        "class {:?} has an invalid label word {w:?}",
                        class_names[class]
                    )));
                }
                if let Some(&other) = owner.get(&w) {
                    return Err(Error::InvalidLabelNames(format!(
                        "label word {w:?} is shared by classes {:?} and {:?}",
                        class_names[other], class_names[class]
                    )));
                }
                owner.insert(w.clone(), class);
                list.push(w);
            }
            normalized.push(list);
        }
        Ok(LabelNameSet {
            class_names,
            label_words: normalized,
        })
    }

    /// Parses `class_id: word1[,word2[,word3]]` lines. Class index follows line order.
    pub fn parse(text: &str) -> Result<Self> {
        let mut names = Vec::new();
        let mut words = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (id, list) = line.split_once(':').ok_or_else(|| {
                Error::InvalidLabelNames(format!("line {}: expected `class_id: words`", lineno + 1))
            })?;
            names.push(id.trim().to_string());
            words.push(
                list.split(',')
                    .map(|w| w.trim().to_string())
                    .filter(|w| !w.is_empty())
                    .collect(),
            );
        }
        Self::new(names, words)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_file_string(&self) -> String {
        self.class_names
            .iter()
            .zip(&self.label_words)
            .map(|(n, w)| format!("{n}: {}\n", w.join(",")))
            .collect()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn words(&self, class: usize) -> &[String] {
        &self.label_words[class]
    }

    pub fn class_of(&self, word: &str) -> Option<usize> {
        self.label_words
            .iter()
            .position(|ws| ws.iter().any(|w| w == word))
    }
}

/// One whole-word occurrence of a label word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabelOccurrence {
    pub doc_id: usize,
    pub word_index: usize,
    pub span: WordSpan,
    pub class: usize,
}

/// Every whole-word occurrence of any label word within the tokenized
/// (hence truncated) documents, in document then position order.
pub fn find_label_occurrences(
    corpus: &TokenizedCorpus,
    names: &LabelNameSet,
) -> Result<Vec<LabelOccurrence>> {
    let lookup: HashMap<&str, usize> = (0..names.num_classes())
        .flat_map(|c| names.words(c).iter().map(move |w| (w.as_str(), c)))
        .collect();
    let mut out = Vec::new();
    let mut per_class = vec![0usize; names.num_classes()];
    for (doc_id, seq) in corpus.sequences().iter().enumerate() {
        for (word_index, (word, span)) in seq.words.iter().zip(&seq.word_spans).enumerate() {
            if let Some(&class) = lookup.get(word.as_str()) {
                per_class[class] += 1;
                out.push(LabelOccurrence {
                    doc_id,
                    word_index,
                    span: *span,
                    class,
                });
            }
        }
    }
    if let Some(class) = per_class.iter().position(|&n| n == 0) {
        return Err(Error::NoLabelOccurrences {
            class: names.class_names()[class].clone(),
        });
    }
    Ok(out)
}
