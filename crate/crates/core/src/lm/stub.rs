use std::collections::HashMap;

use super::{MaskedLm, Replacement};
use crate::corpus::{TokenSequence, WordPiece};
use crate::error::{Error, Result};

/// Lookup-table masked LM.
///
/// Answers are resolved in order: an entry programmed for the exact
/// `(sequence surface, word index)`, then an entry for the surface word,
/// then the default list (empty unless set). The first `k` entries are
/// returned.
#[derive(Debug, Clone)]
pub struct StubLm {
    tokenizer: WordPiece,
    by_position: HashMap<(String, usize), Vec<Replacement>>,
    by_word: HashMap<String, Vec<Replacement>>,
    default: Vec<Replacement>,
}

/// Ranked list with linearly decaying pseudo-probabilities.
pub fn ranked(words: &[&str]) -> Vec<Replacement> {
    let n = words.len() as f64;
    let total = n * (n + 1.0) / 2.0;
    words
        .iter()
        .enumerate()
        .map(|(i, w)| Replacement::new(*w, (n - i as f64) / total))
        .collect()
}

impl StubLm {
    pub fn new(tokenizer: WordPiece) -> Self {
        StubLm {
            tokenizer,
            by_position: HashMap::new(),
            by_word: HashMap::new(),
            default: Vec::new(),
        }
    }

    /// Programs the answer at one word of the sequence whose surface text is `surface`.
    pub fn program(&mut self, surface: &str, word_index: usize, list: Vec<Replacement>) {
        self.by_position.insert((surface.to_string(), word_index), list);
    }

    /// Programs the answer at every position holding `word`.
    pub fn program_word(&mut self, word: &str, list: Vec<Replacement>) {
        self.by_word.insert(word.to_string(), list);
    }

    pub fn set_default(&mut self, list: Vec<Replacement>) {
        self.default = list;
    }

    fn lookup(&self, seq: &TokenSequence, word_index: usize) -> &[Replacement] {
        if let Some(list) = self.by_position.get(&(seq.surface(), word_index)) {
            return list;
        }
        if let Some(list) = self.by_word.get(&seq.words[word_index]) {
            return list;
        }
        &self.default
    }
}

impl MaskedLm for StubLm {
    fn backend_id(&self) -> String {
        "stub".to_string()
    }

    fn tokenizer(&self) -> &WordPiece {
        &self.tokenizer
    }

    fn mlm_topk(&self, seq: &TokenSequence, word_index: usize, k: usize) -> Result<Vec<Replacement>> {
        if word_index >= seq.num_words() {
            return Err(Error::PositionOutOfRange {
                position: word_index,
                words: seq.num_words(),
            });
        }
        Ok(self.lookup(seq, word_index).iter().take(k).cloned().collect())
    }
}
