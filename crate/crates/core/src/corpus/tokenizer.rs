use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const MASK: &str = "[MASK]";

const MAX_CHARS_PER_WORD: usize = 100;

/// Collapses runs of whitespace into single spaces and trims the ends.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation() || (!c.is_alphanumeric() && !c.is_whitespace())
}

/// Lowercased words: whitespace separated, punctuation characters split off
/// as words of their own.
pub fn split_words(text: &str) -> Vec<String> {
    let mut words = Vec::new();
    for chunk in text.split_whitespace() {
        let mut current = String::new();
        for c in chunk.chars() {
            if c.is_control() {
                continue;
            }
            if is_punctuation(c) {
                if !current.is_empty() {
                    words.push(std::mem::take(&mut current));
                }
                words.push(c.to_lowercase().collect());
            } else {
                current.extend(c.to_lowercase());
            }
        }
        if !current.is_empty() {
            words.push(current);
        }
    }
    words
}

/// Token range `[start, end)` of one whole word inside a [`TokenSequence`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct WordSpan {
    pub start: usize,
    pub end: usize,
}

impl WordSpan {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// `[CLS] w1 .. wn [SEP]` with whole-word spans over the inner tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub token_ids: Vec<u32>,
    pub word_spans: Vec<WordSpan>,
    /// Lowercased surface form of each word, aligned with `word_spans`.
    pub words: Vec<String>,
    pub max_seq_len: usize,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    pub fn num_words(&self) -> usize {
        self.word_spans.len()
    }

    /// Surface text that survived truncation.
    pub fn surface(&self) -> String {
        self.words.join(" ")
    }
}

/// Greedy longest-match-first WordPiece tokenizer over an uncased vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordPiece {
    vocab: Vec<String>,
    index: HashMap<String, u32>,
    pad: u32,
    unk: u32,
    cls: u32,
    sep: u32,
    mask: u32,
}

impl WordPiece {
    pub fn from_vocab(vocab: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(vocab.len());
        for (i, tok) in vocab.iter().enumerate() {
            index.entry(tok.clone()).or_insert(i as u32);
        }
        let special = |name: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| Error::InvalidArgument(format!("vocabulary lacks {name}")))
        };
        Ok(WordPiece {
            pad: special(PAD)?,
            unk: special(UNK)?,
            cls: special(CLS)?,
            sep: special(SEP)?,
            mask: special(MASK)?,
            vocab,
            index,
        })
    }

    /// Reads a BERT-style `vocab.txt` (one token per line).
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_vocab(text.lines().map(str::to_string).collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_vocab_string()).map_err(|e| Error::io(path, e))
    }

    /// `vocab.txt` contents, one token per line.
    pub fn to_vocab_string(&self) -> String {
        let mut out = self.vocab.join("\n");
        out.push('\n');
        out
    }

    /// Builds a vocabulary from raw texts: special tokens, then every word
    /// seen at least `min_count` times (most frequent first, at most
    /// `max_words`), then single-character pieces so that any remaining word
    /// can still be spelled out.
    pub fn build<'a>(
        texts: impl IntoIterator<Item = &'a str>,
        min_count: usize,
        max_words: usize,
    ) -> Self {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for t in texts {
            for w in split_words(t) {
                *counts.entry(w).or_default() += 1;
            }
        }
        let mut vocab: Vec<String> = [PAD, UNK, CLS, SEP, MASK]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let mut chars = std::collections::BTreeSet::new();
        for w in counts.keys() {
            chars.extend(w.chars());
        }
        let mut ranked: Vec<(&String, &usize)> =
            counts.iter().filter(|(_, &c)| c >= min_count).collect();
        ranked.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
        vocab.extend(ranked.into_iter().take(max_words).map(|(w, _)| w.clone()));
        let mut seen: std::collections::HashSet<String> = vocab.iter().cloned().collect();
        for c in &chars {
            for piece in [c.to_string(), format!("##{c}")] {
                if seen.insert(piece.clone()) {
                    vocab.push(piece);
                }
            }
        }
        Self::from_vocab(vocab).expect("special tokens are present")
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn token(&self, id: u32) -> &str {
        &self.vocab[id as usize]
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn pad_id(&self) -> u32 {
        self.pad
    }

    pub fn unk_id(&self) -> u32 {
        self.unk
    }

    pub fn cls_id(&self) -> u32 {
        self.cls
    }

    pub fn sep_id(&self) -> u32 {
        self.sep
    }

    pub fn mask_id(&self) -> u32 {
        self.mask
    }

    /// Whether a vocabulary entry may appear as a replacement candidate:
    /// a single-token whole word, not a special token, continuation piece or
    /// bare punctuation.
    pub fn is_candidate_word(&self, id: u32) -> bool {
        let tok = self.token(id);
        if tok.starts_with("##") || (tok.starts_with('[') && tok.ends_with(']') && tok.len() > 2)
        {
            return false;
        }
        tok.chars().any(char::is_alphanumeric)
    }

    /// WordPiece ids for one already-lowercased word.
    pub fn word_pieces(&self, word: &str) -> Vec<u32> {
        if word.chars().count() > MAX_CHARS_PER_WORD {
            return vec![self.unk];
        }
        let chars: Vec<char> = word.chars().collect();
        let mut pieces = Vec::new();
        let mut start = 0;
        while start < chars.len() {
            let mut end = chars.len();
            let mut found = None;
            while start < end {
                let mut sub: String = chars[start..end].iter().collect();
                if start > 0 {
                    sub.insert_str(0, "##");
                }
                if let Some(&id) = self.index.get(&sub) {
                    found = Some(id);
                    break;
                }
                end -= 1;
            }
            match found {
                Some(id) => pieces.push(id),
                None => return vec![self.unk],
            }
            start = end;
        }
        pieces
    }

    /// Encodes a document, head-truncating at whole-word boundaries so the
    /// result (including `[CLS]` and `[SEP]`) has at most `max_seq_len` tokens.
    pub fn encode(&self, text: &str, max_seq_len: usize) -> TokenSequence {
        assert!(max_seq_len >= 2, "max_seq_len must leave room for [CLS] and [SEP]");
        let budget = max_seq_len - 2;
        let mut token_ids = vec![self.cls];
        let mut word_spans = Vec::new();
        let mut words = Vec::new();
        for word in split_words(text) {
            let pieces = self.word_pieces(&word);
            if token_ids.len() - 1 + pieces.len() > budget {
                break;
            }
            let start = token_ids.len();
            token_ids.extend_from_slice(&pieces);
            word_spans.push(WordSpan {
                start,
                end: token_ids.len(),
            });
            words.push(word);
        }
        token_ids.push(self.sep);
        TokenSequence {
            token_ids,
            word_spans,
            words,
            max_seq_len,
        }
    }

    /// Reassembles the words covered by `word_spans` from token ids.
    pub fn detokenize(&self, seq: &TokenSequence) -> String {
        seq.word_spans
            .iter()
            .map(|span| {
                seq.token_ids[span.start..span.end]
                    .iter()
                    .map(|&id| self.token(id).trim_start_matches("##"))
                    .collect::<String>()
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy() -> WordPiece {
        let v = [PAD, UNK, CLS, SEP, MASK, "sports", "news", "play", "##ing", "##s", "un", "##aff", "##able", ","]
            .iter()
            .map(|s| s.to_string())
            .collect();
        WordPiece::from_vocab(v).unwrap()
    }

    #[test]
    fn short_input_has_two_word_spans() {
        let seq = toy().encode("sports news", 200);
        assert_eq!(seq.word_spans.len(), 2);
        assert_eq!(seq.words, vec!["sports", "news"]);
        assert_eq!(seq.len(), 4);
    }

    #[test]
    fn long_input_truncates_to_exact_length() {
        let text = vec!["news"; 1000].join(" ");
        let seq = toy().encode(&text, 200);
        assert_eq!(seq.len(), 200);
        assert_eq!(seq.num_words(), 198);
    }

    #[test]
    fn multi_piece_words_keep_one_span() {
        let wp = toy();
        let seq = wp.encode("Unaffable playing", 16);
        assert_eq!(seq.word_spans[0], WordSpan { start: 1, end: 4 });
        assert_eq!(seq.word_spans[1], WordSpan { start: 4, end: 6 });
        assert_eq!(wp.detokenize(&seq), "unaffable playing");
    }

    #[test]
    fn truncation_never_splits_a_word() {
        let wp = toy();
        // "unaffable" needs 3 tokens, only 2 remain after "news".
        let seq = wp.encode("news unaffable", 5);
        assert_eq!(seq.words, vec!["news"]);
        assert_eq!(seq.len(), 3);
    }

    #[test]
    fn punctuation_is_split_off() {
        assert_eq!(split_words("Hello, World!"), vec!["hello", ",", "world", "!"]);
        assert!(!toy().is_candidate_word(toy().id(",").unwrap()));
        assert!(!toy().is_candidate_word(toy().id("##s").unwrap()));
        assert!(!toy().is_candidate_word(toy().mask_id()));
        assert!(toy().is_candidate_word(toy().id("sports").unwrap()));
    }

    #[test]
    fn table_one_sentence_contains_sports_span() {
        let text = "The oldest annual US team sports competition that includes professionals is not in baseball, or football or basketball or hockey. It's in soccer.";
        let wp = WordPiece::build([text], 1, 1000);
        let seq = wp.encode(text, 200);
        let i = seq.words.iter().position(|w| w == "sports").unwrap();
        let span = seq.word_spans[i];
        assert_eq!(wp.token(seq.token_ids[span.start]), "sports");
    }

    proptest! {
        #[test]
        fn spans_partition_and_roundtrip(words in proptest::collection::vec("[a-z]{1,8}", 1..60), max in 4usize..40) {
            let text = words.join(" ");
            // A vocabulary lacking most whole words forces multi-piece spans.
            let wp = WordPiece::build([text.as_str()], 3, 5);
            let seq = wp.encode(&text, max);
            prop_assert!(seq.len() <= max);
            let mut expect = 1;
            for span in &seq.word_spans {
                prop_assert_eq!(span.start, expect);
                prop_assert!(span.end > span.start);
                expect = span.end;
            }
            prop_assert_eq!(expect, seq.len() - 1);
            let kept = words[..seq.num_words()].join(" ");
            prop_assert_eq!(wp.detokenize(&seq), kept);
        }
    }
}
