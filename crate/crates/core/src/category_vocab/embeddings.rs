use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::{build_classes, filter_lists, CategoryVocabulary, Provenance, VocabEntry};
use crate::corpus::LabelNameSet;
use crate::error::{Error, Result};
use crate::stopwords::STOPWORDS_VERSION;

/// Static word vectors, as read from `word v1 .. vd` text files.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    vectors: Vec<f64>,
    index: HashMap<String, usize>,
}

impl EmbeddingTable {
    pub fn new(dim: usize, entries: impl IntoIterator<Item = (String, Vec<f64>)>) -> Result<Self> {
        let mut table = EmbeddingTable {
            dim,
            words: Vec::new(),
            vectors: Vec::new(),
            index: HashMap::new(),
        };
        for (word, v) in entries {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            if table.index.contains_key(&word) {
                continue;
            }
            table.index.insert(word.clone(), table.words.len());
            table.words.push(word);
            table.vectors.extend(v);
        }
        Ok(table)
    }

    /// Parses whitespace-separated lines; a leading `count dim` header line
    /// (word2vec text format) is skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).peekable();
        if let Some((_, first)) = lines.peek() {
            let f: Vec<&str> = first.split_whitespace().collect();
            if f.len() == 2 && f.iter().all(|t| t.parse::<usize>().is_ok()) {
                lines.next();
            }
        }
        let mut dim = None;
        let mut entries = Vec::new();
        for (i, line) in lines {
            let mut parts = line.split_whitespace();
            let word = parts.next().unwrap().to_lowercase();
            let v: Vec<f64> = parts
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::MalformedRow {
                    row: i + 1,
                    message: e.to_string(),
                })?;
            let d = *dim.get_or_insert(v.len());
            if v.len() != d || d == 0 {
                return Err(Error::MalformedRow {
                    row: i + 1,
                    message: format!("expected {d} components, found {}", v.len()),
                });
            }
            entries.push((word, v));
        }
        Self::new(dim.ok_or(Error::NoDocuments)?, entries)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index.get(word).map(|&i| &self.vectors[i * self.dim..(i + 1) * self.dim])
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Per class, the `n` words nearest by cosine similarity to the mean of the
/// label-word vectors, then filtered like the MLM vocabulary.
pub fn static_embedding_vocab(table: &EmbeddingTable, names: &LabelNameSet, n: usize) -> Result<CategoryVocabulary> {
    let k = names.num_classes();
    let mut lists = Vec::with_capacity(k);
    for c in 0..k {
        let mut centroid = vec![0.0; table.dim];
        for w in names.words(c) {
            let v = table.get(w).ok_or_else(|| Error::MissingEmbedding(w.clone()))?;
            centroid.iter_mut().zip(v).for_each(|(a, b)| *a += b);
        }
        let m = names.words(c).len() as f64;
        centroid.iter_mut().for_each(|a| *a /= m);
        let mut scored: Vec<(String, f64)> = table
            .words
            .iter()
            .map(|w| (w.clone(), cosine(&centroid, table.get(w).unwrap())))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(n);
        lists.push(scored);
    }
    filter_lists(&mut lists, |e| &e.0);
    let classes = build_classes(
        names,
        lists.into_iter().map(|l| {
            l.into_iter()
                .map(|(word, s)| VocabEntry {
                    word,
                    count: 0,
                    similarity: Some(s),
                })
                .collect()
        }),
    )?;
    Ok(CategoryVocabulary {
        classes,
        provenance: Provenance {
            method: "static-embedding".into(),
            corpus: String::new(),
            label_words: (0..k).map(|c| names.words(c).to_vec()).collect(),
            top_k_replacement: 0,
            vocab_size_per_class: n,
            filter_before_cut: false,
            stopwords: STOPWORDS_VERSION.into(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(a: &str, b: &str) -> LabelNameSet {
        LabelNameSet::new(vec![a.into(), b.into()], vec![vec![a.into()], vec![b.into()]]).unwrap()
    }

    #[test]
    fn orthonormal_table_self_is_nearest() {
        let words = ["alpha", "beta", "gamma", "delta"];
        let table = EmbeddingTable::new(
            4,
            words.iter().enumerate().map(|(i, w)| {
                let mut v = vec![0.0; 4];
                v[i] = 1.0;
                (w.to_string(), v)
            }),
        )
        .unwrap();
        let v = static_embedding_vocab(&table, &names("alpha", "gamma"), 1).unwrap();
        assert_eq!(v.words(0), ["alpha"]);
        assert_eq!(v.classes[0].entries[0].similarity, Some(1.0));
        assert_eq!(v.words(1), ["gamma"]);
    }

    #[test]
    fn matches_exhaustive_cosine() {
        let text = "\
10 3
king 0.9 0.1 0.3
queen 0.8 0.2 0.35
crown 0.7 0.0 0.2
apple 0.1 0.9 0.0
pear 0.15 0.85 0.1
fruit 0.2 0.8 0.05
car -0.5 0.1 0.9
road -0.4 0.0 0.8
royal 0.85 0.05 0.25
juice 0.05 0.95 0.1
";
        let table = EmbeddingTable::parse(text).unwrap();
        assert_eq!(table.len(), 10);
        let v = static_embedding_vocab(&table, &names("king", "apple"), 3).unwrap();
        for (c, label) in [(0, "king"), (1, "apple")] {
            let q = table.get(label).unwrap();
            let mut all: Vec<(f64, &str)> = table
                .words()
                .iter()
                .map(|w| {
                    let x = table.get(w).unwrap();
                    let d: f64 = q.iter().zip(x).map(|(a, b)| a * b).sum();
                    let n = (q.iter().map(|a| a * a).sum::<f64>() * x.iter().map(|a| a * a).sum::<f64>()).sqrt();
                    (d / n, w.as_str())
                })
                .collect();
            all.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(b.1)));
            let expect: Vec<&str> = all.iter().take(3).map(|x| x.1).collect();
            assert_eq!(v.words(c), expect);
        }
    }

    #[test]
    fn missing_label_word_is_named() {
        let table = EmbeddingTable::parse("a 1 0\nb 0 1\n").unwrap();
        let err = static_embedding_vocab(&table, &names("a", "zzz"), 2).unwrap_err();
        assert!(err.to_string().contains("zzz"));
    }
}
