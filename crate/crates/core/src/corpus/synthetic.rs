use std::collections::{BTreeMap, HashMap};

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, LabelNameSet, Split};
use crate::error::{Error, Result};

const SPORTS: &[&str] = &[
    "sports", "game", "team", "match", "league", "season", "coach", "player", "players", "score",
    "goal", "championship", "tournament", "stadium", "soccer", "baseball", "basketball", "hockey",
    "football", "tennis", "olympic", "athletes", "victory", "defeat", "playoff", "referee", "fans",
    "racing", "golf", "medal",
];
const BUSINESS: &[&str] = &[
    "business", "market", "company", "shares", "stocks", "profit", "revenue", "investors",
    "economy", "trade", "sales", "bank", "earnings", "corporate", "merger", "firm", "retail",
    "commerce", "prices", "growth", "quarterly", "dividend", "billion", "acquisition", "finance",
    "commercial", "industry", "consumer", "inflation", "exports",
];
const POLITICS: &[&str] = &[
    "politics", "government", "election", "president", "minister", "parliament", "vote", "voters",
    "senate", "congress", "campaign", "party", "democracy", "policy", "legislation", "diplomats",
    "governor", "political", "candidate", "ballot", "referendum", "cabinet", "treaty", "sanctions",
    "opposition", "lawmakers", "coalition", "constitution", "mayor", "republic",
];
const TECHNOLOGY: &[&str] = &[
    "technology", "software", "computer", "internet", "device", "digital", "chip", "hardware",
    "network", "wireless", "online", "data", "users", "smartphone", "processor", "browser",
    "server", "startup", "algorithm", "robot", "silicon", "gadget", "laptop", "code", "cloud",
    "satellite", "broadband", "download", "encryption", "semiconductor",
];
const FILLER: &[&str] = &[
    "the", "a", "of", "to", "and", "in", "on", "for", "with", "was", "is", "said", "that", "it",
    "at", "by", "from", "new", "after", "this", "has", "will", "an", "its", "about", "over", "more",
    "year", "up", "week", "first", "two", "last", "people", "three", "time", "report", "today",
    "monday", "tuesday", "friday", "other", "some", "also", "than", "day", "news", "while",
    "could", "many", "would", "just", "like", "one", "out", "when", "into", "since", "told",
    "still",
];

pub const KEYWORDS_PER_CLASS: usize = 60;
pub const FILLER_WORDS: usize = 300;

/// Parameters of the synthetic topic corpus generator.
///
/// Each document draws its words from its own class keywords with probability
/// `keyword_rate`, from another class's keywords with probability
/// `noise_rate`, and otherwise from Zipf-weighted shared filler words. The
/// first keyword of each class doubles as its label name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub class_names: Vec<String>,
    pub class_keywords: Vec<Vec<String>>,
    pub filler: Vec<String>,
    pub docs_per_class: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub keyword_rate: f64,
    pub noise_rate: f64,
    /// Probability that a document also mentions the label name of another
    /// class once, outside of its topic.
    pub label_noise_rate: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// News-topic generator with up to four built-in classes; further classes
    /// get generated pseudo-words. Every class has [`KEYWORDS_PER_CLASS`]
    /// keywords, the built-in lists padded with pseudo-words, and the filler
    /// vocabulary is padded to [`FILLER_WORDS`].
    pub fn topics(num_classes: usize, docs_per_class: usize, seed: u64) -> Self {
        let builtin = [
            ("sports", SPORTS),
            ("business", BUSINESS),
            ("politics", POLITICS),
            ("technology", TECHNOLOGY),
        ];
        let mut class_names = Vec::new();
        let mut class_keywords = Vec::new();
        for c in 0..num_classes {
            match builtin.get(c) {
                Some((name, words)) => {
                    class_names.push(name.to_string());
                    let mut kw: Vec<String> = words.iter().map(|w| w.to_string()).collect();
                    let stem = &name[..3];
                    kw.extend((0..KEYWORDS_PER_CLASS - words.len()).map(|i| format!("{stem}x{i}")));
                    class_keywords.push(kw);
                }
                None => {
                    class_names.push(format!("topic{c}"));
                    class_keywords.push((0..KEYWORDS_PER_CLASS).map(|i| format!("topic{c}w{i}")).collect());
                }
            }
        }
        let mut filler: Vec<String> = FILLER.iter().map(|w| w.to_string()).collect();
        filler.extend((0..FILLER_WORDS - FILLER.len()).map(|i| format!("fw{i}")));
        SyntheticSpec {
            class_names,
            class_keywords,
            filler,
            docs_per_class,
            min_len: 10,
            max_len: 18,
            keyword_rate: 0.45,
            noise_rate: 0.06,
            label_noise_rate: 0.0,
            seed,
        }
    }

    /// One label word per class: the first keyword.
    pub fn label_names(&self) -> LabelNameSet {
        LabelNameSet::new(
            self.class_names.clone(),
            self.class_keywords.iter().map(|k| vec![k[0].clone()]).collect(),
        )
        .expect("validated keyword sets are disjoint")
    }

    fn validate(&self) -> Result<()> {
        let k = self.class_keywords.len();
        if k < 2 || self.class_names.len() != k {
            return Err(Error::InvalidSyntheticSpec(
                "need at least two classes with one name each".into(),
            ));
        }
        if self.docs_per_class == 0 || self.min_len == 0 || self.min_len > self.max_len {
            return Err(Error::InvalidSyntheticSpec("empty documents requested".into()));
        }
        if !(0.0..=1.0).contains(&self.label_noise_rate) {
            return Err(Error::InvalidSyntheticSpec("label_noise_rate must lie in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&(self.keyword_rate + self.noise_rate))
            || self.keyword_rate < 0.0
            || self.noise_rate < 0.0
        {
            return Err(Error::InvalidSyntheticSpec("rates must lie in [0, 1]".into()));
        }
        if self.filler.is_empty() && self.keyword_rate + self.noise_rate < 1.0 {
            return Err(Error::InvalidSyntheticSpec("no filler words".into()));
        }
        let mut owner: HashMap<&str, usize> = HashMap::new();
        for (c, words) in self.class_keywords.iter().enumerate() {
            if words.len() < 3 {
                return Err(Error::InvalidSyntheticSpec(format!(
                    "class {c} has fewer than 3 keywords"
                )));
            }
            for w in words {
                if let Some(&other) = owner.get(w.as_str()) {
                    if other != c {
                        return Err(Error::InvalidSyntheticSpec(format!(
                            "keyword {w:?} is shared by classes {other} and {c}"
                        )));
                    }
                }
                owner.insert(w, c);
            }
        }
        Ok(())
    }
}

/// A generated corpus together with the generator's own tally of how often
/// each keyword was sampled.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    /// Per keyword-owning class: keyword -> number of sampled occurrences.
    pub keyword_counts: Vec<BTreeMap<String, usize>>,
}

pub fn make_synthetic(spec: &SyntheticSpec, split: Split) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let k = spec.class_keywords.len();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let zipf = if spec.filler.is_empty() {
        None
    } else {
        Some(
            WeightedIndex::new((0..spec.filler.len()).map(|r| 1.0 / (r as f64 + 1.0)))
                .expect("positive weights"),
        )
    };
    let mut keyword_counts = vec![BTreeMap::new(); k];
    for (c, words) in spec.class_keywords.iter().enumerate() {
        for w in words {
            keyword_counts[c].insert(w.clone(), 0usize);
        }
    }
    let mut docs = Vec::with_capacity(k * spec.docs_per_class);
    for class in 0..k {
        for _ in 0..spec.docs_per_class {
            let len = rng.gen_range(spec.min_len..=spec.max_len);
            let mut words = Vec::with_capacity(len);
            for _ in 0..len {
                let r: f64 = rng.gen();
                let word = if r < spec.keyword_rate {
                    Some((class, spec.class_keywords[class].choose(&mut rng).unwrap()))
                } else if r < spec.keyword_rate + spec.noise_rate {
                    let mut other = rng.gen_range(0..k - 1);
                    if other >= class {
                        other += 1;
                    }
                    Some((other, spec.class_keywords[other].choose(&mut rng).unwrap()))
                } else {
                    None
                };
                match word {
                    Some((owner, w)) => {
                        *keyword_counts[owner].get_mut(w).unwrap() += 1;
                        words.push(w.as_str());
                    }
                    None => {
                        let i = zipf.as_ref().unwrap().sample(&mut rng);
                        words.push(spec.filler[i].as_str());
                    }
                }
            }
            if rng.gen::<f64>() < spec.label_noise_rate {
                let mut other = rng.gen_range(0..k - 1);
                if other >= class {
                    other += 1;
                }
                let w = &spec.class_keywords[other][0];
                *keyword_counts[other].get_mut(w).unwrap() += 1;
                let at = rng.gen_range(0..=words.len());
                words.insert(at, w.as_str());
            }
            docs.push((words.join(" "), Some(class)));
        }
    }
    docs.shuffle(&mut rng);
    let name = format!("synthetic-k{k}-{}", spec.seed);
    Ok(SyntheticCorpus {
        corpus: Corpus::new(name, split, k, docs)?,
        keyword_counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_for_fixed_seed() {
        let spec = SyntheticSpec::topics(2, 100, 7);
        let a = make_synthetic(&spec, Split::Train).unwrap().corpus;
        let b = make_synthetic(&spec, Split::Train).unwrap().corpus;
        assert_eq!(a.len(), 200);
        assert_eq!(a, b);
        let c = make_synthetic(&SyntheticSpec::topics(2, 100, 8), Split::Train).unwrap().corpus;
        assert_ne!(a, c);
    }

    #[test]
    fn shared_keyword_rejected() {
        let mut spec = SyntheticSpec::topics(2, 10, 1);
        spec.class_keywords[0].push("good".into());
        spec.class_keywords[1].push("good".into());
        assert!(matches!(
            make_synthetic(&spec, Split::Train),
            Err(Error::InvalidSyntheticSpec(_))
        ));
    }

    #[test]
    fn keyword_counts_match_direct_scan() {
        let spec = SyntheticSpec::topics(4, 50, 3);
        let out = make_synthetic(&spec, Split::Train).unwrap();
        for (c, counts) in out.keyword_counts.iter().enumerate() {
            for (word, &expected) in counts {
                let scanned: usize = out
                    .corpus
                    .documents()
                    .iter()
                    .map(|d| d.text.split(' ').filter(|w| w == word).count())
                    .sum();
                assert_eq!(scanned, expected, "class {c} keyword {word}");
            }
        }
        let labels = out.corpus.gold_labels().unwrap();
        for c in 0..4 {
            assert_eq!(labels.iter().filter(|&&l| l == c).count(), 50);
        }
    }

    #[test]
    fn more_than_four_classes_use_pseudo_words() {
        let spec = SyntheticSpec::topics(6, 5, 1);
        assert_eq!(spec.label_names().words(5), ["topic5w0"]);
        assert!(spec.class_keywords.iter().all(|k| k.len() == KEYWORDS_PER_CLASS));
        assert_eq!(spec.filler.len(), FILLER_WORDS);
        assert!(spec.class_keywords[0].contains(&"spox29".to_string()));
        assert_eq!(make_synthetic(&spec, Split::Train).unwrap().corpus.len(), 30);
    }
}
