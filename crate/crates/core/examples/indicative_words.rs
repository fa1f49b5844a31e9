//! Detects category-indicative words with a programmed stub LM, showing the
//! "more than 20 of the top 50" rule without training anything.
//!
//! cargo run --example indicative_words

use lotpipe::category_vocab::{CategoryVocabulary, ClassVocabulary, Provenance, VocabEntry};
use lotpipe::corpus::{Corpus, Split, TokenizedCorpus, WordPiece};
use lotpipe::lm::{ranked, Hyperparameters, StubLm};
use lotpipe::mcp::detect_indicative;

fn class_vocab(class: &str, words: &[String]) -> ClassVocabulary {
    ClassVocabulary {
        class: class.to_string(),
        entries: words
            .iter()
            .map(|w| VocabEntry {
                word: w.clone(),
                count: 1,
                similarity: None,
            })
            .collect(),
    }
}

/// A top-50 list with `hits[c]` words from class `c`'s vocabulary.
fn candidates(vocab: &[Vec<String>], hits: [usize; 2]) -> Vec<String> {
    let mut list: Vec<String> = Vec::new();
    for (c, &n) in hits.iter().enumerate() {
        list.extend(vocab[c].iter().take(n).cloned());
    }
    let mut i = 0;
    while list.len() < 50 {
        list.push(format!("other{i}"));
        i += 1;
    }
    list
}

fn main() -> lotpipe::Result<()> {
    let hp = Hyperparameters::default();
    let vocab_words: Vec<Vec<String>> = ["sports", "business"]
        .iter()
        .map(|c| (0..40).map(|i| format!("{c}{i}")).collect())
        .collect();
    let vocab = CategoryVocabulary {
        classes: vec![class_vocab("sports", &vocab_words[0]), class_vocab("business", &vocab_words[1])],
        provenance: Provenance {
            method: "handwritten".into(),
            corpus: "demo".into(),
            label_words: vec![vec!["sports".into()], vec!["business".into()]],
            top_k_replacement: hp.top_k_replacement,
            vocab_size_per_class: 40,
            filter_before_cut: false,
            stopwords: String::new(),
        },
    };

    let text = "striker scored late while shares slipped on thin volume";
    let corpus = Corpus::new("demo", Split::Train, 2, [(text.to_string(), None)])?;
    let tokenizer = WordPiece::build(corpus.unlabeled().texts(), 1, usize::MAX);
    let tokenized = TokenizedCorpus::new(corpus.unlabeled(), &tokenizer, 32);
    let surface = tokenized.get(0).surface();

    // Overlap counts per word position: (sports, business).
    let programmed: [(usize, [usize; 2]); 5] = [
        (0, [25, 3]),  // clearly sports
        (1, [21, 0]),  // just above the threshold
        (2, [20, 0]),  // exactly 20 is not enough
        (4, [22, 22]), // tie: no single class
        (5, [2, 23]),  // business
    ];
    let mut stub = StubLm::new(tokenizer);
    for (word_index, hits) in programmed {
        let list = candidates(&vocab_words, hits);
        let refs: Vec<&str> = list.iter().map(String::as_str).collect();
        stub.program(&surface, word_index, ranked(&refs));
    }

    let found = detect_indicative(&tokenized, &vocab, &stub, &hp)?;
    for (word_index, hits) in programmed {
        let entry = found.entries.iter().find(|e| e.word_index == word_index);
        let verdict = match entry {
            Some(e) => format!("indicates {} ({} overlaps)", vocab.classes[e.class].class, e.count),
            None => "not indicative".to_string(),
        };
        println!("{:<8} overlaps {:?}: {verdict}", tokenized.get(0).words[word_index], hits);
    }
    Ok(())
}
