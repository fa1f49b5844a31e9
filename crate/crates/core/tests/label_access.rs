//! The weakly supervised stages must never see gold labels. Their public
//! functions take `TokenizedCorpus`, which has no labels; this audit also
//! keeps the labeled types out of their non-test source.

use std::fs;
use std::path::Path;

const WEAKLY_SUPERVISED: &[&str] = &[
    "src/mcp.rs",
    "src/selftrain.rs",
    "src/category_vocab/mod.rs",
    "src/category_vocab/embeddings.rs",
];

const FORBIDDEN: &[&str] = &["gold_label", "&Document", "<Document>", "documents()", "Corpus::", ".subset("];

fn non_test_source(path: &Path) -> String {
    let text = fs::read_to_string(path).unwrap();
    match text.find("#[cfg(test)]") {
        Some(at) => text[..at].to_string(),
        None => text,
    }
}

#[test]
fn weak_stages_do_not_touch_gold_labels() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    for file in WEAKLY_SUPERVISED {
        let source = non_test_source(&root.join(file));
        for token in FORBIDDEN {
            let hits: Vec<(usize, &str)> = source
                .lines()
                .enumerate()
                .filter(|(_, l)| !l.trim_start().starts_with("//"))
                .filter(|(_, l)| l.contains(token) && !l.contains("TokenizedCorpus::"))
                .collect();
            assert!(hits.is_empty(), "{file} mentions `{token}`: {hits:?}");
        }
    }
}

#[test]
fn tokenized_corpus_exposes_no_labels() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let source = non_test_source(&root.join("src/corpus/mod.rs"));
    let start = source.find("impl TokenizedCorpus").expect("TokenizedCorpus impl");
    let body = &source[start..];
    let end = body.find("\n}\n").unwrap();
    assert!(!body[..end].contains("gold"), "TokenizedCorpus mentions gold labels");
}
