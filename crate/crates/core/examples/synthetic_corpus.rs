//! Generates the synthetic topic corpus, tokenizes it and lists where the
//! label names occur.
//!
//! cargo run --example synthetic_corpus

use lotpipe::corpus::{find_label_occurrences, make_synthetic, Split, SyntheticSpec, TokenizedCorpus, WordPiece};

fn main() -> lotpipe::Result<()> {
    let spec = SyntheticSpec::topics(4, 150, 7);
    let generated = make_synthetic(&spec, Split::Train)?;
    let corpus = &generated.corpus;
    let names = spec.label_names();

    println!("{} documents, {} classes", corpus.len(), corpus.num_classes());
    for doc in corpus.documents().iter().step_by(150).take(4) {
        println!("  [{}] {}", names.class_names()[doc.gold_label.unwrap()], doc.text);
    }

    // Most frequent generator keywords per class.
    for (c, counts) in generated.keyword_counts.iter().enumerate() {
        let mut top: Vec<_> = counts.iter().collect();
        top.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
        let shown: Vec<String> = top.iter().take(6).map(|(w, n)| format!("{w}:{n}")).collect();
        println!("{:<11} {}", names.class_names()[c], shown.join(" "));
    }

    let tokenizer = WordPiece::build(corpus.unlabeled().texts(), 1, 1000);
    let tokenized = TokenizedCorpus::new(corpus.unlabeled(), &tokenizer, 64);
    let occurrences = find_label_occurrences(&tokenized, &names)?;
    let mut per_class = vec![0; names.num_classes()];
    for occ in &occurrences {
        per_class[occ.class] += 1;
    }
    println!("tokenizer vocabulary {}", tokenizer.vocab_size());
    println!("label-name occurrences per class {per_class:?}");
    Ok(())
}
