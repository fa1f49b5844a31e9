//! Trains the classifier on masked category prediction: every indicative
//! word is masked out and the model must recover its class from context.
//!
//! cargo run --example masked_category_prediction

use lotpipe::baselines::evaluate;
use lotpipe::category_vocab::{collect_replacements, rank_category_vocabulary};
use lotpipe::corpus::{make_synthetic, Split, SyntheticSpec, TokenizedCorpus, WordPiece};
use lotpipe::lm::{Hyperparameters, MaskedLm, MlmPretraining, TransformerLm};
use lotpipe::mcp::{detect_indicative, mcp_train};

fn main() -> lotpipe::Result<()> {
    let seed = 3;
    let spec = SyntheticSpec::topics(4, 150, seed);
    let train = make_synthetic(&spec, Split::Train)?.corpus;
    let test = make_synthetic(&SyntheticSpec { seed: 1000 + seed, docs_per_class: 100, ..spec.clone() }, Split::Test)?.corpus;
    let names = spec.label_names();
    let hp = Hyperparameters::tiny_profile();

    let tokenizer = WordPiece::build(train.unlabeled().texts(), 1, 1000);
    let tokenized = TokenizedCorpus::new(train.unlabeled(), &tokenizer, hp.max_seq_len);
    let test_tokenized = TokenizedCorpus::new(test.unlabeled(), &tokenizer, hp.max_seq_len);
    let mut lm = TransformerLm::tiny(tokenizer.clone(), names.num_classes(), hp.max_seq_len, seed);
    lm.pretrain_mlm(&tokenized, &MlmPretraining::default(), seed)?;

    let replacements = collect_replacements(&tokenized, &names, &lm, &hp)?;
    let vocab = rank_category_vocabulary(&replacements, &names, &hp, train.name())?;
    let indicative = detect_indicative(&tokenized, &vocab, &lm, &hp)?;
    println!(
        "{} indicative occurrences, per class {:?}",
        indicative.len(),
        indicative.class_counts(names.num_classes())
    );

    // Detection never sees labels; the gold labels only grade it here.
    let gold = train.gold_labels().expect("synthetic corpora are labeled");
    let agree = indicative.entries.iter().filter(|e| gold[e.doc_id] == e.class).count();
    println!("{:.1}% agree with the document label", 100.0 * agree as f64 / indicative.len() as f64);

    lm.init_classifier(names.num_classes(), seed);
    let trace = mcp_train(&indicative, &tokenized, &mut lm, &hp, seed)?;
    println!("epoch losses {:?}", trace.epoch_means);

    let report = evaluate("mcp-only", &lm, &test, &test_tokenized)?;
    println!("test accuracy {:.4}", report.accuracy);

    // Classify a masked word from its context alone.
    let seq = lm.tokenizer().encode("the coach said the match ended in a late goal", hp.max_seq_len);
    let word = seq.words.iter().position(|w| w == "match").unwrap();
    let span = seq.word_spans[word];
    let mut tokens = seq.token_ids.clone();
    tokens[span.start..span.end].fill(lm.tokenizer().mask_id());
    let p = lm.classify_at(&tokens, span.start)?;
    let shown: Vec<String> = names.class_names().iter().zip(&p).map(|(n, v)| format!("{n} {v:.3}")).collect();
    println!("masked word: {}", shown.join(", "));
    Ok(())
}
