//! The comparison methods: training on documents that contain a label name,
//! and supervised training with a few labeled documents per class.
//!
//! cargo run --example baselines

use lotpipe::baselines::{comparison_table, evaluate, simple_match_labels, train_on_labels, train_supervised, MultiMatch};
use lotpipe::corpus::TokenizedCorpus;
use lotpipe::lm::MaskedLm;
use lotpipe::pipeline::{Pipeline, PipelineConfig};

fn main() -> lotpipe::Result<()> {
    let seed = 4;
    let out = std::env::temp_dir().join("lotpipe-examples/baselines");
    let mut pipeline = Pipeline::new(PipelineConfig::synthetic(4, 150, seed, out))?;
    let base = pipeline.base_model()?;
    let hp = pipeline.hyperparameters().clone();
    let train = pipeline.train_corpus().clone();
    let test = pipeline.test_corpus().unwrap().clone();
    let names = pipeline.label_names().clone();
    let tokenized = TokenizedCorpus::new(train.unlabeled(), base.tokenizer(), hp.max_seq_len);
    let test_tokenized = TokenizedCorpus::new(test.unlabeled(), base.tokenizer(), hp.max_seq_len);
    let gold = train.gold_labels().unwrap();

    let mut reports = Vec::new();
    for policy in [MultiMatch::Skip, MultiMatch::First] {
        let labels = simple_match_labels(&tokenized, &names, policy);
        let correct = labels.iter().filter(|(doc, c)| gold[*doc] == *c).count();
        println!(
            "{policy:?}: {} of {} documents pseudo-labeled, {:.1}% correct",
            labels.len(),
            train.len(),
            100.0 * correct as f64 / labels.len() as f64
        );
        let mut lm = base.clone();
        lm.init_classifier(names.num_classes(), seed);
        train_on_labels(&tokenized, &labels, &mut lm, &hp, hp.mcp_epochs, seed)?;
        reports.push(evaluate(&format!("simple-match-{policy:?}").to_lowercase(), &lm, &test, &test_tokenized)?);
    }

    for n in [4, 16, 64] {
        let mut lm = base.clone();
        lm.init_classifier(names.num_classes(), seed);
        train_supervised(&train, &tokenized, &mut lm, n, &hp, 10, seed)?;
        reports.push(evaluate(&format!("supervised-n{n}"), &lm, &test, &test_tokenized)?);
    }
    print!("{}", comparison_table(&reports));
    Ok(())
}
