//! Sharpened soft targets and self-training on top of a post-MCP model.
//!
//! The earlier stages run through the pipeline, so a second invocation
//! reuses them from the cache directory.
//!
//! cargo run --example self_training

use lotpipe::baselines::EvalReport;
use lotpipe::corpus::TokenizedCorpus;
use lotpipe::lm::{MaskedLm, TransformerLm};
use lotpipe::pipeline::{plot, Pipeline, PipelineConfig};
use lotpipe::selftrain::{self_train, soft_targets, st_loss};

fn main() -> lotpipe::Result<()> {
    // Squaring favours confident predictions; dividing by the class
    // frequency keeps large classes from absorbing everything.
    let p = vec![vec![0.9, 0.1], vec![0.6, 0.4], vec![0.55, 0.45]];
    let targets = soft_targets(&p)?;
    for (pr, qr) in p.iter().zip(&targets.q) {
        println!("p {pr:?} -> q [{:.3}, {:.3}]", qr[0], qr[1]);
    }
    println!("KL(Q || P) = {:.4}", st_loss(&targets.q, &p)?);

    let out = std::env::temp_dir().join("lotpipe-examples/self-training");
    let mut pipeline = Pipeline::new(PipelineConfig::synthetic(4, 150, 2, &out))?;
    pipeline.stage_vocab()?;
    pipeline.stage_detect(None)?;
    let mut lm: TransformerLm = pipeline.stage_mcp(None)?;

    let hp = pipeline.hyperparameters().clone();
    let train = TokenizedCorpus::new(pipeline.train_corpus().unlabeled(), lm.tokenizer(), hp.max_seq_len);
    let test_corpus = pipeline.test_corpus().unwrap();
    let test = TokenizedCorpus::new(test_corpus.unlabeled(), lm.tokenizer(), hp.max_seq_len);
    let gold = test_corpus.gold_labels().unwrap();
    let accuracy = |m: &TransformerLm| {
        EvalReport::from_predictions("monitor", &m.predict_many(test.sequences()), &gold, 4)
            .map(|r| r.accuracy)
            .unwrap_or(f64::NAN)
    };
    println!("before self-training: {:.4}", accuracy(&lm));

    let trace = self_train(&train, &mut lm, &hp, 2, Some(&accuracy))?;
    println!("after {} steps: {:.4}", trace.records.len(), accuracy(&lm));
    for w in &trace.windows {
        println!("  steps {:>3}-{:>3}: corpus loss {:.5} -> {:.5}", w.start, w.end, w.start_loss, w.end_loss);
    }

    let trace_path = out.join("example-trace.tsv");
    trace.save(&trace_path)?;
    let svg = out.join("example-trace.svg");
    std::fs::write(&svg, plot::trace_svg(&trace, hp.st_update_interval)).unwrap();
    println!("trace {} and plot {}", trace_path.display(), svg.display());
    Ok(())
}
