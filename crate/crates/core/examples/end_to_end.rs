//! The whole method from a config file: mining, detection, masked category
//! prediction, self-training and evaluation, with every artifact on disk.
//! Run it twice to see the stages come from the cache.
//!
//! cargo run --example end_to_end [output-dir]

use lotpipe::lm::TransformerLm;
use lotpipe::pipeline::{predict_texts, run_pipeline, PipelineConfig};

fn main() -> lotpipe::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let out = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("lotpipe-examples/end-to-end"));

    let mut config = PipelineConfig::synthetic(4, 150, 7, &out);
    config.stages.supervised = vec![16];
    config.set_hp("st_update_interval", 50);
    let summary = run_pipeline(config.clone())?;

    println!("artifacts in {}", summary.output_dir.display());
    println!("{} indicative occurrences", summary.indicative);
    for r in &summary.reports {
        println!("{:<16} {:.4}", r.method, r.accuracy);
    }
    if let Some(trace) = &summary.trace {
        let windows = trace.window_decreases(50);
        println!("{}/{} self-training windows decreased", windows.iter().filter(|&&d| d).count(), windows.len());
    }

    let lm = TransformerLm::load(&out.join("checkpoints/post-selftrain"))?;
    // The tiny model only knows the generator's words, and its documents are
    // about half keywords, so these lines are written the same way.
    let lines = [
        "the team won the game as fans cheered the coach".to_string(),
        "the bank said profit and revenue rose as shares climbed".to_string(),
        "voters backed the senate bill in the election campaign".to_string(),
        "the startup said its software and cloud server run on every laptop".to_string(),
    ];
    let names = config.dataset.synthetic_specs(config.seed).unwrap().0.class_names;
    for (line, (class, p)) in lines.iter().zip(predict_texts(&lm, &lines, 64)) {
        println!("{:<11} {:.2}  {line}", names[class], p[class]);
    }
    Ok(())
}
