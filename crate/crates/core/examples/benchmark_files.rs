//! Loads labeled benchmark files and label-name files, and builds a file-backed
//! pipeline config.
//!
//! cargo run --example benchmark_files

use std::fs;

use lotpipe::corpus::{load_benchmark, BenchmarkFormat, LabelNameSet, Split};
use lotpipe::pipeline::{BackendSpec, DatasetSpec, PipelineConfig};

fn main() -> lotpipe::Result<()> {
    let dir = std::env::temp_dir().join("lotpipe-examples/benchmark-files");
    fs::create_dir_all(&dir).unwrap();

    // AG News style: 1-based class, title, body.
    let ag = dir.join("train.csv");
    fs::write(
        &ag,
        "1,\"Late goal\",\"The team won the match in the final minute.\"\n\
         2,\"Stocks slip\",\"Shares fell as the market reacted to profit warnings.\"\n\
         1,\"Coach out\",\"The club replaced its coach after the season.\"\n",
    )
    .unwrap();
    let corpus = load_benchmark(&ag, BenchmarkFormat::CsvLabelTitleBody, Some(2), Split::Train)?;
    for doc in corpus.documents() {
        println!("{:?} {}", doc.gold_label, doc.text);
    }

    // One JSON object per line with 0-based labels.
    let jsonl = dir.join("test.jsonl");
    fs::write(
        &jsonl,
        "{\"label\": 0, \"text\": \"fans filled the stadium\"}\n{\"label\": 1, \"text\": \"the bank raised rates\"}\n",
    )
    .unwrap();
    let test = load_benchmark(&jsonl, BenchmarkFormat::LineJson, Some(2), Split::Test)?;
    println!("{} test documents", test.len());

    // Up to three label words per class, class order by line.
    let labels = dir.join("labels.txt");
    fs::write(&labels, "sports: sports, team\nbusiness: business, market\n").unwrap();
    let names = LabelNameSet::load(&labels)?;
    for c in 0..names.num_classes() {
        println!("class {c} {}: {:?}", names.class_names()[c], names.words(c));
    }

    let mut config = PipelineConfig::synthetic(2, 1, 0, dir.join("out"));
    config.dataset = DatasetSpec::Files {
        name: "agnews-sample".into(),
        format: BenchmarkFormat::CsvLabelTitleBody,
        train: ag,
        test: Some(jsonl),
        num_classes: Some(2),
    };
    config.label_names = Some(labels);
    config.backend = BackendSpec::Tiny { vocab_size: 500 };
    config.set_hp("max_seq_len", 128);
    config.validate()?;
    print!("{}", config.effective()?.to_toml());
    Ok(())
}
