use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lotpipe::baselines::MultiMatch;
use lotpipe::lm::{StStrategy, TransformerLm};
use lotpipe::pipeline::{plot, predict_texts, Pipeline, PipelineConfig};
use lotpipe::selftrain::StTrace;
use lotpipe::{Error, Result};

/// Train a text classifier from label names and an unlabeled corpus.
#[derive(Parser)]
#[command(name = "lotpipe", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Pipeline config (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Overrides the config's root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Hyperparameter override, e.g. `--set lr_mcp=1e-4`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic-corpus config to start from.
    Init {
        #[arg(long, default_value_t = 4)]
        classes: usize,
        #[arg(long, default_value_t = 150)]
        docs_per_class: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Output directory recorded in the config.
        #[arg(long, default_value = "lotpipe-out")]
        out: PathBuf,
        /// Where to write the config.
        path: PathBuf,
    },
    /// Mine the category vocabulary.
    Vocab {
        #[command(flatten)]
        common: Common,
        /// Take the top words before removing stopwords and shared words.
        #[arg(long)]
        filter_before_cut: bool,
    },
    /// Find category-indicative words.
    Detect {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        vocab_file: Option<PathBuf>,
    },
    /// Masked category prediction.
    Mcp {
        #[command(flatten)]
        common: Common,
        /// Vocabulary to detect indicative words with when no detection output exists.
        #[arg(long)]
        vocab_file: Option<PathBuf>,
        /// Detection output to train on.
        #[arg(long)]
        sind_cache: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Self-training on the post-MCP model.
    Selftrain {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        strategy: Option<StStrategy>,
        /// Confidence threshold of the hard strategy.
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        update_interval: Option<usize>,
        /// Extra copy of the step trace.
        #[arg(long)]
        trace_out: Option<PathBuf>,
        /// Model to start from (default: the run's post-MCP checkpoint).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Comparison baselines: label-name matching and supervised references.
    Baselines {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        multi_match: Option<MultiMatch>,
    },
    /// Accuracy reports on the test split.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Evaluate only this checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Classify raw text lines (from a file or stdin).
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        input: Option<PathBuf>,
    },
    /// Every enabled stage, reusing current artifacts.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Render a self-training trace as SVG.
    Plot {
        trace: PathBuf,
        #[arg(long, short)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        update_interval: usize,
    },
}

fn load_config(common: &Common) -> Result<PipelineConfig> {
    let mut config = PipelineConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.output_dir = out.clone();
    }
    for kv in &common.set {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected KEY=VALUE, got `{kv}`")))?;
        let parsed = format!("v = {value}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));
        config.set_hp(key.trim(), parsed);
    }
    Ok(config)
}

fn write_out(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Init {
            classes,
            docs_per_class,
            seed,
            out,
            path,
        } => {
            let config = PipelineConfig::synthetic(classes, docs_per_class, seed, out);
            write_out(&path, config.to_toml().as_bytes())
        }
        Command::Vocab {
            common,
            filter_before_cut,
        } => {
            let mut config = load_config(&common)?;
            if filter_before_cut {
                config.set_hp("filter_before_cut", true);
            }
            let vocab = Pipeline::new(config)?.stage_vocab()?;
            print!("{}", vocab.to_table(10));
            Ok(())
        }
        Command::Detect { common, vocab_file } => {
            let mut p = Pipeline::new(load_config(&common)?)?;
            let s_ind = p.stage_detect(vocab_file.as_deref())?;
            println!("{} indicative occurrences", s_ind.len());
            Ok(())
        }
        Command::Mcp {
            common,
            vocab_file,
            sind_cache,
            epochs,
        } => {
            let mut config = load_config(&common)?;
            if let Some(e) = epochs {
                config.set_hp("mcp_epochs", e as i64);
            }
            let mut p = Pipeline::new(config)?;
            if sind_cache.is_none() && (vocab_file.is_some() || !p.layout().sind().exists()) {
                p.stage_detect(vocab_file.as_deref())?;
            }
            p.stage_mcp(sind_cache.as_deref())?;
            println!("{}", p.layout().checkpoint("post-mcp").display());
            Ok(())
        }
        Command::Selftrain {
            common,
            epochs,
            strategy,
            tau,
            update_interval,
            trace_out,
            checkpoint,
        } => {
            let mut config = load_config(&common)?;
            if let Some(e) = epochs {
                config.set_hp("st_epochs", e as i64);
            }
            if let Some(s) = strategy {
                config.set_hp("st_strategy", if s == StStrategy::Hard { "hard" } else { "soft" });
            }
            if let Some(t) = tau {
                config.set_hp("hard_threshold", t);
            }
            if let Some(u) = update_interval {
                config.set_hp("st_update_interval", u as i64);
            }
            let mut p = Pipeline::new(config)?;
            let (_, trace) = p.stage_selftrain(checkpoint.as_deref())?;
            if let Some(path) = trace_out {
                trace.save(&path)?;
            }
            let windows = trace.window_decreases(p.hyperparameters().st_update_interval);
            println!(
                "{} steps, {}/{} windows with decreasing loss",
                trace.records.len(),
                windows.iter().filter(|&&d| d).count(),
                windows.len()
            );
            Ok(())
        }
        Command::Baselines { common, multi_match } => {
            let mut config = load_config(&common)?;
            config.stages.simple_match = true;
            if let Some(m) = multi_match {
                config.stages.multi_match = m;
            }
            Pipeline::new(config)?.stage_baselines()
        }
        Command::Eval { common, checkpoint } => {
            let mut p = Pipeline::new(load_config(&common)?)?;
            p.stage_eval(checkpoint.as_deref())?;
            print!("{}", fs::read_to_string(p.layout().comparison()).map_err(|e| Error::io(p.layout().comparison(), e))?);
            Ok(())
        }
        Command::Predict {
            common,
            checkpoint,
            input,
        } => {
            let p = Pipeline::new(load_config(&common)?)?;
            let dir = checkpoint.unwrap_or_else(|| {
                let full = p.layout().checkpoint("post-selftrain");
                if full.exists() {
                    full
                } else {
                    p.layout().checkpoint("post-mcp")
                }
            });
            if !dir.join("manifest.json").exists() {
                return Err(Error::MissingArtifact {
                    path: dir,
                    producer: "lotpipe mcp` or `lotpipe selftrain".into(),
                });
            }
            let lm = TransformerLm::load(&dir)?;
            let lines: Vec<String> = match input {
                Some(path) => fs::read_to_string(&path)
                    .map_err(|e| Error::io(&path, e))?
                    .lines()
                    .map(str::to_string)
                    .collect(),
                None => io::stdin().lock().lines().collect::<io::Result<_>>().map_err(|e| Error::io("<stdin>", e))?,
            };
            let names = p.label_names().class_names();
            let mut out = io::stdout().lock();
            for (class, dist) in predict_texts(&lm, &lines, p.hyperparameters().max_seq_len) {
                let dist: Vec<String> = dist.iter().map(|v| format!("{v:.6}")).collect();
                let _ = writeln!(out, "{class}\t{}\t{}", names[class], dist.join(","));
            }
            Ok(())
        }
        Command::Run { common } => {
            let summary = Pipeline::new(load_config(&common)?)?.run()?;
            for r in &summary.reports {
                println!("{:<24} {:.4}", r.method, r.accuracy);
            }
            Ok(())
        }
        Command::Plot {
            trace,
            out,
            update_interval,
        } => {
            let t = StTrace::load(&trace)?;
            let out = out.unwrap_or_else(|| trace.with_extension("svg"));
            write_out(&out, plot::trace_svg(&t, update_interval).as_bytes())?;
            println!("{}", out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
