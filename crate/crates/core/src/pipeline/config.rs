use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::MultiMatch;
use crate::corpus::{BenchmarkFormat, SyntheticSpec};
use crate::error::{Error, Result};
use crate::lm::{Hyperparameters, MlmPretraining};

/// Environment variable overriding the cache root.
pub const CACHE_DIR_ENV: &str = "LOTPIPE_CACHE_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetSpec {
    /// Generated topic corpus; train and test splits come from the root seed.
    Synthetic {
        num_classes: usize,
        docs_per_class: usize,
        test_docs_per_class: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        keyword_rate: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        noise_rate: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label_noise_rate: Option<f64>,
    },
    /// Benchmark files on disk.
    Files {
        name: String,
        format: BenchmarkFormat,
        train: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        test: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        num_classes: Option<usize>,
    },
}

const TEST_SEED_OFFSET: u64 = 0x7e57;

impl DatasetSpec {
    pub fn name(&self) -> &str {
        match self {
            DatasetSpec::Synthetic { .. } => "synthetic",
            DatasetSpec::Files { name, .. } => name,
        }
    }

    /// Generator settings for the synthetic splits, or `None` for files.
    pub fn synthetic_specs(&self, seed: u64) -> Option<(SyntheticSpec, SyntheticSpec)> {
        let DatasetSpec::Synthetic {
            num_classes,
            docs_per_class,
            test_docs_per_class,
            keyword_rate,
            noise_rate,
            label_noise_rate,
        } = self
        else {
            return None;
        };
        let mut train = SyntheticSpec::topics(*num_classes, *docs_per_class, seed);
        if let Some(v) = keyword_rate {
            train.keyword_rate = *v;
        }
        if let Some(v) = noise_rate {
            train.noise_rate = *v;
        }
        if let Some(v) = label_noise_rate {
            train.label_noise_rate = *v;
        }
        let mut test = train.clone();
        test.docs_per_class = *test_docs_per_class;
        test.seed = seed.wrapping_add(TEST_SEED_OFFSET);
        Some((train, test))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BackendSpec {
    /// Small transformer pretrained on the training split before the run.
    Tiny {
        #[serde(default = "default_tiny_vocab")]
        vocab_size: usize,
    },
    /// Externally supplied BERT-style weights (safetensors + config.json + vocab.txt).
    Pretrained { path: PathBuf },
    /// Lookup-table replacements from a JSON file `{"word": ["r1", "r2", ...]}`;
    /// supports the vocabulary and detection stages only.
    Stub { table: PathBuf },
}

fn default_tiny_vocab() -> usize {
    1000
}

impl BackendSpec {
    pub fn is_trainable(&self) -> bool {
        !matches!(self, BackendSpec::Stub { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageToggles {
    pub mcp: bool,
    pub selftrain: bool,
    pub evaluate: bool,
    /// Train the label-name matching baseline.
    pub simple_match: bool,
    /// Self-train the matching baseline as well.
    pub simple_match_selftrain: bool,
    pub multi_match: MultiMatch,
    /// Labeled documents per class for the supervised reference runs.
    pub supervised: Vec<usize>,
    pub supervised_epochs: usize,
    /// Test accuracy sampled during self-training.
    pub trace_accuracy: bool,
}

impl Default for StageToggles {
    fn default() -> Self {
        StageToggles {
            mcp: true,
            selftrain: true,
            evaluate: true,
            simple_match: true,
            simple_match_selftrain: false,
            multi_match: MultiMatch::Skip,
            supervised: Vec::new(),
            supervised_epochs: 10,
            trace_accuracy: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub dataset: DatasetSpec,
    /// `class: word[,word]` lines; synthetic datasets default to their own names.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_names: Option<PathBuf>,
    pub backend: BackendSpec,
    /// Overrides on top of the backend's hyperparameter profile.
    #[serde(default)]
    pub hp: toml::Table,
    #[serde(default)]
    pub pretraining: MlmPretraining,
    #[serde(default)]
    pub stages: StageToggles,
}

impl PipelineConfig {
    /// Synthetic corpus, tiny backend, all stages.
    pub fn synthetic(num_classes: usize, docs_per_class: usize, seed: u64, output_dir: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            seed,
            output_dir: output_dir.into(),
            dataset: DatasetSpec::Synthetic {
                num_classes,
                docs_per_class,
                test_docs_per_class: 100,
                keyword_rate: None,
                noise_rate: None,
                label_noise_rate: None,
            },
            label_names: None,
            backend: BackendSpec::Tiny {
                vocab_size: default_tiny_vocab(),
            },
            hp: toml::Table::new(),
            pretraining: MlmPretraining::default(),
            stages: StageToggles::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        if let Some(p) = &mut self.label_names {
            fix(p);
        }
        if let DatasetSpec::Files { train, test, .. } = &mut self.dataset {
            fix(train);
            if let Some(t) = test {
                fix(t);
            }
        }
        match &mut self.backend {
            BackendSpec::Pretrained { path } => fix(path),
            BackendSpec::Stub { table } => fix(table),
            BackendSpec::Tiny { .. } => {}
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    fn profile(&self) -> Hyperparameters {
        match self.backend {
            BackendSpec::Tiny { .. } => Hyperparameters::tiny_profile(),
            _ => Hyperparameters::for_dataset(self.dataset.name()),
        }
    }

    /// Backend profile with the `hp` overrides applied.
    pub fn hyperparameters(&self) -> Result<Hyperparameters> {
        let base = self.profile();
        let mut table = toml::Table::try_from(&base).expect("hyperparameters serialize");
        for (key, value) in &self.hp {
            if !table.contains_key(key) {
                return Err(Error::Config(format!("unknown hyperparameter {key:?}")));
            }
            table.insert(key.clone(), value.clone());
        }
        let hp: Hyperparameters = toml::Value::Table(table)
            .try_into()
            .map_err(|e| Error::Config(format!("hyperparameter overrides: {e}")))?;
        hp.validate()?;
        Ok(hp)
    }

    /// Sets one hyperparameter override.
    pub fn set_hp(&mut self, key: &str, value: impl Into<toml::Value>) {
        self.hp.insert(key.to_string(), value.into());
    }

    /// The config with every hyperparameter spelled out.
    pub fn effective(&self) -> Result<Self> {
        let hp = self.hyperparameters()?;
        let mut out = self.clone();
        out.hp = toml::Table::try_from(&hp).expect("hyperparameters serialize");
        Ok(out)
    }

    /// Checks every referenced path and the overrides without loading data.
    pub fn validate(&self) -> Result<()> {
        let exists = |what: &str, p: &Path| {
            if p.exists() {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} {} does not exist", p.display())))
            }
        };
        if let Some(p) = &self.label_names {
            exists("label-name file", p)?;
        }
        match &self.dataset {
            DatasetSpec::Synthetic {
                num_classes,
                docs_per_class,
                test_docs_per_class,
                ..
            } => {
                if *num_classes < 2 || *docs_per_class == 0 || *test_docs_per_class == 0 {
                    return Err(Error::Config(
                        "synthetic dataset needs at least two classes and non-empty splits".into(),
                    ));
                }
            }
            DatasetSpec::Files { train, test, .. } => {
                if self.label_names.is_none() {
                    return Err(Error::Config("file datasets need a label_names file".into()));
                }
                exists("training file", train)?;
                match test {
                    Some(t) => exists("test file", t)?,
                    None if self.stages.evaluate => {
                        return Err(Error::Config(
                            "evaluation is enabled but the dataset has no test file".into(),
                        ))
                    }
                    None => {}
                }
            }
        }
        match &self.backend {
            BackendSpec::Pretrained { path } => exists("pretrained model directory", path)?,
            BackendSpec::Stub { table } => {
                exists("stub table", table)?;
                if self.stages.mcp || self.stages.selftrain || self.stages.simple_match || !self.stages.supervised.is_empty() {
                    return Err(Error::Config(
                        "the stub backend cannot be trained; disable the mcp, selftrain, simple_match and supervised stages".into(),
                    ));
                }
            }
            BackendSpec::Tiny { vocab_size } => {
                if *vocab_size < 10 {
                    return Err(Error::Config("tiny backend vocab_size must be at least 10".into()));
                }
            }
        }
        self.hyperparameters().map(|_| ())
    }

    /// `LOTPIPE_CACHE_DIR` when set, `<output_dir>/cache` otherwise.
    pub fn cache_root(&self) -> PathBuf {
        std::env::var_os(CACHE_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| self.output_dir.join("cache"))
    }
}
