//! Configured runs of the whole method, with every stage's output on disk.
//!
//! ```text
//! <output_dir>/
//!   config.toml            effective configuration (all hyperparameters spelled out)
//!   label_names.txt
//!   manifest.json          per-stage fingerprints and artifact digests
//!   vocab/vocabulary.json  vocab/vocabulary.txt
//!   sind/indicative.tsv
//!   checkpoints/<stage>/
//!   traces/mcp.tsv  traces/selftrain.tsv(.windows)  traces/selftrain.svg
//!   reports/<method>.json  reports/comparison.txt
//! ```
//!
//! A stage is skipped when the manifest holds a matching fingerprint and its
//! artifacts are intact. Fingerprints chain through the digests of the input
//! artifacts, so a stage re-runs whenever anything upstream changed.

mod config;
pub mod plot;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{BackendSpec, DatasetSpec, PipelineConfig, StageToggles, CACHE_DIR_ENV};

use crate::baselines::{comparison_table, evaluate, simple_match_labels, train_on_labels, train_supervised, EvalReport};
use crate::category_vocab::{collect_replacements, rank_category_vocabulary, CategoryVocabulary};
use crate::corpus::{load_benchmark, make_synthetic, Corpus, LabelNameSet, Split, TokenizedCorpus, WordPiece};
use crate::error::{Error, Result};
use crate::lm::{ranked, Hyperparameters, MaskedLm, Stage, StubLm, TransformerLm};
use crate::mcp::{detect_indicative, mcp_train, IndicativeWordSet};
use crate::selftrain::{self_train, StTrace};

pub const RUN_MANIFEST_VERSION: u32 = 1;

/// Artifact paths under one output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.toml")
    }

    pub fn label_names(&self) -> PathBuf {
        self.root.join("label_names.txt")
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn failed_marker(&self) -> PathBuf {
        self.root.join("STAGE_FAILED")
    }

    pub fn vocab(&self) -> PathBuf {
        self.root.join("vocab/vocabulary.json")
    }

    pub fn vocab_table(&self) -> PathBuf {
        self.root.join("vocab/vocabulary.txt")
    }

    pub fn sind(&self) -> PathBuf {
        self.root.join("sind/indicative.tsv")
    }

    pub fn checkpoint(&self, name: &str) -> PathBuf {
        self.root.join("checkpoints").join(name)
    }

    pub fn mcp_trace(&self) -> PathBuf {
        self.root.join("traces/mcp.tsv")
    }

    pub fn st_trace(&self) -> PathBuf {
        self.root.join("traces/selftrain.tsv")
    }

    pub fn st_plot(&self) -> PathBuf {
        self.root.join("traces/selftrain.svg")
    }

    pub fn report(&self, method: &str) -> PathBuf {
        self.root.join("reports").join(format!("{method}.json"))
    }

    pub fn comparison(&self) -> PathBuf {
        self.root.join("reports/comparison.txt")
    }
}

/// Checkpoint directory names, in evaluation order, with their report names.
pub const METHOD_CHECKPOINTS: &[(&str, &str)] = &[
    ("post-mcp", "mcp-only"),
    ("post-selftrain", "full"),
    ("simple-match", "simple-match"),
    ("simple-match-selftrain", "simple-match-selftrain"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub fingerprint: String,
    pub status: StageStatus,
    /// Path relative to the output directory -> sha256 of the artifact.
    pub artifacts: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub seed: u64,
    pub dataset: String,
    pub backend: String,
    pub stages: BTreeMap<String, StageRecord>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn fingerprint(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    hex::encode(h.finalize())
}

/// Digest of a file, or of a checkpoint directory's manifest.
fn artifact_digest(path: &Path) -> Result<String> {
    let file = if path.is_dir() { path.join("manifest.json") } else { path.to_path_buf() };
    let bytes = fs::read(&file).map_err(|e| Error::io(&file, e))?;
    Ok(sha256_hex(&bytes))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("serializable")
}

fn require(path: &Path, producer: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingArtifact {
            path: path.to_path_buf(),
            producer: producer.to_string(),
        })
    }
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub vocabulary: CategoryVocabulary,
    pub indicative: usize,
    pub trace: Option<StTrace>,
    pub reports: Vec<EvalReport>,
}

impl RunSummary {
    pub fn report(&self, method: &str) -> Option<&EvalReport> {
        self.reports.iter().find(|r| r.method == method)
    }
}

#[allow(clippy::large_enum_variant)]
enum Miner {
    Transformer(TransformerLm),
    Stub(StubLm),
}

/// A configured run: data, label names and the artifact store.
pub struct Pipeline {
    config: PipelineConfig,
    hp: Hyperparameters,
    layout: Layout,
    names: LabelNameSet,
    train: Corpus,
    test: Option<Corpus>,
    manifest: RunManifest,
    tokenized: HashMap<String, (TokenizedCorpus, Option<TokenizedCorpus>)>,
}

impl Pipeline {
    /// Validates the config and loads the data; no model work happens here.
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        let config = config.effective()?;
        let hp = config.hyperparameters()?;
        let (train, test, synthetic_names) = match config.dataset.synthetic_specs(config.seed) {
            Some((tr, te)) => (
                make_synthetic(&tr, Split::Train)?.corpus,
                Some(make_synthetic(&te, Split::Test)?.corpus),
                Some(tr.label_names()),
            ),
            None => {
                let DatasetSpec::Files {
                    format,
                    train,
                    test,
                    num_classes,
                    ..
                } = &config.dataset
                else {
                    unreachable!("non-synthetic datasets are files")
                };
                let tr = load_benchmark(train, *format, *num_classes, Split::Train)?;
                let te = test
                    .as_ref()
                    .map(|t| load_benchmark(t, *format, Some(tr.num_classes()), Split::Test))
                    .transpose()?;
                (tr, te, None)
            }
        };
        let names = match (&config.label_names, synthetic_names) {
            (Some(p), _) => LabelNameSet::load(p)?,
            (None, Some(n)) => n,
            (None, None) => return Err(Error::Config("label_names is required".into())),
        };
        if names.num_classes() != train.num_classes() {
            return Err(Error::Config(format!(
                "{} label-name classes but the corpus has {} classes",
                names.num_classes(),
                train.num_classes()
            )));
        }
        let layout = Layout::new(&config.output_dir);
        fs::create_dir_all(layout.root()).map_err(|e| Error::io(layout.root(), e))?;
        let fresh = RunManifest {
            format_version: RUN_MANIFEST_VERSION,
            seed: config.seed,
            dataset: config.dataset.name().to_string(),
            backend: backend_name(&config.backend).to_string(),
            stages: BTreeMap::new(),
        };
        let manifest = match fs::read_to_string(layout.manifest()) {
            Ok(text) => match serde_json::from_str::<RunManifest>(&text) {
                Ok(m) if m.format_version == RUN_MANIFEST_VERSION => m,
                _ => {
                    warn!("ignoring unreadable run manifest in {}", layout.root().display());
                    fresh
                }
            },
            Err(_) => fresh,
        };
        write_file(&layout.config(), config.to_toml())?;
        write_file(&layout.label_names(), names.to_file_string())?;
        Ok(Pipeline {
            config,
            hp,
            layout,
            names,
            train,
            test,
            manifest,
            tokenized: HashMap::new(),
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn hyperparameters(&self) -> &Hyperparameters {
        &self.hp
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn label_names(&self) -> &LabelNameSet {
        &self.names
    }

    pub fn train_corpus(&self) -> &Corpus {
        &self.train
    }

    pub fn test_corpus(&self) -> Option<&Corpus> {
        self.test.as_ref()
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    fn seed(&self) -> u64 {
        self.config.seed
    }

    fn num_classes(&self) -> usize {
        self.names.num_classes()
    }

    /// Train and test splits encoded with `tokenizer`, memoized per vocabulary.
    fn tokenize(&mut self, tokenizer: &WordPiece) -> (&TokenizedCorpus, Option<&TokenizedCorpus>) {
        let key = sha256_hex(tokenizer.to_vocab_string().as_bytes());
        let max = self.hp.max_seq_len;
        let (train, test) = (&self.train, &self.test);
        let entry = self.tokenized.entry(key).or_insert_with(|| {
            (
                TokenizedCorpus::new(train.unlabeled(), tokenizer, max),
                test.as_ref().map(|t| TokenizedCorpus::new(t.unlabeled(), tokenizer, max)),
            )
        });
        (&entry.0, entry.1.as_ref())
    }

    fn rel(&self, path: &Path) -> String {
        path.strip_prefix(self.layout.root())
            .unwrap_or(path)
            .to_string_lossy()
            .replace('\\', "/")
    }

    fn is_cached(&self, stage: &str, key: &str) -> bool {
        let Some(rec) = self.manifest.stages.get(stage) else {
            return false;
        };
        rec.status == StageStatus::Done
            && rec.fingerprint == key
            && rec.artifacts.iter().all(|(rel, digest)| {
                artifact_digest(&self.layout.root().join(rel)).is_ok_and(|d| &d == digest)
            })
    }

    fn save_manifest(&self) -> Result<()> {
        write_file(&self.layout.manifest(), serde_json::to_string_pretty(&self.manifest)? + "\n")
    }

    fn record(&mut self, stage: &str, key: &str, artifacts: &[PathBuf]) -> Result<()> {
        let mut map = BTreeMap::new();
        for a in artifacts {
            map.insert(self.rel(a), artifact_digest(a)?);
        }
        self.manifest.stages.insert(
            stage.to_string(),
            StageRecord {
                fingerprint: key.to_string(),
                status: StageStatus::Done,
                artifacts: map,
                error: None,
            },
        );
        self.save_manifest()
    }

    /// Runs `f` as stage `stage`; failures leave a marker file and a failed
    /// manifest entry next to whatever artifacts were already written.
    fn stage<T>(&mut self, stage: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        match f(self) {
            Ok(v) => Ok(v),
            Err(e) => {
                let message = e.to_string();
                let _ = write_file(&self.layout.failed_marker(), format!("{stage}\n{message}\n"));
                let fingerprint = self
                    .manifest
                    .stages
                    .get(stage)
                    .map(|r| r.fingerprint.clone())
                    .unwrap_or_default();
                self.manifest.stages.insert(
                    stage.to_string(),
                    StageRecord {
                        fingerprint,
                        status: StageStatus::Failed,
                        artifacts: BTreeMap::new(),
                        error: Some(message),
                    },
                );
                let _ = self.save_manifest();
                Err(Error::Stage {
                    stage: stage.to_string(),
                    source: Box::new(e),
                })
            }
        }
    }

    fn base_key(&self) -> String {
        let pretraining = match self.config.backend {
            BackendSpec::Tiny { .. } => json(&self.config.pretraining),
            _ => String::new(),
        };
        fingerprint(&[
            "base",
            &json(&self.config.dataset),
            &self.names.to_file_string(),
            &json(&self.config.backend),
            &pretraining,
            &self.seed().to_string(),
            &self.hp.max_seq_len.to_string(),
        ])
    }

    /// The model all stages start from: the tiny transformer after MLM
    /// pretraining, or the externally supplied weights. Pretrained tiny models
    /// are shared across runs through the cache root.
    pub fn base_model(&mut self) -> Result<TransformerLm> {
        let key = self.base_key();
        let dir = self.layout.checkpoint("base");
        if self.is_cached("base", &key) {
            info!("base: reusing {}", dir.display());
            return TransformerLm::load(&dir);
        }
        let cached = self.config.cache_root().join(format!("base-{}", &key[..16]));
        let lm = match TransformerLm::load(&cached) {
            Ok(lm) => {
                info!("base: loaded from cache {}", cached.display());
                lm
            }
            Err(_) => {
                let lm = self.build_base()?;
                if let Some(parent) = cached.parent() {
                    fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
                }
                lm.save(&cached)?;
                lm
            }
        };
        fs::create_dir_all(dir.parent().unwrap()).map_err(|e| Error::io(&dir, e))?;
        lm.save(&dir)?;
        self.record("base", &key, &[dir])?;
        Ok(lm)
    }

    fn build_base(&mut self) -> Result<TransformerLm> {
        let k = self.num_classes();
        match self.config.backend.clone() {
            BackendSpec::Tiny { vocab_size } => {
                let wp = WordPiece::build(self.train.unlabeled().texts(), 1, vocab_size);
                let mut lm = TransformerLm::tiny(wp.clone(), k, self.hp.max_seq_len, self.seed());
                let settings = self.config.pretraining.clone();
                let seed = self.seed();
                let (train, _) = self.tokenize(&wp);
                info!(
                    "base: pretraining tiny MLM ({} epochs, vocabulary {})",
                    settings.epochs,
                    wp.vocab_size()
                );
                let losses = lm.pretrain_mlm(train, &settings, seed)?;
                if let Some(last) = losses.last() {
                    info!("base: final MLM loss {last:.4}");
                }
                Ok(lm)
            }
            BackendSpec::Pretrained { path } => TransformerLm::load_pretrained(&path, k, self.seed()),
            BackendSpec::Stub { .. } => Err(Error::Unsupported {
                backend: "stub".into(),
                operation: "training".into(),
            }),
        }
    }

    fn stub_model(&self, table: &Path) -> Result<StubLm> {
        let text = fs::read_to_string(table).map_err(|e| Error::io(table, e))?;
        let lists: BTreeMap<String, Vec<String>> = serde_json::from_str(&text)?;
        let wp = WordPiece::build(self.train.unlabeled().texts(), 1, usize::MAX);
        let mut stub = StubLm::new(wp);
        for (word, list) in &lists {
            let words: Vec<&str> = list.iter().map(String::as_str).collect();
            stub.program_word(word, ranked(&words));
        }
        Ok(stub)
    }

    fn miner(&mut self) -> Result<Miner> {
        match self.config.backend.clone() {
            BackendSpec::Stub { table } => Ok(Miner::Stub(self.stub_model(&table)?)),
            _ => Ok(Miner::Transformer(self.base_model()?)),
        }
    }

    fn miner_key(&self) -> Result<String> {
        match &self.config.backend {
            BackendSpec::Stub { table } => Ok(fingerprint(&["stub", &artifact_digest(table)?, &json(&self.config.dataset)])),
            _ => Ok(self.base_key()),
        }
    }

    /// Category vocabulary mined from label-name occurrences.
    pub fn stage_vocab(&mut self) -> Result<CategoryVocabulary> {
        self.stage("vocab", |p| {
            let hp = &p.hp;
            let key = fingerprint(&[
                "vocab",
                &p.miner_key()?,
                &hp.top_k_replacement.to_string(),
                &hp.vocab_size_per_class.to_string(),
                &hp.filter_before_cut.to_string(),
            ]);
            let path = p.layout.vocab();
            if p.is_cached("vocab", &key) {
                info!("vocab: cached artifact {} is current, skipping", path.display());
                return CategoryVocabulary::load(&path);
            }
            let vocab = match p.miner()? {
                Miner::Transformer(lm) => p.mine(&lm)?,
                Miner::Stub(stub) => p.mine(&stub)?,
            };
            write_file(&path, vocab.to_json())?;
            write_file(&p.layout.vocab_table(), vocab.to_table(20))?;
            info!(
                "vocab: {} words in total, per class {:?}",
                vocab.classes.iter().map(|c| c.entries.len()).sum::<usize>(),
                vocab.classes.iter().map(|c| c.entries.len()).collect::<Vec<_>>()
            );
            let table = p.layout.vocab_table();
            p.record("vocab", &key, &[path, table])?;
            Ok(vocab)
        })
    }

    fn mine<M: MaskedLm>(&mut self, lm: &M) -> Result<CategoryVocabulary> {
        let name = self.train.name().to_string();
        let names = self.names.clone();
        let hp = self.hp.clone();
        let (train, _) = self.tokenize(lm.tokenizer());
        let reps = collect_replacements(train, &names, lm, &hp)?;
        rank_category_vocabulary(&reps, &names, &hp, &name)
    }

    /// Category-indicative word occurrences. `vocab_file` defaults to the
    /// run's own vocabulary export.
    pub fn stage_detect(&mut self, vocab_file: Option<&Path>) -> Result<IndicativeWordSet> {
        let vocab_path = vocab_file.map(Path::to_path_buf).unwrap_or_else(|| self.layout.vocab());
        require(&vocab_path, "lotpipe vocab")?;
        self.stage("detect", |p| {
            let hp = &p.hp;
            let key = fingerprint(&[
                "detect",
                &p.miner_key()?,
                &artifact_digest(&vocab_path)?,
                &hp.top_k_replacement.to_string(),
                &hp.indicative_threshold.to_string(),
                &hp.skip_stopword_positions.to_string(),
            ]);
            let path = p.layout.sind();
            let vocab = CategoryVocabulary::load(&vocab_path)?;
            let miner = if p.is_cached("detect", &key) { None } else { Some(p.miner()?) };
            let hp = p.hp.clone();
            let s_ind = match &miner {
                None => {
                    info!("detect: cached artifact {} is current, skipping", path.display());
                    let tokenizer = p.mining_tokenizer()?;
                    let (train, _) = p.tokenize(&tokenizer);
                    return IndicativeWordSet::load(&path, train);
                }
                Some(Miner::Transformer(lm)) => {
                    let (train, _) = p.tokenize(lm.tokenizer());
                    detect_indicative(train, &vocab, lm, &hp)?
                }
                Some(Miner::Stub(stub)) => {
                    let (train, _) = p.tokenize(stub.tokenizer());
                    detect_indicative(train, &vocab, stub, &hp)?
                }
            };
            info!(
                "detect: {} indicative occurrences, per class {:?}",
                s_ind.len(),
                s_ind.class_counts(p.num_classes())
            );
            write_file(&path, s_ind.to_tsv())?;
            p.record("detect", &key, &[path])?;
            Ok(s_ind)
        })
    }

    fn mining_tokenizer(&mut self) -> Result<WordPiece> {
        match self.miner()? {
            Miner::Transformer(lm) => Ok(lm.tokenizer().clone()),
            Miner::Stub(stub) => Ok(stub.tokenizer().clone()),
        }
    }

    /// Masked category prediction from the base model. `sind_file` defaults
    /// to the run's own detection output.
    pub fn stage_mcp(&mut self, sind_file: Option<&Path>) -> Result<TransformerLm> {
        let sind_path = sind_file.map(Path::to_path_buf).unwrap_or_else(|| self.layout.sind());
        require(&sind_path, "lotpipe detect")?;
        self.stage("mcp", |p| {
            let hp = &p.hp;
            let key = fingerprint(&[
                "mcp",
                &p.base_key(),
                &artifact_digest(&sind_path)?,
                &hp.batch_size.to_string(),
                &hp.lr_mcp.to_string(),
                &hp.mcp_epochs.to_string(),
                &hp.warmup_fraction.to_string(),
            ]);
            let dir = p.layout.checkpoint("post-mcp");
            if p.is_cached("mcp", &key) {
                info!("mcp: cached checkpoint {} is current, skipping", dir.display());
                return TransformerLm::load(&dir);
            }
            let mut lm = p.base_model()?;
            lm.init_classifier(p.num_classes(), p.seed());
            let (seed, hp) = (p.seed(), p.hp.clone());
            let tokenizer = lm.tokenizer().clone();
            let (train, _) = p.tokenize(&tokenizer);
            let s_ind = IndicativeWordSet::load(&sind_path, train)?;
            let trace = mcp_train(&s_ind, train, &mut lm, &hp, seed)?;
            info!("mcp: epoch mean losses {:?}", trace.epoch_means);
            lm.save(&dir)?;
            let trace_path = p.layout.mcp_trace();
            let text: String = trace
                .batch_losses
                .iter()
                .enumerate()
                .map(|(i, l)| format!("{i}\t{l}\n"))
                .collect();
            write_file(&trace_path, text)?;
            p.record("mcp", &key, &[dir, trace_path])?;
            Ok(lm)
        })
    }

    /// Self-training from `from` (default: the post-MCP checkpoint).
    pub fn stage_selftrain(&mut self, from: Option<&Path>) -> Result<(TransformerLm, StTrace)> {
        let from = from.map(Path::to_path_buf).unwrap_or_else(|| self.layout.checkpoint("post-mcp"));
        require(&from.join("manifest.json"), "lotpipe mcp")?;
        self.stage("selftrain", |p| {
            let key = p.selftrain_key("selftrain", &from)?;
            let dir = p.layout.checkpoint("post-selftrain");
            let trace_path = p.layout.st_trace();
            if p.is_cached("selftrain", &key) {
                info!("selftrain: cached checkpoint {} is current, skipping", dir.display());
                return Ok((TransformerLm::load(&dir)?, StTrace::load(&trace_path)?));
            }
            let mut lm = TransformerLm::load(&from)?;
            let trace = p.self_train_model(&mut lm)?;
            lm.save(&dir)?;
            trace.save(&trace_path)?;
            let plot_path = p.layout.st_plot();
            write_file(&plot_path, plot::trace_svg(&trace, p.hp.st_update_interval))?;
            let windows = crate::selftrain::windows_path(&trace_path);
            p.record("selftrain", &key, &[dir, trace_path, windows, plot_path])?;
            Ok((lm, trace))
        })
    }

    fn selftrain_key(&self, stage: &str, from: &Path) -> Result<String> {
        let hp = &self.hp;
        Ok(fingerprint(&[
            stage,
            &artifact_digest(from)?,
            &json(&(
                hp.batch_size,
                hp.lr_selftrain,
                hp.st_epochs,
                hp.st_update_interval,
                hp.st_strategy,
                hp.hard_threshold,
                hp.warmup_fraction,
            )),
            &self.seed().to_string(),
            &self.config.stages.trace_accuracy.to_string(),
        ]))
    }

    fn self_train_model(&mut self, lm: &mut TransformerLm) -> Result<StTrace> {
        let (seed, hp, k) = (self.seed(), self.hp.clone(), self.num_classes());
        let trace_accuracy = self.config.stages.trace_accuracy;
        let gold = self.test.as_ref().and_then(Corpus::gold_labels);
        let tokenizer = lm.tokenizer().clone();
        let (train, test) = self.tokenize(&tokenizer);
        let monitor = |m: &TransformerLm| -> f64 {
            let (Some(test), Some(gold)) = (test, gold.as_ref()) else {
                return f64::NAN;
            };
            EvalReport::from_predictions("trace", &m.predict_many(test.sequences()), gold, k)
                .map(|r| r.accuracy)
                .unwrap_or(f64::NAN)
        };
        let use_monitor = trace_accuracy && test.is_some() && gold.is_some();
        let trace = self_train(train, lm, &hp, seed, use_monitor.then_some(&monitor as &dyn Fn(&TransformerLm) -> f64))?;
        let decreasing = trace.window_decreases(hp.st_update_interval);
        info!(
            "selftrain: {} steps, {}/{} windows with decreasing loss",
            trace.records.len(),
            decreasing.iter().filter(|&&d| d).count(),
            decreasing.len()
        );
        Ok(trace)
    }

    /// Label-name matching baseline (optionally self-trained) and the
    /// supervised reference runs enabled in the stage toggles.
    pub fn stage_baselines(&mut self) -> Result<()> {
        let toggles = self.config.stages.clone();
        if toggles.simple_match {
            self.stage("simple-match", |p| {
                let hp = &p.hp;
                let key = fingerprint(&[
                    "simple-match",
                    &p.base_key(),
                    &json(&toggles.multi_match),
                    &json(&(hp.batch_size, hp.lr_mcp, hp.mcp_epochs, hp.warmup_fraction)),
                ]);
                let dir = p.layout.checkpoint("simple-match");
                if p.is_cached("simple-match", &key) {
                    info!("simple-match: cached checkpoint is current, skipping");
                    return Ok(());
                }
                let mut lm = p.base_model()?;
                lm.init_classifier(p.num_classes(), p.seed());
                let (seed, hp, names) = (p.seed(), p.hp.clone(), p.names.clone());
                let tokenizer = lm.tokenizer().clone();
                let (train, _) = p.tokenize(&tokenizer);
                let labels = simple_match_labels(train, &names, toggles.multi_match);
                info!("simple-match: {} pseudo-labeled documents", labels.len());
                train_on_labels(train, &labels, &mut lm, &hp, hp.mcp_epochs, seed)?;
                lm.set_stage(Stage::PostSupervised);
                lm.save(&dir)?;
                p.record("simple-match", &key, &[dir])
            })?;
        }
        if toggles.simple_match && toggles.simple_match_selftrain {
            self.stage("simple-match-selftrain", |p| {
                let from = p.layout.checkpoint("simple-match");
                let key = p.selftrain_key("simple-match-selftrain", &from)?;
                let dir = p.layout.checkpoint("simple-match-selftrain");
                if p.is_cached("simple-match-selftrain", &key) {
                    info!("simple-match-selftrain: cached checkpoint is current, skipping");
                    return Ok(());
                }
                let mut lm = TransformerLm::load(&from)?;
                let trace = p.self_train_model(&mut lm)?;
                lm.save(&dir)?;
                let trace_path = p.layout.root().join("traces/simple-match-selftrain.tsv");
                write_file(&trace_path, "")?;
                trace.save(&trace_path)?;
                p.record("simple-match-selftrain", &key, &[dir, trace_path])
            })?;
        }
        for &n in &toggles.supervised {
            let stage = format!("supervised-n{n}");
            self.stage(&stage.clone(), |p| {
                let hp = &p.hp;
                let key = fingerprint(&[
                    &stage,
                    &p.base_key(),
                    &json(&(hp.batch_size, hp.lr_mcp, toggles.supervised_epochs, hp.warmup_fraction)),
                ]);
                let dir = p.layout.checkpoint(&stage);
                if p.is_cached(&stage, &key) {
                    info!("{stage}: cached checkpoint is current, skipping");
                    return Ok(());
                }
                let mut lm = p.base_model()?;
                lm.init_classifier(p.num_classes(), p.seed());
                let (seed, hp) = (p.seed(), p.hp.clone());
                let tokenizer = lm.tokenizer().clone();
                let corpus = p.train.clone();
                let (train, _) = p.tokenize(&tokenizer);
                train_supervised(&corpus, train, &mut lm, n, &hp, toggles.supervised_epochs, seed)?;
                lm.save(&dir)?;
                p.record(&stage, &key, &[dir])
            })?;
        }
        Ok(())
    }

    /// Test-set reports. With `checkpoint` only that model is evaluated;
    /// otherwise every method checkpoint present in the run.
    pub fn stage_eval(&mut self, checkpoint: Option<&Path>) -> Result<Vec<EvalReport>> {
        let mut targets: Vec<(String, PathBuf)> = Vec::new();
        match checkpoint {
            Some(dir) => {
                require(&dir.join("manifest.json"), "lotpipe mcp` or `lotpipe selftrain")?;
                let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                let method = METHOD_CHECKPOINTS
                    .iter()
                    .find(|(ck, _)| *ck == name)
                    .map_or(name.clone(), |(_, m)| m.to_string());
                targets.push((method, dir.to_path_buf()));
            }
            None => {
                for (ck, method) in METHOD_CHECKPOINTS {
                    let dir = self.layout.checkpoint(ck);
                    if dir.join("manifest.json").exists() {
                        targets.push((method.to_string(), dir));
                    }
                }
                if targets.iter().all(|(m, _)| m != "mcp-only" && m != "full") {
                    return Err(Error::MissingArtifact {
                        path: self.layout.checkpoint("post-selftrain"),
                        producer: "lotpipe mcp` or `lotpipe selftrain".into(),
                    });
                }
                for &n in &self.config.stages.supervised.clone() {
                    let dir = self.layout.checkpoint(&format!("supervised-n{n}"));
                    if dir.join("manifest.json").exists() {
                        targets.push((format!("supervised-n{n}"), dir));
                    }
                }
            }
        }
        self.stage("eval", |p| {
            let test = p
                .test
                .clone()
                .ok_or_else(|| Error::Config("the dataset has no test split".into()))?;
            let mut reports = Vec::new();
            let mut written = Vec::new();
            for (method, dir) in &targets {
                let lm = TransformerLm::load(dir)?;
                let (_, tokenized) = p.tokenize(lm.tokenizer());
                let tokenized = tokenized.expect("test split present");
                let report = evaluate(method, &lm, &test, tokenized)?
                    .with_meta("seed", p.seed())
                    .with_meta("dataset", p.config.dataset.name())
                    .with_meta("backend", backend_name(&p.config.backend))
                    .with_meta("stage", lm.stage().as_str())
                    .with_meta("checkpoint", p.rel(dir))
                    .with_meta("hyperparameters", json(&p.hp));
                info!("eval: {method} accuracy {:.4}", report.accuracy);
                let path = p.layout.report(method);
                write_file(&path, report.to_json())?;
                written.push(path);
                reports.push(report);
            }
            let table = p.layout.comparison();
            write_file(&table, comparison_table(&reports))?;
            written.push(table);
            let key = fingerprint(&written.iter().map(|w| p.rel(w)).collect::<Vec<_>>().iter().map(String::as_str).collect::<Vec<_>>());
            p.record("eval", &key, &written)?;
            Ok(reports)
        })
    }

    /// Every enabled stage in order, reusing current cached artifacts.
    pub fn run(&mut self) -> Result<RunSummary> {
        let _ = fs::remove_file(self.layout.failed_marker());
        let vocabulary = self.stage_vocab()?;
        let s_ind = self.stage_detect(None)?;
        let toggles = self.config.stages.clone();
        if toggles.mcp {
            self.stage_mcp(None)?;
        }
        let mut trace = None;
        if toggles.selftrain {
            trace = Some(self.stage_selftrain(None)?.1);
        }
        if toggles.simple_match || !toggles.supervised.is_empty() {
            self.stage_baselines()?;
        }
        let reports = if toggles.evaluate && (toggles.mcp || toggles.selftrain) {
            self.stage_eval(None)?
        } else {
            Vec::new()
        };
        Ok(RunSummary {
            output_dir: self.layout.root().to_path_buf(),
            vocabulary,
            indicative: s_ind.len(),
            trace,
            reports,
        })
    }
}

fn backend_name(b: &BackendSpec) -> &'static str {
    match b {
        BackendSpec::Tiny { .. } => "tiny",
        BackendSpec::Pretrained { .. } => "pretrained",
        BackendSpec::Stub { .. } => "stub",
    }
}

/// Validates `config`, then runs every enabled stage.
pub fn run_pipeline(config: PipelineConfig) -> Result<RunSummary> {
    Pipeline::new(config)?.run()
}

/// Class distribution and argmax for each raw text line.
pub fn predict_texts(lm: &TransformerLm, lines: &[String], max_seq_len: usize) -> Vec<(usize, Vec<f64>)> {
    let seqs: Vec<_> = lines.iter().map(|l| lm.tokenizer().encode(l, max_seq_len)).collect();
    lm.predict_many(&seqs)
        .into_iter()
        .map(|p| {
            let best = p
                .iter()
                .enumerate()
                .fold(0, |b, (i, v)| if *v > p[b] { i } else { b });
            (best, p)
        })
        .collect()
}
