//! Document-level self-training on sharpened targets.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::TokenizedCorpus;
use crate::error::{Error, Result};
use crate::lm::{Hyperparameters, LrSchedule, Stage, StStrategy, Supervision, TrainExample, TransformerLm};

/// Row-stochastic `N × K` class distributions, one row per document.
pub type PredictionMatrix = Vec<Vec<f64>>;

/// Targets `Q` with the class frequencies `f` they were derived from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetDistribution {
    pub q: Vec<Vec<f64>>,
    pub f: Vec<f64>,
}

/// Class distribution of every document from its `[CLS]` embedding, in
/// evaluation mode.
pub fn predict_documents(corpus: &TokenizedCorpus, lm: &TransformerLm) -> PredictionMatrix {
    lm.predict_many(corpus.sequences())
}

fn column_sums(p: &[Vec<f64>]) -> Vec<f64> {
    let k = p.first().map_or(0, Vec::len);
    let mut f = vec![0.0; k];
    for row in p {
        for (a, b) in f.iter_mut().zip(row) {
            *a += b;
        }
    }
    f
}

/// `q_ij ∝ p_ij² / f_j` with `f_j = Σ_i p_ij`; a class with `f_j = 0`
/// contributes nothing.
pub fn soft_targets(p: &[Vec<f64>]) -> Result<TargetDistribution> {
    let f = column_sums(p);
    let mut q = Vec::with_capacity(p.len());
    for (i, row) in p.iter().enumerate() {
        if row.len() != f.len() {
            return Err(Error::DimensionMismatch {
                expected: f.len(),
                found: row.len(),
            });
        }
        let w: Vec<f64> = row
            .iter()
            .zip(&f)
            .map(|(&pij, &fj)| if fj > 0.0 { pij * pij / fj } else { 0.0 })
            .collect();
        let z: f64 = w.iter().sum();
        if !(z > 0.0) {
            return Err(Error::ZeroRow { row: i });
        }
        q.push(w.into_iter().map(|v| v / z).collect());
    }
    Ok(TargetDistribution { q, f })
}

/// One-hot rows for entries above `tau`; rows with none are all zero.
pub fn hard_targets(p: &[Vec<f64>], tau: f64) -> TargetDistribution {
    let q = p
        .iter()
        .map(|row| row.iter().map(|&v| if v > tau { 1.0 } else { 0.0 }).collect())
        .collect();
    TargetDistribution { q, f: column_sums(p) }
}

/// `Σ_i Σ_j q_ij ln(q_ij / p_ij)`, with `0 · ln(0/p) = 0`.
pub fn st_loss(q: &[Vec<f64>], p: &[Vec<f64>]) -> Result<f64> {
    if q.len() != p.len() {
        return Err(Error::DimensionMismatch {
            expected: q.len(),
            found: p.len(),
        });
    }
    let mut total = 0.0;
    for (i, (qr, pr)) in q.iter().zip(p).enumerate() {
        if qr.len() != pr.len() {
            return Err(Error::DimensionMismatch {
                expected: qr.len(),
                found: pr.len(),
            });
        }
        for (j, (&qij, &pij)) in qr.iter().zip(pr).enumerate() {
            if qij > 0.0 {
                if pij <= 0.0 {
                    return Err(Error::InfiniteDivergence { row: i, class: j });
                }
                total += qij * (qij / pij).ln();
            }
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    /// Mean loss of the step's batch.
    pub loss: f64,
    pub test_acc: Option<f64>,
}

/// Corpus-level loss against one set of targets: measured right after the
/// refresh at `start` and again after the update at `end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowLoss {
    pub start: usize,
    pub end: usize,
    pub start_loss: f64,
    pub end_loss: f64,
}

/// Per-step self-training loss with sampled test accuracy, plus the
/// corpus-level loss at the ends of every target window.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StTrace {
    pub records: Vec<TraceRecord>,
    pub windows: Vec<WindowLoss>,
}

fn parse_fields(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.split('\t').collect()))
}

fn field<T: std::str::FromStr>(row: usize, name: &str, s: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e| Error::MalformedRow {
        row,
        message: format!("{name}: {e}"),
    })
}

fn check_width(row: usize, f: &[&str], allowed: std::ops::RangeInclusive<usize>) -> Result<()> {
    if allowed.contains(&f.len()) {
        Ok(())
    } else {
        Err(Error::MalformedRow {
            row,
            message: format!("expected {allowed:?} fields, found {}", f.len()),
        })
    }
}

impl StTrace {
    /// `step<TAB>loss[<TAB>test_acc]` lines.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let _ = write!(out, "{}\t{}", r.step, r.loss);
            if let Some(a) = r.test_acc {
                let _ = write!(out, "\t{a}");
            }
            out.push('\n');
        }
        out
    }

    /// `start<TAB>end<TAB>start_loss<TAB>end_loss` lines.
    pub fn windows_tsv(&self) -> String {
        let mut out = String::new();
        for w in &self.windows {
            let _ = writeln!(out, "{}\t{}\t{}\t{}", w.start, w.end, w.start_loss, w.end_loss);
        }
        out
    }

    /// Parses a per-step trace; windows are left empty.
    pub fn parse(text: &str) -> Result<Self> {
        let mut records = Vec::new();
        for (row, f) in parse_fields(text) {
            check_width(row, &f, 2..=3)?;
            records.push(TraceRecord {
                step: field(row, "step", f[0])?,
                loss: field(row, "loss", f[1])?,
                test_acc: f.get(2).map(|s| field(row, "test_acc", s)).transpose()?,
            });
        }
        Ok(StTrace {
            records,
            windows: Vec::new(),
        })
    }

    pub fn parse_windows(text: &str) -> Result<Vec<WindowLoss>> {
        parse_fields(text)
            .map(|(row, f)| {
                check_width(row, &f, 4..=4)?;
                Ok(WindowLoss {
                    start: field(row, "start", f[0])?,
                    end: field(row, "end", f[1])?,
                    start_loss: field(row, "start_loss", f[2])?,
                    end_loss: field(row, "end_loss", f[3])?,
                })
            })
            .collect()
    }

    /// Writes the per-step trace to `path` and the window losses next to it
    /// with a `.windows` suffix.
    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))?;
        let wp = windows_path(path);
        fs::write(&wp, self.windows_tsv()).map_err(|e| Error::io(&wp, e))
    }

    /// Reads a trace written by [`StTrace::save`]; the window file is optional.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut trace = Self::parse(&text)?;
        let wp = windows_path(path);
        if wp.exists() {
            let text = fs::read_to_string(&wp).map_err(|e| Error::io(&wp, e))?;
            trace.windows = Self::parse_windows(&text)?;
        }
        Ok(trace)
    }

    /// For each full window of `interval` steps starting at a target
    /// refresh, whether the loss at its last step is at most the loss at its
    /// first. Uses the corpus-level window losses when recorded, the batch
    /// losses otherwise.
    pub fn window_decreases(&self, interval: usize) -> Vec<bool> {
        if !self.windows.is_empty() {
            return self
                .windows
                .iter()
                .filter(|w| w.end + 1 - w.start == interval)
                .map(|w| w.end_loss <= w.start_loss)
                .collect();
        }
        self.records
            .chunks(interval)
            .filter(|w| w.len() == interval)
            .map(|w| w[interval - 1].loss <= w[0].loss)
            .collect()
    }
}

pub fn windows_path(trace: &Path) -> PathBuf {
    let mut name = trace.file_name().unwrap_or_default().to_os_string();
    name.push(".windows");
    trace.with_file_name(name)
}

/// Steps between sampled accuracy measurements in the trace.
pub const ACCURACY_EVERY: usize = 10;

/// `st_loss` divided by the number of documents with a non-zero target row.
fn mean_loss(q: &[Vec<f64>], p: &[Vec<f64>]) -> Result<f64> {
    let included = q.iter().filter(|r| r.iter().any(|&v| v > 0.0)).count();
    Ok(st_loss(q, p)? / included.max(1) as f64)
}

fn targets(p: &[Vec<f64>], hp: &Hyperparameters) -> Result<TargetDistribution> {
    match hp.st_strategy {
        StStrategy::Soft => soft_targets(p),
        StStrategy::Hard => Ok(hard_targets(p, hp.hard_threshold)),
    }
}

/// Runs `ceil(N / batch_size) × st_epochs` steps. Every
/// `st_update_interval` steps the model predicts the whole corpus and the
/// targets are recomputed from that snapshot; the corpus-level loss is
/// recorded there and again at the end of each window. `monitor`, when given, is
/// called every [`ACCURACY_EVERY`] steps (and after the last) and its value
/// recorded as test accuracy.
pub fn self_train(
    corpus: &TokenizedCorpus,
    lm: &mut TransformerLm,
    hp: &Hyperparameters,
    seed: u64,
    monitor: Option<&dyn Fn(&TransformerLm) -> f64>,
) -> Result<StTrace> {
    if lm.stage() == Stage::Base {
        return Err(Error::InvalidArgument(
            "self-training needs a trained classifier (stage post-mcp or later)".into(),
        ));
    }
    let n = corpus.len();
    let per_epoch = n.div_ceil(hp.batch_size);
    let total = per_epoch * hp.st_epochs;
    let schedule = LrSchedule {
        peak: hp.lr_selftrain,
        total_steps: total,
        warmup_fraction: hp.warmup_fraction,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = StTrace::default();
    let mut q = Vec::new();
    for step in 0..total {
        if step % per_epoch == 0 {
            order.shuffle(&mut rng);
        }
        if step % hp.st_update_interval == 0 {
            let p = predict_documents(corpus, lm);
            q = targets(&p, hp)
                .map_err(|e| Error::Stage {
                    stage: format!("target refresh at step {step}"),
                    source: Box::new(e),
                })?
                .q;
            trace.windows.push(WindowLoss {
                start: step,
                end: step,
                start_loss: mean_loss(&q, &p)?,
                end_loss: f64::NAN,
            });
        }
        let b = step % per_epoch;
        let batch: Vec<TrainExample> = order[b * hp.batch_size..((b + 1) * hp.batch_size).min(n)]
            .iter()
            .map(|&d| TrainExample {
                tokens: corpus.get(d).token_ids.clone(),
                supervision: Supervision::Soft {
                    position: 0,
                    target: q[d].clone(),
                },
            })
            .collect();
        let lr = schedule.lr(step);
        let loss = lm.train_step(&batch, lr).map_err(|e| match e {
            Error::NonFiniteLoss { .. } => Error::NonFiniteLoss {
                stage: "self-training".into(),
                step,
                lr,
            },
            other => other,
        })?;
        if (step + 1) % hp.st_update_interval == 0 || step + 1 == total {
            let p = predict_documents(corpus, lm);
            let w = trace.windows.last_mut().expect("window opened at refresh");
            w.end = step;
            w.end_loss = mean_loss(&q, &p)?;
        }
        let test_acc = monitor
            .filter(|_| step % ACCURACY_EVERY == 0 || step + 1 == total)
            .map(|m| m(lm));
        trace.records.push(TraceRecord { step, loss, test_acc });
    }
    if total > 0 {
        lm.set_stage(Stage::PostSelftrain);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example() {
        let t = soft_targets(&[vec![0.9, 0.1], vec![0.6, 0.4]]).unwrap();
        assert!((t.f[0] - 1.5).abs() < 1e-12 && (t.f[1] - 0.5).abs() < 1e-12);
        let expect = [[0.9643, 0.0357], [0.4286, 0.5714]];
        for (row, e) in t.q.iter().zip(expect) {
            for (a, b) in row.iter().zip(e) {
                assert!((a - b).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn one_hot_single_document_is_fixed() {
        assert_eq!(soft_targets(&[vec![1.0, 0.0]]).unwrap().q, vec![vec![1.0, 0.0]]);
        assert!(matches!(soft_targets(&[vec![0.0, 0.0]]), Err(Error::ZeroRow { row: 0 })));
    }

    #[test]
    fn not_idempotent() {
        let p = vec![vec![0.7, 0.3], vec![0.6, 0.4], vec![0.2, 0.8]];
        let once = soft_targets(&p).unwrap().q;
        let twice = soft_targets(&once).unwrap().q;
        assert!(once.iter().flatten().zip(twice.iter().flatten()).any(|(a, b)| (a - b).abs() > 1e-3));
    }

    #[test]
    fn hard_rule() {
        assert_eq!(hard_targets(&[vec![0.95, 0.05]], 0.9).q, vec![vec![1.0, 0.0]]);
        assert_eq!(hard_targets(&[vec![0.6, 0.4]], 0.9).q, vec![vec![0.0, 0.0]]);
    }

    #[test]
    fn kl_cases() {
        assert!((st_loss(&[vec![1.0, 0.0]], &[vec![0.5, 0.5]]).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert_eq!(st_loss(&[vec![0.3, 0.7]], &[vec![0.3, 0.7]]).unwrap(), 0.0);
        assert_eq!(st_loss(&[vec![0.0, 0.0]], &[vec![0.5, 0.5]]).unwrap(), 0.0);
        assert!(matches!(
            st_loss(&[vec![0.5, 0.5]], &[vec![1.0, 0.0]]),
            Err(Error::InfiniteDivergence { row: 0, class: 1 })
        ));
    }

    #[test]
    fn trace_round_trip_and_windows() {
        let mut t = StTrace {
            records: (0..7)
                .map(|s| TraceRecord {
                    step: s,
                    loss: [3.0, 2.0, 1.0, 2.0, 2.5, 3.0, 9.0][s],
                    test_acc: (s % 2 == 0).then_some(0.5),
                })
                .collect(),
            windows: Vec::new(),
        };
        assert_eq!(StTrace::parse(&t.to_tsv()).unwrap(), t);
        assert_eq!(t.window_decreases(3), [true, false]);
        t.windows = vec![
            WindowLoss { start: 0, end: 2, start_loss: 1.0, end_loss: 1.5 },
            WindowLoss { start: 3, end: 5, start_loss: 0.5, end_loss: 0.4 },
            WindowLoss { start: 6, end: 6, start_loss: 0.3, end_loss: 0.2 },
        ];
        assert_eq!(t.window_decreases(3), [false, true]);
        assert_eq!(StTrace::parse_windows(&t.windows_tsv()).unwrap(), t.windows);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.tsv");
        t.save(&path).unwrap();
        assert_eq!(StTrace::load(&path).unwrap(), t);
        assert!(StTrace::parse("0\t1.0\t0.5\t9\n").is_err());
    }
}
