use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::model::{Model, ModelConfig};
use super::optim::Adam;
use super::transformer::{BackendKind, Freeze, Stage, TransformerLm};
use crate::corpus::WordPiece;
use crate::error::{Error, Result};

fn io(path: &Path, e: std::io::Error) -> Error {
    Error::io(path, e)
}

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

const MANIFEST: &str = "manifest.json";
const VOCAB: &str = "vocab.txt";
const PARAMS: &str = "params.bin";
const OPTIMIZER: &str = "optimizer.bin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub backend: BackendKind,
    pub stage: Stage,
    pub step: u64,
    pub seed: u64,
    pub freeze: Freeze,
    pub config: ModelConfig,
    /// File name -> hex SHA-256.
    pub files: BTreeMap<String, String>,
}

impl CheckpointManifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| io(&path, e))?;
        #[derive(Deserialize)]
        struct Version {
            format_version: u32,
        }
        let v: Version = serde_json::from_str(&text)
            .map_err(|e| Error::CorruptCheckpoint(format!("{}: {e}", path.display())))?;
        if v.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                expected: CHECKPOINT_FORMAT_VERSION,
                found: v.format_version,
            });
        }
        serde_json::from_str(&text).map_err(|e| Error::CorruptCheckpoint(format!("{}: {e}", path.display())))
    }
}

fn f64_bytes(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn bytes_f64(bytes: &[u8], name: &str) -> Result<Vec<f64>> {
    if !bytes.len().is_multiple_of(8) {
        return Err(Error::CorruptCheckpoint(format!("{name} is not a whole number of f64 values")));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl TransformerLm {
    /// Writes the model, tokenizer and optimizer state to directory `dir`,
    /// replacing any previous checkpoint there.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let blobs: Vec<(&str, Vec<u8>)> = vec![
            (VOCAB, self.tokenizer.to_vocab_string().into_bytes()),
            (PARAMS, f64_bytes(&self.model.params)),
            (
                OPTIMIZER,
                f64_bytes(&[self.optimizer.m.as_slice(), self.optimizer.v.as_slice()].concat()),
            ),
        ];
        let manifest = CheckpointManifest {
            format_version: CHECKPOINT_FORMAT_VERSION,
            backend: self.kind,
            stage: self.stage,
            step: self.optimizer.step,
            seed: self.seed,
            freeze: self.freeze,
            config: self.model.cfg.clone(),
            files: blobs.iter().map(|(n, b)| (n.to_string(), sha256_hex(b))).collect(),
        };
        let staging = dir.with_extension("partial");
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(|e| io(&staging, e))?;
        }
        fs::create_dir_all(&staging).map_err(|e| io(&staging, e))?;
        for (name, bytes) in &blobs {
            let p = staging.join(name);
            fs::write(&p, bytes).map_err(|e| io(&p, e))?;
        }
        let p = staging.join(MANIFEST);
        fs::write(&p, serde_json::to_string_pretty(&manifest)? + "\n").map_err(|e| io(&p, e))?;
        if dir.exists() {
            fs::remove_dir_all(dir).map_err(|e| io(dir, e))?;
        }
        fs::rename(&staging, dir).map_err(|e| io(dir, e))
    }

    /// Reads a checkpoint written by [`TransformerLm::save`]. Every blob is
    /// verified against the manifest digest before anything is built.
    pub fn load(dir: &Path) -> Result<Self> {
        let manifest = CheckpointManifest::read(dir)?;
        let mut blobs = BTreeMap::new();
        for name in [VOCAB, PARAMS, OPTIMIZER] {
            let expected = manifest
                .files
                .get(name)
                .ok_or_else(|| Error::CorruptCheckpoint(format!("manifest lacks {name}")))?;
            let p = dir.join(name);
            let bytes = fs::read(&p).map_err(|e| io(&p, e))?;
            if &sha256_hex(&bytes) != expected {
                return Err(Error::CorruptCheckpoint(format!("{} digest mismatch", p.display())));
            }
            blobs.insert(name, bytes);
        }
        let vocab = String::from_utf8(blobs.remove(VOCAB).unwrap())
            .map_err(|_| Error::CorruptCheckpoint("vocab.txt is not UTF-8".into()))?;
        let tokenizer = WordPiece::from_vocab(vocab.lines().map(str::to_string).collect())?;
        let params = bytes_f64(&blobs[PARAMS], PARAMS)?;
        let model = Model::from_params(manifest.config.clone(), params)
            .ok_or_else(|| Error::CorruptCheckpoint("parameter count does not match config".into()))?;
        let opt = bytes_f64(&blobs[OPTIMIZER], OPTIMIZER)?;
        if opt.len() != 2 * model.params.len() {
            return Err(Error::CorruptCheckpoint("optimizer state size does not match config".into()));
        }
        let mut optimizer = Adam::new(model.params.len());
        optimizer.m.copy_from_slice(&opt[..model.params.len()]);
        optimizer.v.copy_from_slice(&opt[model.params.len()..]);
        optimizer.step = manifest.step;
        TransformerLm::assemble(
            manifest.backend,
            tokenizer,
            model,
            optimizer,
            manifest.stage,
            manifest.freeze,
            manifest.seed,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::{Supervision, TrainExample};

    fn model() -> TransformerLm {
        let wp = WordPiece::build(["the team won the game", "shares fell"], 1, 100);
        let mut lm = TransformerLm::tiny(wp, 2, 16, 5);
        let seq = lm.tokenizer.encode("the team won", 16);
        let batch = vec![TrainExample {
            tokens: seq.token_ids,
            supervision: Supervision::Class { position: 0, class: 1 },
        }];
        lm.train_step(&batch, 1e-3).unwrap();
        lm.set_stage(Stage::PostMcp);
        lm
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let lm = model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt");
        lm.save(&path).unwrap();
        let back = TransformerLm::load(&path).unwrap();
        assert_eq!(back, lm);
        let seq = lm.tokenizer.encode("shares fell", 16);
        assert_eq!(back.predict_proba(&seq), lm.predict_proba(&seq));
        assert_eq!(back.stage(), Stage::PostMcp);
    }

    #[test]
    fn version_mismatch_names_both_versions() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt");
        model().save(&path).unwrap();
        let m = path.join(MANIFEST);
        let text = fs::read_to_string(&m).unwrap().replace("\"format_version\": 1", "\"format_version\": 7");
        fs::write(&m, text).unwrap();
        let err = TransformerLm::load(&path).unwrap_err();
        assert!(matches!(err, Error::VersionMismatch { expected: 1, found: 7 }));
        assert!(err.to_string().contains('7') && err.to_string().contains('1'));
    }

    #[test]
    fn corrupt_blob_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt");
        model().save(&path).unwrap();
        let p = path.join(PARAMS);
        let mut bytes = fs::read(&p).unwrap();
        bytes[3] ^= 0xff;
        fs::write(&p, bytes).unwrap();
        assert!(matches!(TransformerLm::load(&path), Err(Error::CorruptCheckpoint(_))));
    }
}
