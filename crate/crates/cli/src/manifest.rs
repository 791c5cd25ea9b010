//! Run manifests: everything needed to reproduce a run bit-for-bit.

use std::collections::BTreeMap;
use std::path::Path;

use converse_core::model::ModelConfig;
use converse_core::train::TrainConfig;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub argv: Vec<String>,
    pub version: String,
    pub seed: u64,
    /// SHA-256 of the primary corpus file.
    pub corpus_fingerprint: String,
    /// Fingerprints of any additional input files (test/dev corpora,
    /// checkpoints, embeddings).
    pub input_fingerprints: BTreeMap<String, String>,
    pub outdir: String,
    pub model_config: Option<ModelConfig>,
    pub train_config: Option<TrainConfig>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, corpus_fingerprint: String, outdir: &Path) -> Manifest {
        Manifest {
            command: command.to_string(),
            argv: std::env::args().collect(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            corpus_fingerprint,
            input_fingerprints: BTreeMap::new(),
            outdir: outdir.display().to_string(),
            model_config: None,
            train_config: None,
        }
    }

    pub fn write(&self, outdir: &Path) -> Result<(), CliError> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::runtime(format!("manifest serialization: {e}")))?;
        std::fs::write(outdir.join("manifest.json"), json)?;
        Ok(())
    }
}

/// SHA-256 content hash, hex-encoded.
pub fn fingerprint(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for b in digest {
        hex.push_str(&format!("{b:02x}"));
    }
    Ok(hex)
}
