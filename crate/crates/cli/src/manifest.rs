//! Per-run manifest: resolved configuration, seeds, versions, file digests
//! and numerical events. It contains nothing time- or host-dependent, so
//! repeated runs produce identical manifests.

use std::path::Path;

use pgp_core::evaluation::{CvResult, METRICS_VERSION};
use pgp_core::Variant;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::Failure;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub format: &'static str,
    pub version: u32,
    pub command: String,
    pub versions: Versions,
    pub config: RunConfig,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub seeds: Vec<SeedRecord>,
    /// Population fits that needed diagonal jitter to factorize.
    pub jitter_events: Vec<JitterEvent>,
}

#[derive(Debug, Serialize)]
pub struct Versions {
    pub pgp: &'static str,
    pub pgp_core: &'static str,
    pub metrics_format: u32,
}

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct SeedRecord {
    pub fold: usize,
    pub variant: Variant,
    pub seed: u64,
}

#[derive(Debug, Serialize)]
pub struct JitterEvent {
    pub fold: usize,
    pub variant: Variant,
    pub jitter: f64,
}

pub fn digest(path: &Path) -> Result<FileDigest, Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
    let hash = Sha256::digest(&bytes);
    Ok(FileDigest {
        path: path.display().to_string(),
        bytes: bytes.len() as u64,
        sha256: hash.iter().map(|b| format!("{b:02x}")).collect(),
    })
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            format: "pgp-manifest",
            version: 1,
            command: command.into(),
            versions: Versions {
                pgp: env!("CARGO_PKG_VERSION"),
                pgp_core: pgp_core::VERSION,
                metrics_format: METRICS_VERSION,
            },
            config: config.clone(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            seeds: Vec::new(),
            jitter_events: Vec::new(),
        }
    }

    pub fn add_inputs(&mut self, paths: &[impl AsRef<Path>]) -> Result<(), Failure> {
        for p in paths {
            self.inputs.push(digest(p.as_ref())?);
        }
        Ok(())
    }

    /// Records files written to `dir`, by name.
    pub fn add_outputs(&mut self, dir: &Path, names: &[String]) -> Result<(), Failure> {
        for name in names {
            let mut d = digest(&dir.join(name))?;
            d.path = name.clone();
            self.outputs.push(d);
        }
        Ok(())
    }

    pub fn add_cv(&mut self, cv: &CvResult) {
        for fold in &cv.folds {
            for m in &fold.fitted {
                self.seeds.push(SeedRecord { fold: fold.fold, variant: m.variant, seed: m.seed });
                if m.jitter > 0.0 {
                    self.jitter_events.push(JitterEvent { fold: fold.fold, variant: m.variant, jitter: m.jitter });
                }
            }
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), Failure> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(dir.join(MANIFEST_FILE), text + "\n")
            .map_err(|e| Failure::input(format!("cannot write manifest in {}: {e}", dir.display())))
    }
}
