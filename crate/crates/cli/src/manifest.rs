//! Run manifest written into every output directory.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use vlasov_core::kernel::MollifierSpec;

use crate::config::hex_digest;
use crate::error::{exit, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

/// One named pass/fail criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: Option<f64>,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Check {
        Check {
            name: name.into(),
            value,
            limit: Some(limit),
            passed: value <= limit,
        }
    }

    pub fn holds(name: impl Into<String>, value: f64, passed: bool) -> Check {
        Check {
            name: name.into(),
            value,
            limit: None,
            passed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum RunState {
    Completed,
    ChecksFailed,
    BlowUp { time: f64, speed: f64, guard: f64 },
    Invalid { message: String },
    Failed { message: String },
}

impl RunState {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunState::Completed => exit::OK,
            RunState::ChecksFailed | RunState::Failed { .. } => exit::CHECK_FAILED,
            RunState::BlowUp { .. } => exit::BLOW_UP,
            RunState::Invalid { .. } => exit::INVALID,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: Option<String>,
    pub sigma_e: Option<i8>,
    pub sigma_b: Option<i8>,
    pub rescale: Option<f64>,
    pub magnetic_ratio: Option<f64>,
    pub mollifier: Option<MollifierSpec>,
    pub seed: Option<u64>,
    pub threads: usize,
    pub state: RunState,
    pub exit_code: i32,
    pub checks: Vec<Check>,
    pub all_passed: bool,
    /// SHA-256 of every file in the run directory except this manifest.
    pub artifacts: BTreeMap<String, String>,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn new(command: &str) -> RunManifest {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_hash: None,
            sigma_e: None,
            sigma_b: None,
            rescale: None,
            magnetic_ratio: None,
            mollifier: None,
            seed: None,
            threads: rayon::current_num_threads(),
            state: RunState::Completed,
            exit_code: exit::OK,
            checks: Vec::new(),
            all_passed: true,
            artifacts: BTreeMap::new(),
            wall_clock_seconds: 0.0,
        }
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<RunManifest> {
        let text = std::fs::read_to_string(dir.as_ref().join(MANIFEST_FILE))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        std::fs::write(
            dir.as_ref().join(MANIFEST_FILE),
            serde_json::to_string_pretty(self)?,
        )?;
        Ok(())
    }
}

fn collect(root: &Path, dir: &Path, out: &mut BTreeMap<String, String>) -> Result<()> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let path = e.path();
        let rel = path
            .strip_prefix(root)
            .expect("entry lies under root")
            .to_string_lossy()
            .replace('\\', "/");
        if e.file_type()?.is_dir() {
            collect(root, &path, out)?;
        } else if rel != MANIFEST_FILE {
            out.insert(rel, hex_digest(&std::fs::read(&path)?));
        }
    }
    Ok(())
}

/// Relative path to SHA-256 of every file under `dir`, excluding the top-level
/// manifest.
pub fn artifact_hashes(dir: impl AsRef<Path>) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let dir = dir.as_ref();
    if dir.is_dir() {
        collect(dir, dir, &mut out)?;
    }
    Ok(out)
}
