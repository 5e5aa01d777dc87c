//! Declarative experiments: TOML specs, seeded batch runs with CSV/JSON
//! artifacts and a manifest, SVG plots and the replication suites.

mod plot;
mod replicate;
mod run;
mod spec;

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use plot::{plot, render_curves_svg, render_sweep_svg};
pub use replicate::{replicate, Assertion, ReplicateReport, Suite};
pub use run::{run, run_spec};
pub use spec::{canonical_hash, ExperimentKind, ExperimentSpec, GameSpec, PolicySpec, StageSpec};

/// Environment variable naming the directory runs are written under when a
/// spec has no `output_dir`.
pub const OUTPUT_ROOT_ENV: &str = "FREERIDER_OUTPUT_ROOT";
const DEFAULT_OUTPUT_ROOT: &str = "runs";

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn default_output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT))
}

/// Writes `bytes` to a temp file next to `path` and renames it into place,
/// so readers see either the old file, the complete new one, or nothing.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    // temp files are created owner-only
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file()
            .set_permissions(std::fs::Permissions::from_mode(0o644))
            .map_err(|e| Error::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    /// Some seeds failed; their entries carry the error.
    Partial,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub seed: u64,
    pub ok: bool,
    /// Paths relative to the run directory.
    pub outputs: Vec<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub name: String,
    pub kind: String,
    pub spec_hash: String,
    pub run_dir: PathBuf,
    pub seeds: Vec<SeedRecord>,
    /// Outputs not tied to one seed (summaries, tables), relative paths.
    pub outputs: Vec<PathBuf>,
    pub status: RunStatus,
    /// Set when a deterministic run fails as a whole.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub wall_clock_seconds: f64,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl RunManifest {
    pub fn all_outputs(&self) -> impl Iterator<Item = PathBuf> + '_ {
        self.seeds
            .iter()
            .flat_map(|s| s.outputs.iter())
            .chain(&self.outputs)
            .map(|p| self.run_dir.join(p))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
