//! On-disk formats. `docs/formats.md` describes every grammar.
//!
//! Text formats start with `#! <format-name> v<version>`, followed by
//! `#@ key = value` metadata lines (unknown keys kept in order), then one
//! record per line. Floats are written with 17 significant digits.

mod config;
mod header;
mod json;
mod mirror;
mod records;

pub use config::{
    parse_config_pairs, parse_face_model, parse_scene_config, parse_sweep_spec, write_face_model, ConfigValue, SweepKind, SweepSpec,
};
pub use header::{FileHeader, FORMAT_ESTIMATES, FORMAT_MIRROR, FORMAT_SESSION, FORMAT_TRUTH, FORMAT_VERSION};
pub use json::{parse_profile, parse_screen, profile_to_json, screen_to_json, FORMAT_PROFILE, FORMAT_SCREEN};
pub use mirror::{parse_mirror_dataset, write_mirror_dataset, MirrorDataset};
pub use records::{
    load_replay_estimator, parse_estimates, parse_session, parse_truth, write_estimates, write_session, write_truth, EstimateFile, TruthFile,
};

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IoError {
    #[error("{path}: {message}")]
    File { path: String, message: String },
    #[error("missing `#!` format header")]
    MissingHeader,
    #[error("expected format `{expected}`, found `{found}`")]
    WrongFormat { expected: String, found: String },
    #[error("unsupported format version {found} (this reader supports {supported})")]
    VersionMismatch { found: u32, supported: u32 },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: timestamps of stream `{stream}` are not strictly increasing")]
    Unsorted { line: usize, stream: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("line {line}: unknown unit `{unit}` for `{key}`")]
    Unit { line: usize, key: String, unit: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
}

impl IoError {
    pub(crate) fn malformed(line: usize, message: impl Into<String>) -> Self {
        Self::Malformed { line, message: message.into() }
    }
}

/// 17 significant digits in scientific notation; parses back bit-exactly.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes through a temporary file in the target directory, then renames.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    use std::io::Write;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|e| IoError::File { path: path.display().to_string(), message: e.to_string() })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    atomic_write(path, text.as_bytes()).map_err(|e| IoError::File { path: path.display().to_string(), message: e.to_string() })
}
