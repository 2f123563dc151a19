//! Output plumbing shared by every subcommand: the run manifest, the
//! CSV number format, and small write helpers.
//!
//! Determinism contract: identical invocations produce byte-identical
//! payloads. The manifest's `timestamp` is the single exception, so
//! nothing else in this module may depend on the clock.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// Record of one CLI run, written as `manifest.json` into the output
/// directory. Every path in `outputs` exists by the time the manifest
/// is on disk.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub parameters: serde_json::Map<String, serde_json::Value>,
    pub outputs: Vec<String>,
    pub timestamp: String,
    pub toolkit_version: String,
}

/// Accumulates output files for one run and writes the manifest last.
pub struct OutDir {
    dir: PathBuf,
    subcommand: String,
    parameters: serde_json::Map<String, serde_json::Value>,
    outputs: Vec<String>,
}

impl OutDir {
    pub fn new(dir: &Path, subcommand: &str) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::failure(format!("cannot create {}: {e}", dir.display())))?;
        Ok(OutDir {
            dir: dir.to_path_buf(),
            subcommand: subcommand.to_string(),
            parameters: serde_json::Map::new(),
            outputs: Vec::new(),
        })
    }

    pub fn record_param(&mut self, key: &str, value: impl Serialize) {
        let value = serde_json::to_value(value).expect("parameter serializes");
        self.parameters.insert(key.to_string(), value);
    }

    /// Writes one output file and records it for the manifest.
    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents)
            .map_err(|e| CliError::failure(format!("cannot write {}: {e}", path.display())))?;
        self.outputs.push(path.display().to_string());
        Ok(path)
    }

    /// Serializes to pretty JSON with a trailing newline and writes it.
    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::failure(format!("serialize {name}: {e}")))?;
        text.push('\n');
        self.write(name, &text)
    }

    /// Records a file another routine already wrote into this directory.
    pub fn record_output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Writes `manifest.json`. Call after every other output is on disk.
    pub fn finish(self) -> Result<(), CliError> {
        for listed in &self.outputs {
            if !Path::new(listed).exists() {
                return Err(CliError::failure(format!(
                    "manifest lists {listed}, which was not written"
                )));
            }
        }
        let manifest = RunManifest {
            subcommand: self.subcommand,
            parameters: self.parameters,
            outputs: self.outputs,
            timestamp: chrono::Utc::now().to_rfc3339(),
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
        };
        let path = self.dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::failure(format!("serialize manifest: {e}")))?;
        text.push('\n');
        fs::write(&path, text)
            .map_err(|e| CliError::failure(format!("cannot write {}: {e}", path.display())))?;
        Ok(())
    }
}

/// 15 significant digits in scientific form: stable under regression
/// diffs, '.' decimal separator, locale-free.
pub fn sig15(x: f64) -> String {
    format!("{x:.14e}")
}

/// CSV field quoting for labels that may carry commas or quotes.
pub fn csv_quote(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}
