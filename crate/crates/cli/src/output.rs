//! Result files and the run manifest.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliResult;
use crate::settings::Settings;

/// What a command produced: named payload files and text for stdout.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub files: Vec<(String, Vec<u8>)>,
    pub stdout: String,
}

impl Artifacts {
    pub fn file(&mut self, name: &str, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.to_string(), bytes.into()));
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) {
        let mut text = serde_json::to_string_pretty(value).expect("summary serializes");
        text.push('\n');
        self.file(name, text);
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub scenario: Option<String>,
    pub config: Settings,
    pub tool_version: String,
    pub started_unix: u64,
    pub wall_time_s: f64,
    /// File name to lowercase hex SHA-256.
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl RunManifest {
    pub fn new(command: &str, config: &Settings, started: SystemTime, wall: Duration, art: &Artifacts) -> Self {
        Self {
            command: command.to_string(),
            scenario: config.scenario.clone().or_else(|| config.metric.as_ref().map(|m| m.label.clone())),
            config: config.clone(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix: started.duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            wall_time_s: wall.as_secs_f64(),
            outputs: art.files.iter().map(|(n, b)| (n.clone(), sha256_hex(b))).collect(),
        }
    }
}

/// Write every artifact plus `manifest.json` into `dir`.
pub fn write_all(dir: &Path, art: &Artifacts, manifest: &RunManifest) -> CliResult<()> {
    std::fs::create_dir_all(dir)?;
    for (name, bytes) in &art.files {
        std::fs::write(dir.join(name), bytes)?;
    }
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    std::fs::write(dir.join("manifest.json"), text)?;
    Ok(())
}

/// CSV with shortest round-trip number formatting.
pub struct Csv(csv::Writer<Vec<u8>>);

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).expect("in-memory write");
        Self(w)
    }

    pub fn row<S: AsRef<str>>(&mut self, fields: &[S]) {
        self.0.write_record(fields.iter().map(AsRef::as_ref)).expect("in-memory write");
    }

    pub fn finish(self) -> Vec<u8> {
        self.0.into_inner().expect("in-memory flush")
    }
}

pub fn num(v: f64) -> String {
    format!("{v:?}")
}
