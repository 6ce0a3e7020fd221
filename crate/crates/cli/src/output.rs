use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliResult;

/// Comma-separated table. Column names carry their units.
pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self { text: header.join(",") + "\n", columns: header.len() }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        debug_assert_eq!(cells.len(), self.columns);
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            match c {
                Cell::F(v) => write!(self.text, "{v}").unwrap(),
                Cell::I(v) => write!(self.text, "{v}").unwrap(),
                Cell::S(v) => self.text.push_str(&v.replace([',', '\n'], ";")),
            }
        }
        self.text.push('\n');
    }

    pub fn as_bytes(&self) -> &[u8] {
        self.text.as_bytes()
    }
}

pub enum Cell {
    F(f64),
    I(i64),
    S(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::I(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::I(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::S(v)
    }
}

#[macro_export]
macro_rules! cells {
    ($($x:expr),* $(,)?) => { &[$($crate::output::Cell::from($x)),*] };
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// 64-bit tag derived from the config text, stored in binary dumps.
pub fn config_tag(config_toml: &str) -> u64 {
    let d = Sha256::digest(config_toml.as_bytes());
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

#[derive(Debug, Clone, Serialize, serde::Deserialize, PartialEq)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, serde::Deserialize, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: String,
    pub config_sha256: String,
    pub seed: u64,
    pub threads: usize,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<OutputFile>,
    /// Points that failed while the rest of the run went on.
    pub failures: Vec<String>,
}

pub const MANIFEST: &str = "manifest.json";

/// Output directory that records every file it writes for the manifest.
pub struct OutputDir {
    dir: PathBuf,
    files: Vec<OutputFile>,
    started: u64,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

impl OutputDir {
    pub fn create(dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new(), started: now() })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes)?;
        self.files.retain(|f| f.path != name);
        self.files.push(OutputFile { path: name.to_string(), sha256: sha256_hex(bytes) });
        Ok(path)
    }

    pub fn csv(&mut self, name: &str, table: &Csv) -> CliResult<PathBuf> {
        self.write(name, table.as_bytes())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).expect("serializable");
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn finish(self, command: &str, config: &str, seed: u64, failures: Vec<String>) -> CliResult<RunManifest> {
        let manifest = RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.to_string(),
            config_sha256: sha256_hex(config.as_bytes()),
            seed,
            threads: rayon::current_num_threads(),
            started_unix: self.started,
            finished_unix: now(),
            outputs: self.files,
            failures,
        };
        let text = serde_json::to_string_pretty(&manifest).expect("serializable") + "\n";
        std::fs::write(self.dir.join(MANIFEST), text)?;
        Ok(manifest)
    }
}

/// Recomputes the output hashes listed in a manifest; returns the paths
/// whose content no longer matches.
pub fn verify_manifest(dir: &Path) -> CliResult<Vec<String>> {
    let text = std::fs::read_to_string(dir.join(MANIFEST))?;
    let m: RunManifest = serde_json::from_str(&text).map_err(|e| crate::error::CliError::Usage(e.to_string()))?;
    let mut bad = Vec::new();
    for f in &m.outputs {
        let ok = std::fs::read(dir.join(&f.path)).is_ok_and(|b| sha256_hex(&b) == f.sha256);
        if !ok {
            bad.push(f.path.clone());
        }
    }
    Ok(bad)
}
