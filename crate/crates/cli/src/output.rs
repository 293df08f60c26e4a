//! Files written into the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUMMARY_FILE: &str = "summary.json";

/// Output directory plus the list of files written so far, relative to it.
#[derive(Debug)]
pub struct Artifacts {
    dir: PathBuf,
    files: Vec<String>,
}

impl Artifacts {
    pub fn create(dir: &Path) -> Result<Artifacts, CliError> {
        fs::create_dir_all(dir).map_err(CliError::io(dir))?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(CliError::io(&path))?;
        self.note(name);
        Ok(())
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).expect("plain data serializes");
        self.write(name, &(text + "\n"))
    }

    /// Records files some other writer put under the directory.
    pub fn record(&mut self, paths: &[PathBuf]) {
        for p in paths {
            let rel = p.strip_prefix(&self.dir).unwrap_or(p);
            self.note(&rel.to_string_lossy());
        }
    }

    fn note(&mut self, name: &str) {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
    }

    pub fn files(&self) -> Vec<String> {
        let mut files = self.files.clone();
        files.sort();
        files
    }
}

/// Comma-separated cell for an optional number.
pub fn cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}
