//! Provenance files written next to every command's outputs.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const TOOL: &str = concat!("freqsynth ", env!("CARGO_PKG_VERSION"));

/// Command line and settings of one run, as `key = value` lines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    entries: Vec<(String, String)>,
}

impl Provenance {
    pub fn new(command: &str, argv: &[String]) -> Self {
        let mut p = Self { entries: Vec::new() };
        p.push("tool", TOOL);
        p.push("command", command);
        p.push("argv", argv.join(" "));
        p
    }

    pub fn push(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.entries.push((key.to_owned(), value.to_string()));
        self
    }

    /// Adds every `key = value` line of `text` under `prefix.`.
    pub fn push_block(&mut self, prefix: &str, text: &str) -> &mut Self {
        for line in text.lines() {
            if let Some((k, v)) = line.split_once('=') {
                self.push(&format!("{prefix}.{}", k.trim()), v.trim());
            }
        }
        self
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn write(&self, path: &Path) -> Result<PathBuf> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))?;
        Ok(path.to_path_buf())
    }

    /// Writes `<dir>/provenance.txt`.
    pub fn write_in(&self, dir: &Path) -> Result<PathBuf> {
        self.write(&dir.join("provenance.txt"))
    }

    /// Writes `<stem>.<command>.provenance.txt` beside `file`.
    pub fn write_beside(&self, file: &Path, command: &str) -> Result<PathBuf> {
        self.write(&sibling(file, &format!("{command}.provenance.txt")))
    }
}

/// `dir/stem.suffix` for `dir/stem.ext`.
pub fn sibling(file: &Path, suffix: &str) -> PathBuf {
    let stem = file.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    file.with_file_name(format!("{stem}.{suffix}"))
}
