//! Dataset manifests: one `index, mr_path, ct_path, seed` line per pair.
//!
//! Relative paths are resolved against the manifest's own directory. Blank
//! lines and lines starting with `#` are ignored.

use std::fs;
use std::path::{Path, PathBuf};

use freqsynth_core::synthetic::{generate_pair, GeneratorSpec};
use freqsynth_core::Volume;

use crate::error::{Error, Result};
use crate::fsv::{read_volume, write_volume};

pub const MANIFEST_FILE: &str = "manifest.txt";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub index: usize,
    pub mr_path: PathBuf,
    pub ct_path: PathBuf,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# index, mr_path, ct_path, seed\n");
        for e in &self.entries {
            s.push_str(&format!(
                "{}, {}, {}, {}\n",
                e.index,
                e.mr_path.display(),
                e.ct_path.display(),
                e.seed
            ));
        }
        s
    }

    /// Parses manifest text; `path` is only used in error messages.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!("expected 4 comma-separated fields, found {}", fields.len()),
                ));
            }
            let index = fields[0]
                .parse()
                .map_err(|_| Error::parse(path, i + 1, format!("bad index {:?}", fields[0])))?;
            let seed = fields[3]
                .parse()
                .map_err(|_| Error::parse(path, i + 1, format!("bad seed {:?}", fields[3])))?;
            if fields[1].is_empty() || fields[2].is_empty() {
                return Err(Error::parse(path, i + 1, "empty volume path"));
            }
            entries.push(ManifestEntry {
                index,
                mr_path: PathBuf::from(fields[1]),
                ct_path: PathBuf::from(fields[2]),
                seed,
            });
        }
        Ok(Self { entries })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m = Self::parse(&text, path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for e in &mut m.entries {
            if e.mr_path.is_relative() {
                e.mr_path = base.join(&e.mr_path);
            }
            if e.ct_path.is_relative() {
                e.ct_path = base.join(&e.ct_path);
            }
        }
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// Loads every `(mr, ct)` pair in manifest order.
    pub fn load_pairs(&self) -> Result<Vec<(Volume, Volume)>> {
        self.entries
            .iter()
            .map(|e| Ok((read_volume(&e.mr_path)?, read_volume(&e.ct_path)?)))
            .collect()
    }
}

/// Generates `n_pairs` pairs with seeds `spec.seed + i` into `out_dir` and
/// writes `manifest.txt` there. Paths in the manifest are relative.
pub fn generate_dataset(spec: &GeneratorSpec, n_pairs: usize, out_dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut manifest = Manifest::default();
    for i in 0..n_pairs {
        let seed = spec.seed.wrapping_add(i as u64);
        let (mr, ct) = generate_pair(&spec.with_seed(seed))?;
        let mr_name = format!("pair_{i:03}.mr.fsv");
        let ct_name = format!("pair_{i:03}.ct.fsv");
        write_volume(&mr, &out_dir.join(&mr_name))?;
        write_volume(&ct, &out_dir.join(&ct_name))?;
        manifest.entries.push(ManifestEntry {
            index: i,
            mr_path: mr_name.into(),
            ct_path: ct_name.into(),
            seed,
        });
    }
    manifest.write(&out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}
