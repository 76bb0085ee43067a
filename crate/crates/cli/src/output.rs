use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

/// Files produced by a command, written only after all computation finished.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
    metrics: Option<String>,
}

impl Outputs {
    pub fn file(&mut self, path: PathBuf, contents: Vec<u8>) {
        self.files.push((path, contents));
    }

    pub fn metrics(&mut self, doc: &impl Serialize) -> Result<()> {
        self.metrics = Some(toml::to_string(doc).context("serializing metrics")?);
        Ok(())
    }

    /// Writes every file, then the metrics either to `dir/metrics.toml` or to
    /// stdout.
    pub fn commit(self, dir: Option<&Path>) -> Result<()> {
        if let Some(dir) = dir {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        for (path, bytes) in &self.files {
            write_atomic(path, bytes)?;
        }
        match (self.metrics, dir) {
            (Some(m), Some(dir)) => write_atomic(&dir.join("metrics.toml"), m.as_bytes())?,
            (Some(m), None) => {
                let mut out = std::io::stdout().lock();
                out.write_all(m.as_bytes())?;
                out.flush()?;
            }
            (None, _) => {}
        }
        Ok(())
    }
}

/// Write to a sibling temporary file and rename it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .with_context(|| format!("{} is not a file path", path.display()))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}
