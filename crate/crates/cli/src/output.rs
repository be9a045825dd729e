//! All-or-nothing artifact writing.

use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::CliError;

/// Files produced by one command, held in memory until the command has
/// finished successfully.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Artifacts {
    pub files: Vec<(PathBuf, Vec<u8>)>,
}

impl Artifacts {
    pub fn add(&mut self, path: impl Into<PathBuf>, bytes: impl Into<Vec<u8>>) {
        self.files.push((path.into(), bytes.into()));
    }

    pub fn add_json<T: Serialize>(&mut self, path: impl Into<PathBuf>, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.add(path, text);
        Ok(())
    }

    pub fn get(&self, path: &str) -> Option<&[u8]> {
        self.files
            .iter()
            .find(|(p, _)| p == Path::new(path))
            .map(|(_, b)| b.as_slice())
    }

    /// Stage every file in a hidden directory inside `out`, then rename each
    /// into place. On failure the staging directory is removed.
    pub fn commit(&self, out: &Path) -> Result<Vec<PathBuf>, CliError> {
        fs::create_dir_all(out)?;
        let staging = out.join(format!(".staging-{}", std::process::id()));
        let staged = (|| -> Result<(), CliError> {
            for (rel, bytes) in &self.files {
                let tmp = staging.join(rel);
                if let Some(parent) = tmp.parent() {
                    fs::create_dir_all(parent)?;
                }
                fs::write(&tmp, bytes)?;
            }
            Ok(())
        })();
        if let Err(e) = staged {
            let _ = fs::remove_dir_all(&staging);
            return Err(e);
        }
        let mut written = Vec::with_capacity(self.files.len());
        for (rel, _) in &self.files {
            let dest = out.join(rel);
            if let Some(parent) = dest.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::rename(staging.join(rel), &dest)?;
            written.push(dest);
        }
        fs::remove_dir_all(&staging)?;
        Ok(written)
    }
}
