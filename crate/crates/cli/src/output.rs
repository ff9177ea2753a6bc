//! Output directory written through a staging directory and renamed into
//! place once everything succeeded.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::run::RunError;

/// Name of the manifest inside every output directory. Its presence marks a
/// directory as ours and therefore safe to replace.
pub const MANIFEST: &str = "manifest.toml";

pub struct OutDir {
    target: PathBuf,
    staging: PathBuf,
    committed: bool,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn sibling(target: &Path, tag: &str) -> PathBuf {
    let name = target
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    target.with_file_name(format!(".{name}.{tag}-{}", std::process::id()))
}

impl OutDir {
    /// Refuses to replace an existing directory that holds anything but a
    /// previous run.
    pub fn create(target: &Path) -> Result<Self, RunError> {
        if target.exists() {
            let ours = target.is_dir()
                && (target.join(MANIFEST).is_file()
                    || fs::read_dir(target)
                        .map_err(io_err(target))?
                        .next()
                        .is_none());
            if !ours {
                return Err(RunError::Config(format!(
                    "output path {} exists and is not a previous run directory",
                    target.display()
                )));
            }
        }
        if let Some(parent) = target.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        let staging = sibling(target, "tmp");
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(io_err(&staging))?;
        }
        fs::create_dir(&staging).map_err(io_err(&staging))?;
        Ok(Self {
            target: target.to_path_buf(),
            staging,
            committed: false,
        })
    }

    pub fn write_with(
        &self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    ) -> Result<(), RunError> {
        let path = self.staging.join(name);
        let file = File::create(&path).map_err(io_err(&path))?;
        let mut w = BufWriter::new(file);
        body(&mut w).and_then(|_| w.flush()).map_err(io_err(&path))
    }

    pub fn write_str(&self, name: &str, text: &str) -> Result<(), RunError> {
        self.write_with(name, |w| w.write_all(text.as_bytes()))
    }

    /// Moves the staged files into place, replacing a previous run.
    pub fn commit(mut self) -> Result<PathBuf, RunError> {
        let old = sibling(&self.target, "old");
        let had_old = self.target.exists();
        if had_old {
            if old.exists() {
                fs::remove_dir_all(&old).map_err(io_err(&old))?;
            }
            fs::rename(&self.target, &old).map_err(io_err(&self.target))?;
        }
        fs::rename(&self.staging, &self.target).map_err(io_err(&self.target))?;
        self.committed = true;
        if had_old {
            fs::remove_dir_all(&old).map_err(io_err(&old))?;
        }
        Ok(self.target.clone())
    }
}

impl Drop for OutDir {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}

/// `Some(x)` as `x`, `None` as an empty cell.
pub fn cell(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}
