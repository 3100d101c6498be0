//! Output directory owned by a single run.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Files written by one run. Unless [`ArtifactDir::commit`] is called,
/// dropping the guard deletes every file it created, and the directory too
/// if the run created it.
pub struct ArtifactDir {
    root: PathBuf,
    created_root: bool,
    files: Vec<PathBuf>,
    committed: bool,
}

impl ArtifactDir {
    /// Claims `root`, which must be absent or empty.
    pub fn claim(root: &Path) -> Result<Self> {
        let created_root = if root.exists() {
            if fs::read_dir(root)?.next().is_some() {
                return Err(Error::Config(format!(
                    "output directory {} is not empty",
                    root.display()
                )));
            }
            false
        } else {
            fs::create_dir_all(root)?;
            true
        };
        Ok(ArtifactDir { root: root.to_path_buf(), created_root, files: Vec::new(), committed: false })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[PathBuf] {
        &self.files
    }

    /// Writes one artifact through `write`.
    pub fn write<F>(&mut self, name: &str, write: F) -> Result<PathBuf>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<()>,
    {
        let path = self.root.join(name);
        if self.files.contains(&path) {
            return Err(Error::Internal(format!("artifact {name} written twice")));
        }
        self.files.push(path.clone());
        let mut out = BufWriter::new(File::create(&path)?);
        write(&mut out)?;
        out.flush()?;
        Ok(path)
    }

    pub fn commit(mut self) -> Vec<PathBuf> {
        self.committed = true;
        std::mem::take(&mut self.files)
    }
}

impl Drop for ArtifactDir {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        if self.created_root {
            let _ = fs::remove_dir(&self.root);
        }
    }
}
