//! Atomic publication of a finished run.
//!
//! Files are first written to a staging directory inside the output
//! directory, then renamed into place one by one; `manifest.json` goes last.
//! Any failure removes what was already moved, so a directory without a
//! manifest never holds files from the failed run.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::CliError;
use crate::scenarios::Output;

pub const MANIFEST: &str = "manifest.json";

fn io(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| io(path, e))
}

fn place(from: &Path, to: &Path) -> Result<(), CliError> {
    if let Some(parent) = to.parent() {
        fs::create_dir_all(parent).map_err(|e| io(parent, e))?;
    }
    fs::rename(from, to).map_err(|e| io(to, e))
}

struct Staging {
    dir: PathBuf,
    placed: Vec<PathBuf>,
    done: bool,
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.done {
            for p in &self.placed {
                let _ = fs::remove_file(p);
            }
        }
        let _ = fs::remove_dir_all(&self.dir);
    }
}

/// Publishes `outputs` under `dir`, then the manifest produced by `manifest`.
pub fn commit(dir: &Path, outputs: &[Output], manifest: impl FnOnce() -> String) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut staging = Staging {
        dir: dir.join(format!(".staging-{}", std::process::id())),
        placed: Vec::new(),
        done: false,
    };
    if staging.dir.exists() {
        fs::remove_dir_all(&staging.dir).map_err(|e| io(&staging.dir, e))?;
    }
    for o in outputs {
        write_file(&staging.dir.join(&o.path), &o.contents)?;
    }
    write_file(&staging.dir.join(MANIFEST), &manifest())?;

    let marker = dir.join(MANIFEST);
    if marker.exists() {
        fs::remove_file(&marker).map_err(|e| io(&marker, e))?;
    }
    for o in outputs {
        let to = dir.join(&o.path);
        place(&staging.dir.join(&o.path), &to)?;
        staging.placed.push(to);
    }
    place(&staging.dir.join(MANIFEST), &marker)?;
    staging.done = true;
    Ok(())
}
