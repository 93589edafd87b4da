//! Progress logging and all-or-nothing output writing.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use relprior_core::{Error, Result};

/// One `level key=value ...` line on stderr. Values with spaces are quoted.
pub fn log(level: &str, pairs: &[(&str, String)]) {
    let mut line = String::from(level);
    for (k, v) in pairs {
        if v.contains(' ') || v.contains('"') {
            let _ = write!(line, " {k}={v:?}");
        } else {
            let _ = write!(line, " {k}={v}");
        }
    }
    eprintln!("{line}");
}

/// Collects output files in memory; nothing touches disk until the whole
/// run has succeeded and `flush` is called.
pub struct Staged {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

impl Staged {
    pub fn new(dir: &Path) -> Self {
        Staged { dir: dir.to_path_buf(), files: Vec::new() }
    }

    pub fn add(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    pub fn add_json<T: serde::Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| Error::Numerical(format!("cannot serialize {name}: {e}")))?;
        text.push('\n');
        self.add(name, text);
        Ok(())
    }

    pub fn flush(self) -> Result<()> {
        std::fs::create_dir_all(&self.dir).map_err(|e| {
            Error::Config(format!("cannot create output dir {}: {e}", self.dir.display()))
        })?;
        for (name, contents) in &self.files {
            let path = self.dir.join(name);
            std::fs::write(&path, contents).map_err(|e| {
                Error::Config(format!("cannot write {}: {e}", path.display()))
            })?;
            log("info", &[("wrote", path.display().to_string())]);
        }
        Ok(())
    }
}
