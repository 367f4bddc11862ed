//! File output: directory handling, CSV/JSON writers and config sidecars.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| CliError::output(root, e))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Creates `name`, hands a buffered writer to `body` and flushes it.
    pub fn write<F, E>(&self, name: &str, body: F) -> Result<PathBuf, CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<(), E>,
        E: std::fmt::Display,
    {
        let path = self.path(name);
        let file = File::create(&path).map_err(|e| CliError::output(&path, e))?;
        let mut w = BufWriter::new(file);
        body(&mut w).map_err(|e| CliError::output(&path, e))?;
        w.flush().map_err(|e| CliError::output(&path, e))?;
        log::info!("wrote {}", path.display());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            w.write_all(b"\n").map_err(serde_json::Error::io)
        })
    }

    /// Writes `<stem>.config.json` next to the outputs of one command.
    pub fn sidecar<T: Serialize>(&self, stem: &str, config: &T) -> Result<PathBuf, CliError> {
        self.write_json(&format!("{stem}.config.json"), config)
    }
}

/// Shortest round-trip decimal form, so tables are byte-stable.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}
