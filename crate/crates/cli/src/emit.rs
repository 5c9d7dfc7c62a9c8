//! Artifact writers. Every file carries the config hash and artifact version:
//! CSV as trailing columns, JSON as top-level keys, checkpoints in the header.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ARTIFACT_VERSION;
use crate::RunError;

/// Shortest decimal that round-trips to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        ryu::Buffer::new().format_finite(x).to_owned()
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub struct Artifacts {
    dir: PathBuf,
    hash: String,
    written: Vec<PathBuf>,
}

impl Artifacts {
    pub fn create(dir: &Path, hash: &str) -> Result<Self, RunError> {
        std::fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            hash: hash.to_owned(),
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn open(&mut self, name: &str) -> Result<(PathBuf, BufWriter<File>), RunError> {
        let path = self.path(name);
        let f = File::create(&path).map_err(|e| RunError::io(&path, e))?;
        self.written.push(path.clone());
        Ok((path, BufWriter::new(f)))
    }

    /// RFC 4180 table with `config_hash` and `artifact_version` appended to
    /// every row.
    pub fn csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), RunError>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let (path, w) = self.open(name)?;
        let err = |e: csv::Error| RunError::io(&path, std::io::Error::other(e));
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(w);
        out.write_record(header.iter().copied().chain(["config_hash", "artifact_version"]))
            .map_err(err)?;
        for row in rows {
            out.write_record(row.iter().map(String::as_str).chain([self.hash.as_str(), ARTIFACT_VERSION]))
                .map_err(err)?;
        }
        out.flush().map_err(|e| RunError::io(&path, e))
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), RunError> {
        let (path, mut w) = self.open(name)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| RunError::io(&path, e.into()))?;
        writeln!(w).and_then(|_| w.flush()).map_err(|e| RunError::io(&path, e))
    }

    /// Opens a binary artifact for the caller to fill.
    pub fn binary(&mut self, name: &str) -> Result<BufWriter<File>, RunError> {
        Ok(self.open(name)?.1)
    }
}

/// Envelope shared by every JSON report.
#[derive(Serialize)]
pub struct Report<'a, T: Serialize> {
    pub artifact_version: &'static str,
    pub config_hash: &'a str,
    pub command: crate::config::Command,
    pub seed: u64,
    pub config: serde_json::Value,
    pub warnings: Vec<String>,
    pub result: T,
}
