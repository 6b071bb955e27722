//! Output directories, the job manifest and CSV/JSON writers.
//!
//! Floats are written in Rust's shortest round-trip form, so a CSV value
//! parses back to the identical `f64`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nhssb_core::Params;
use serde::{Deserialize, Serialize};

use crate::config::{JobConfig, CONFIG_SCHEMA};
use crate::error::{io_error, CliError};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Written before any computation; its `config` can be passed back with
/// `--config` to repeat the job.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobManifest {
    pub schema_version: u32,
    pub command: String,
    pub code_version: String,
    pub config: JobConfig,
    pub points: Vec<Params>,
}

impl JobManifest {
    pub fn new(command: &str, config: JobConfig, points: Vec<Params>) -> Self {
        Self {
            schema_version: CONFIG_SCHEMA,
            command: command.to_string(),
            code_version: format!("nhssb {}", env!("CARGO_PKG_VERSION")),
            config: JobConfig { schema_version: Some(CONFIG_SCHEMA), ..config },
            points,
        }
    }
}

pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| io_error(root, e))?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn subdir(&self, rel: &str) -> Result<PathBuf, CliError> {
        let p = self.path(rel);
        std::fs::create_dir_all(&p).map_err(|e| io_error(&p, e))?;
        Ok(p)
    }

    pub fn write_manifest(&self, m: &JobManifest) -> Result<(), CliError> {
        self.write_json(MANIFEST_FILE, m)
    }

    pub fn write_json<T: Serialize>(&self, rel: &str, value: &T) -> Result<(), CliError> {
        let p = self.path(rel);
        let mut text = serde_json::to_string_pretty(value).map_err(|e| io_error(&p, e))?;
        text.push('\n');
        std::fs::write(&p, text).map_err(|e| io_error(&p, e))
    }

    pub fn csv(&self, rel: &str, header: &[&str]) -> Result<CsvOut, CliError> {
        let p = self.path(rel);
        let f = File::create(&p).map_err(|e| io_error(&p, e))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(f));
        w.write_record(header).map_err(|e| io_error(&p, e))?;
        Ok(CsvOut { w, path: p, width: header.len() })
    }

    pub fn raw_file(&self, rel: &str) -> Result<BufWriter<File>, CliError> {
        let p = self.path(rel);
        Ok(BufWriter::new(File::create(&p).map_err(|e| io_error(&p, e))?))
    }
}

pub struct CsvOut {
    w: csv::Writer<BufWriter<File>>,
    path: PathBuf,
    width: usize,
}

impl CsvOut {
    pub fn row(&mut self, fields: &[String]) -> Result<(), CliError> {
        debug_assert_eq!(fields.len(), self.width, "{}", self.path.display());
        self.w.write_record(fields).map_err(|e| io_error(&self.path, e))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.w.flush().map_err(|e| io_error(&self.path, e))?;
        let inner = self.w.into_inner().map_err(|e| io_error(&self.path, e.error()))?;
        inner.into_inner().map_err(|e| io_error(&self.path, e.error()))?.flush().map_err(|e| io_error(&self.path, e))
    }
}

/// Shortest round-trip form; exponent notation for very small or large
/// magnitudes.
pub fn f(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(f).unwrap_or_default()
}

/// Leading parameter columns shared by the tabular outputs.
pub const PARAM_COLUMNS: &[&str] = &["L", "beta", "T", "t", "t_prime", "U", "U_im", "J", "bc"];

pub fn param_fields(p: &Params) -> Vec<String> {
    vec![
        p.l.to_string(),
        f(p.beta),
        f(1.0 / p.beta),
        f(p.t),
        f(p.t_prime),
        f(p.u_re),
        f(p.u_im),
        f(p.j),
        p.bc.to_string(),
    ]
}

pub fn header<'a>(lead: &[&'a str], rest: &[&'a str]) -> Vec<&'a str> {
    lead.iter().chain(PARAM_COLUMNS).chain(rest).copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.30000000000000004] {
            assert_eq!(f(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(f(1.0), "1");
        assert_eq!(opt(None), "");
    }
}
