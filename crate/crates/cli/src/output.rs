use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// 17 significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// CSV document whose first line is `# punctured <version> config=<json>`.
pub struct Csv {
    inner: csv::Writer<Vec<u8>>,
}

impl Csv {
    pub fn new(config: &impl Serialize, header: &[&str]) -> Result<Self, CliError> {
        let mut buf = Vec::new();
        let config = serde_json::to_string(config).map_err(CliError::internal)?;
        writeln!(buf, "# punctured {VERSION} config={config}").map_err(CliError::internal)?;
        let mut inner = csv::Writer::from_writer(buf);
        inner.write_record(header).map_err(CliError::internal)?;
        Ok(Self { inner })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.inner.write_record(fields).map_err(CliError::internal)
    }

    pub fn finish(self) -> Result<Vec<u8>, CliError> {
        self.inner.into_inner().map_err(|e| CliError::internal(e.to_string()))
    }
}

pub fn json(value: &impl Serialize) -> Result<Vec<u8>, CliError> {
    let mut out = serde_json::to_vec_pretty(value).map_err(CliError::internal)?;
    out.push(b'\n');
    Ok(out)
}

/// Writes to `path`, or to stdout when there is none.
pub fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| CliError::internal(format!("cannot write {}: {e}", p.display()))),
        None => io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::internal(format!("cannot write to stdout: {e}"))),
    }
}

/// `dir/stem<suffix>` next to `path`, e.g. `scan.csv` -> `scan_contour.csv`.
pub fn companion(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}
