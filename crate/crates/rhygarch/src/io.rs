//! CSV series files and JSON parameter files.
//!
//! Series files carry a header with at least `return` and `realized` columns;
//! other columns are ignored on read. Written files use
//! `t,return,realized[,h,z,u]` with 17 significant digits.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rhygarch_core::{RhygarchParams, SeriesPair};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    /// Problem with file contents; `line` is 1-based and counts the header.
    #[error("{path}: line {line}: {reason}")]
    Data { path: PathBuf, line: usize, reason: String },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.to_path_buf(), source }
}

pub fn read_series(path: &Path) -> Result<SeriesPair, IoError> {
    let file = File::open(path).map_err(io_err(path))?;
    read_series_from(file, path)
}

/// Parse a series from any reader; `path` only labels error messages.
pub fn read_series_from<R: Read>(reader: R, path: &Path) -> Result<SeriesPair, IoError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let data = |line: usize, reason: String| IoError::Data { path: path.to_path_buf(), line, reason };
    let headers = rdr.headers().map_err(|e| data(1, e.to_string()))?.clone();
    if headers.is_empty() {
        return Err(IoError::Format { path: path.to_path_buf(), reason: "empty file".into() });
    }
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IoError::Format { path: path.to_path_buf(), reason: format!("missing column `{name}`") })
    };
    let (ri, xi) = (column("return")?, column("realized")?);

    let mut returns = Vec::new();
    let mut realized = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            data(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |i: usize, name: &str| -> Result<f64, IoError> {
            let raw = record.get(i).ok_or_else(|| data(line, format!("missing `{name}` field")))?;
            raw.parse::<f64>().map_err(|_| data(line, format!("cannot parse `{name}` value {raw:?}")))
        };
        let r = field(ri, "return")?;
        let x = field(xi, "realized")?;
        if !r.is_finite() {
            return Err(data(line, "return must be finite".into()));
        }
        if !(x > 0.0 && x.is_finite()) {
            return Err(data(line, format!("realized measure must be positive, got {x}")));
        }
        returns.push(r);
        realized.push(x);
    }
    if returns.is_empty() {
        return Err(IoError::Format { path: path.to_path_buf(), reason: "no observations".into() });
    }
    SeriesPair::observed(returns, realized)
        .map_err(|e| IoError::Format { path: path.to_path_buf(), reason: e.to_string() })
}

/// 17 significant digits, enough to read back the same double.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_series<W: Write>(mut w: W, s: &SeriesPair, latent: bool) -> std::io::Result<()> {
    let latent = match (&s.latent_h, &s.latent_z, &s.latent_u) {
        (Some(h), Some(z), Some(u)) if latent => Some((h, z, u)),
        _ => None,
    };
    if latent.is_some() {
        writeln!(w, "t,return,realized,h,z,u")?;
    } else {
        writeln!(w, "t,return,realized")?;
    }
    for t in 0..s.len() {
        write!(w, "{},{},{}", t + 1, fmt_f64(s.returns[t]), fmt_f64(s.realized[t]))?;
        if let Some((h, z, u)) = latent {
            write!(w, ",{},{},{}", fmt_f64(h[t]), fmt_f64(z[t]), fmt_f64(u[t]))?;
        }
        writeln!(w)?;
    }
    w.flush()
}

pub fn write_series_file(path: &Path, s: &SeriesPair, latent: bool) -> Result<(), IoError> {
    let f = File::create(path).map_err(io_err(path))?;
    write_series(std::io::BufWriter::new(f), s, latent).map_err(io_err(path))
}

/// Parameters from JSON text: either a bare parameter object or a fit result
/// carrying one under `estimates`.
pub fn parse_params(text: &str, path: &Path) -> Result<RhygarchParams, IoError> {
    let fmt = |reason: String| IoError::Format { path: path.to_path_buf(), reason };
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| fmt(e.to_string()))?;
    let value = match value.get("estimates") {
        Some(inner) => inner.clone(),
        None => value,
    };
    serde_json::from_value(value).map_err(|e| fmt(e.to_string()))
}

pub fn read_params(path: &Path) -> Result<RhygarchParams, IoError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_params(&text, path)
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| IoError::Format { path: path.to_path_buf(), reason: e.to_string() })?;
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}
