use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Price,
    Irradiance,
    Load,
}

/// A per-instant series read from disk.
///
/// Price series are normalized so their maximum is one; `scale` holds the
/// divisor so that `values[i] * scale` is the original tariff. Other kinds
/// keep their values and have `scale == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestedProfile {
    pub values: Vec<f64>,
    pub scale: f64,
}

/// Reads an `instant,value` CSV with exactly `m` data rows.
pub fn ingest_profile(path: &Path, kind: ProfileKind, m: usize) -> Result<IngestedProfile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading profile {}", path.display()), e))?;
    parse_profile(&text, path, kind, m)
}

pub(crate) fn parse_profile(
    text: &str,
    path: &Path,
    kind: ProfileKind,
    m: usize,
) -> Result<IngestedProfile> {
    let err = |line: u64, message: String| Error::Profile {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    if header.len() != 2 || &header[0] != "instant" || &header[1] != "value" {
        return Err(err(1, "expected header `instant,value`".into()));
    }
    let mut values = Vec::with_capacity(m);
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(err(
                line,
                format!("expected 2 columns, found {}", record.len()),
            ));
        }
        let instant: usize = record[0]
            .parse()
            .map_err(|_| err(line, format!("instant `{}` is not an integer", &record[0])))?;
        if instant != values.len() {
            return Err(err(
                line,
                format!(
                    "instant {instant} out of sequence, expected {}",
                    values.len()
                ),
            ));
        }
        let value: f64 = record[1]
            .parse()
            .map_err(|_| err(line, format!("value `{}` is not a number", &record[1])))?;
        if !value.is_finite() {
            return Err(err(line, format!("value `{}` is not finite", &record[1])));
        }
        if value < 0.0 && kind != ProfileKind::Load {
            return Err(err(line, format!("negative {kind:?} value {value}")));
        }
        values.push(value);
    }
    if values.len() != m {
        return Err(Error::ProfileLength {
            path: path.to_path_buf(),
            expected: m,
            found: values.len(),
        });
    }
    let mut scale = 1.0;
    if kind == ProfileKind::Price {
        scale = values.iter().copied().fold(0.0, f64::max);
        if scale <= 0.0 {
            return Err(err(1, "price profile has no positive value".into()));
        }
        values.iter_mut().for_each(|v| *v /= scale);
    }
    Ok(IngestedProfile { values, scale })
}

/// Writes a series in the format [`ingest_profile`] reads.
pub fn write_profile(path: &Path, values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["instant", "value"])?;
    for (i, v) in values.iter().enumerate() {
        w.write_record([i.to_string(), v.to_string()])?;
    }
    w.flush()
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}
