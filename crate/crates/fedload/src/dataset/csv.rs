//! Client CSV ingest and emit. Format: header `timestamp,kw`, ISO-8601 UTC
//! timestamps at a fixed one-hour step, one file per client named
//! `<client_id>.csv`.

use std::fs;
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, Duration, Utc};

use crate::error::{Error, Result};

use super::TimeSeries;

/// Parses and validates one client file. Gaps and missing readings are hard
/// errors; no imputation.
pub fn load_client_csv(path: &Path) -> Result<TimeSeries> {
    let client_id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::Data(format!("{}: cannot derive client id", path.display())))?
        .to_string();
    let content = fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("{}: {}", path.display(), e)))?;

    let mut lines = content.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "timestamp,kw" => {}
        Some((_, header)) => {
            return Err(Error::Data(format!(
                "{} line 1: expected header 'timestamp,kw', got '{}'",
                path.display(),
                header.trim()
            )))
        }
        None => return Err(Error::Data(format!("{}: empty file", path.display()))),
    }

    let step = Duration::hours(1);
    let mut start: Option<DateTime<Utc>> = None;
    let mut prev: Option<DateTime<Utc>> = None;
    let mut values = Vec::new();

    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (ts_str, kw_str) = line.split_once(',').ok_or_else(|| {
            Error::Data(format!(
                "{} line {}: expected 'timestamp,kw', got '{}'",
                path.display(),
                line_no,
                line
            ))
        })?;
        let ts = DateTime::parse_from_rfc3339(ts_str.trim())
            .map_err(|e| {
                Error::Data(format!(
                    "{} line {}: bad timestamp '{}': {}",
                    path.display(),
                    line_no,
                    ts_str.trim(),
                    e
                ))
            })?
            .with_timezone(&Utc);
        let kw_str = kw_str.trim();
        if kw_str.is_empty() {
            return Err(Error::Data(format!(
                "{} line {}: missing kW reading",
                path.display(),
                line_no
            )));
        }
        let kw: f64 = kw_str.parse().map_err(|_| {
            Error::Data(format!(
                "{} line {}: non-numeric kW value '{}'",
                path.display(),
                line_no,
                kw_str
            ))
        })?;
        if !kw.is_finite() {
            return Err(Error::Data(format!(
                "{} line {}: non-finite kW value",
                path.display(),
                line_no
            )));
        }
        if let Some(p) = prev {
            if ts != p + step {
                return Err(Error::Data(format!(
                    "{} line {}: gap or misalignment at {} (previous reading {})",
                    path.display(),
                    line_no,
                    ts.to_rfc3339(),
                    p.to_rfc3339()
                )));
            }
        } else {
            start = Some(ts);
        }
        prev = Some(ts);
        values.push(kw);
    }

    let start = start.ok_or_else(|| Error::Data(format!("{}: no data rows", path.display())))?;
    Ok(TimeSeries {
        client_id,
        start,
        step,
        values,
    })
}

/// Writes a series in the exact ingest format.
pub fn write_client_csv(series: &TimeSeries, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "timestamp,kw")?;
    for (i, v) in series.values.iter().enumerate() {
        writeln!(
            f,
            "{},{}",
            series
                .timestamp_at(i)
                .to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            v
        )?;
    }
    f.flush()?;
    Ok(())
}
