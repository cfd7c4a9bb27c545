//! The event file: one CSV shared by change declarations and outlier
//! removals, tagged by kind. Column order is fixed and byte-stable.

use std::path::Path;

use crate::ingest::parse_time;
use crate::{CliError, Result};

pub const EVENT_HEADER: &str = "kind,changepoint_time,declared_time,posterior_mass";

#[derive(Debug, Clone, PartialEq)]
pub struct EventRow {
    /// `change` or `outlier`.
    pub kind: String,
    /// For changes: the estimated change location's timestamp. For
    /// outliers: the removed observation's timestamp.
    pub changepoint_time: String,
    pub declared_time: String,
    pub posterior_mass: f64,
}

pub fn write_events(path: &Path, rows: &[EventRow]) -> Result<()> {
    let mut out = String::from(EVENT_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.kind, r.changepoint_time, r.declared_time, r.posterior_mass
        ));
    }
    std::fs::write(path, out)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

pub fn read_events(path: &Path) -> Result<Vec<EventRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Data(e.to_string()))?
        .clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Data(format!("{}: missing column `{name}`", path.display())))
    };
    let (ki, ci, di, pi) = (
        col("kind")?,
        col("changepoint_time")?,
        col("declared_time")?,
        col("posterior_mass")?,
    );
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Data(format!("{} row {}: {e}", path.display(), i + 1)))?;
        rows.push(EventRow {
            kind: rec.get(ki).unwrap_or("").to_string(),
            changepoint_time: rec.get(ci).unwrap_or("").to_string(),
            declared_time: rec.get(di).unwrap_or("").to_string(),
            posterior_mass: rec
                .get(pi)
                .unwrap_or("")
                .parse()
                .map_err(|_| CliError::Data(format!("{} row {}: bad mass", path.display(), i + 1)))?,
        });
    }
    Ok(rows)
}

/// Declared change pairs `(changepoint_time, declared_time)` on the day
/// axis, for scoring.
pub fn change_pairs(rows: &[EventRow]) -> Result<Vec<(f64, f64)>> {
    rows.iter()
        .filter(|r| r.kind == "change")
        .map(|r| {
            let c = parse_time(&r.changepoint_time)
                .ok_or_else(|| CliError::Data(format!("bad changepoint_time `{}`", r.changepoint_time)))?;
            let d = parse_time(&r.declared_time)
                .ok_or_else(|| CliError::Data(format!("bad declared_time `{}`", r.declared_time)))?;
            Ok((c, d))
        })
        .collect()
}
