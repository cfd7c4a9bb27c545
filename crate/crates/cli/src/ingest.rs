//! CSV ingestion with quality filtering, plus covariate construction.
//!
//! Rows flagged unusable by the quality column -- and rows with missing or
//! unparseable cells -- are skipped entirely and counted; the detector never
//! sees them. Calendar time still advances across gaps (covariates use real
//! dates), while run length counts only delivered observations.

use std::path::Path;

use chrono::{Datelike, NaiveDate};

use crate::config::{CovariateSection, StreamSection};
use crate::{CliError, Result};

/// One usable observation.
#[derive(Debug, Clone)]
pub struct ObservationRecord {
    /// 1-based data row in the source file (excluding the header).
    pub source_row: usize,
    /// Timestamp cell exactly as it appeared.
    pub raw_time: String,
    /// Parsed time on the day axis (integer index or days since CE).
    pub time_value: f64,
    /// Signal values in `value_cols` order.
    pub values: Vec<f64>,
    /// Covariates from `x_cols`, when configured.
    pub x_extra: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct IngestResult {
    pub records: Vec<ObservationRecord>,
    pub skipped: usize,
}

/// Parse a timestamp cell: an integer/float day index, or an ISO date
/// (mapped to days since the common era so date streams subtract cleanly).
pub fn parse_time(cell: &str) -> Option<f64> {
    let cell = cell.trim();
    if cell.is_empty() {
        return None;
    }
    if let Ok(v) = cell.parse::<f64>() {
        return v.is_finite().then_some(v);
    }
    NaiveDate::parse_from_str(cell, "%Y-%m-%d")
        .ok()
        .map(|d| f64::from(d.num_days_from_ce()))
}

pub fn ingest(path: &Path, stream: &StreamSection) -> Result<IngestResult> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        .clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Data(format!("{}: missing column `{name}`", path.display())))
    };

    let time_idx = col(&stream.time_col)?;
    let value_idx: Vec<usize> = stream
        .value_cols
        .iter()
        .map(|c| col(c))
        .collect::<Result<_>>()?;
    let qa_idx = match &stream.qa_col {
        Some(c) => Some(col(c)?),
        None => None,
    };
    let x_idx: Vec<usize> = stream.x_cols.iter().map(|c| col(c)).collect::<Result<_>>()?;
    let qa_ok = stream.qa_ok.clone().unwrap_or_default();

    let mut records = Vec::new();
    let mut skipped = 0usize;
    let mut last_time: Option<f64> = None;
    for (i, row) in reader.records().enumerate() {
        let source_row = i + 1;
        let row = row.map_err(|e| {
            CliError::Data(format!("{} row {source_row}: {e}", path.display()))
        })?;
        let cell = |idx: usize| row.get(idx).unwrap_or("");

        if let Some(qi) = qa_idx {
            if !qa_ok.iter().any(|ok| ok == cell(qi)) {
                skipped += 1;
                continue;
            }
        }
        let Some(time_value) = parse_time(cell(time_idx)) else {
            skipped += 1;
            continue;
        };
        let mut values = Vec::with_capacity(value_idx.len());
        let mut bad = false;
        for &vi in &value_idx {
            match cell(vi).parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => {
                    bad = true;
                    break;
                }
            }
        }
        let x_extra = if x_idx.is_empty() {
            None
        } else {
            let mut xs = Vec::with_capacity(x_idx.len());
            for &xi in &x_idx {
                match cell(xi).parse::<f64>() {
                    Ok(v) if v.is_finite() => xs.push(v),
                    _ => {
                        bad = true;
                        break;
                    }
                }
            }
            Some(xs)
        };
        if bad {
            skipped += 1;
            continue;
        }
        if let Some(prev) = last_time {
            if time_value < prev {
                return Err(CliError::Data(format!(
                    "{} row {source_row}: timestamps must be monotone nondecreasing",
                    path.display()
                )));
            }
        }
        last_time = Some(time_value);
        records.push(ObservationRecord {
            source_row,
            raw_time: cell(time_idx).to_string(),
            time_value,
            values,
            x_extra,
        });
    }
    Ok(IngestResult { records, skipped })
}

/// Covariates at `day` days since the stream start:
/// `[1,] sin(2 pi day / period), cos(2 pi day / period), day / trend_div`.
pub fn covariates(day: f64, recipe: &CovariateSection) -> Vec<f64> {
    let arg = 2.0 * std::f64::consts::PI * day / recipe.period_days;
    let mut x = Vec::with_capacity(4);
    if recipe.intercept {
        x.push(1.0);
    }
    x.push(arg.sin());
    x.push(arg.cos());
    x.push(day / recipe.trend_div);
    x
}

/// Covariate vector for a record, relative to the stream origin.
pub fn covariates_for(
    record: &ObservationRecord,
    origin: f64,
    recipe: &CovariateSection,
) -> Vec<f64> {
    match &record.x_extra {
        Some(xs) => {
            let mut x = Vec::with_capacity(xs.len() + 1);
            if recipe.intercept {
                x.push(1.0);
            }
            x.extend_from_slice(xs);
            x
        }
        None => covariates(record.time_value - origin, recipe),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn scratch_csv(content: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!(
            "bocpd-ingest-{}-{:?}",
            std::process::id(),
            std::thread::current().id()
        ));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("data.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    fn qa_stream() -> StreamSection {
        StreamSection {
            time_col: "date".into(),
            value_cols: vec!["ndvi".into(), "swir2".into()],
            qa_col: Some("qa".into()),
            qa_ok: Some(vec!["0".into()]),
            x_cols: vec![],
        }
    }

    #[test]
    fn qa_flagged_rows_are_skipped_and_counted() {
        let mut content = String::from("date,ndvi,swir2,qa\n");
        for i in 0..100 {
            let qa = if (17..29).contains(&i) { 1 } else { 0 }; // 12 flagged rows
            content.push_str(&format!("{},0.5,0.2,{qa}\n", i + 1));
        }
        let path = scratch_csv(&content);
        let out = ingest(&path, &qa_stream()).unwrap();
        assert_eq!(out.records.len(), 88);
        assert_eq!(out.skipped, 12);
    }

    #[test]
    fn empty_cells_are_skipped_and_counted() {
        let content = "date,ndvi,swir2,qa\n1,0.5,0.2,0\n2,,0.2,0\n3,0.4,0.1,0\n";
        let path = scratch_csv(content);
        let out = ingest(&path, &qa_stream()).unwrap();
        assert_eq!(out.records.len(), 2);
        assert_eq!(out.skipped, 1);
    }

    #[test]
    fn date_column_maps_to_day_axis() {
        let content = "date,ndvi,swir2,qa\n2019-01-01,0.5,0.2,0\n2019-01-11,0.4,0.2,0\n";
        let path = scratch_csv(content);
        let out = ingest(&path, &qa_stream()).unwrap();
        assert_eq!(out.records.len(), 2);
        assert_eq!(out.records[1].time_value - out.records[0].time_value, 10.0);
        assert_eq!(out.records[0].raw_time, "2019-01-01");
    }

    #[test]
    fn missing_column_is_schema_error() {
        let content = "date,ndvi,qa\n1,0.5,0\n";
        let path = scratch_csv(content);
        assert!(ingest(&path, &qa_stream()).is_err());
    }

    #[test]
    fn backwards_time_is_rejected() {
        let content = "date,ndvi,swir2,qa\n5,0.5,0.2,0\n3,0.4,0.2,0\n";
        let path = scratch_csv(content);
        assert!(ingest(&path, &qa_stream()).is_err());
    }

    #[test]
    fn covariate_recipe_values() {
        let recipe = CovariateSection::default();
        let x0 = covariates(0.0, &recipe);
        assert_eq!(x0, vec![1.0, 0.0, 1.0, 0.0]);

        let xq = covariates(365.0 / 4.0, &recipe);
        assert!((xq[0] - 1.0).abs() < 1e-12);
        assert!((xq[1] - 1.0).abs() < 1e-12);
        assert!(xq[2].abs() < 1e-12);
        assert!((xq[3] - 0.25).abs() < 1e-12);

        // one full period later, the harmonics repeat
        let t = 37.0;
        let a = covariates(t, &recipe);
        let b = covariates(t + 365.0, &recipe);
        assert!((a[1] - b[1]).abs() < 1e-9);
        assert!((a[2] - b[2]).abs() < 1e-9);
    }
}
