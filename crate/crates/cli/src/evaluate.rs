//! The `evaluate` subcommand: score declared-changepoint files (from this
//! detector or any other) against a truth table, and print a report with
//! means and standard errors.

use std::path::{Path, PathBuf};

use bocpd_core::eval::{aggregate, score_series, ScoreReport, SeriesScore, Tolerance};

use crate::events::{change_pairs, read_events};
use crate::ingest::parse_time;
use crate::{CliError, Result};

pub struct EvaluateArgs {
    pub declared: Vec<PathBuf>,
    pub truth: PathBuf,
    pub tol: usize,
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone)]
struct TruthRow {
    series: String,
    true_changepoint: f64,
}

fn read_truth(path: &Path) -> Result<Vec<TruthRow>> {
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
    let si = col("series")?;
    let ci = col("true_changepoint")?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Data(format!("{} row {}: {e}", path.display(), i + 1)))?;
        let series = rec.get(si).unwrap_or("").to_string();
        let tc = parse_time(rec.get(ci).unwrap_or("")).ok_or_else(|| {
            CliError::Data(format!("{} row {}: bad true_changepoint", path.display(), i + 1))
        })?;
        rows.push(TruthRow {
            series,
            true_changepoint: tc,
        });
    }
    if rows.is_empty() {
        return Err(CliError::Data(format!("{}: empty truth table", path.display())));
    }
    Ok(rows)
}

fn stem_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_default()
        .trim_end_matches(".events")
        .to_string()
}

/// Score one declared-events file against a truth value, both on the day
/// axis; the integer tolerance applies to day distances.
fn score_file(path: &Path, truth: f64, tol: usize) -> Result<SeriesScore> {
    let rows = read_events(path)?;
    let pairs = change_pairs(&rows)?;
    // convert to integer offsets for the scorer, rounding day distances
    let declared: Vec<(usize, usize)> = pairs
        .iter()
        .map(|(c, d)| (*c as i64, *d as i64))
        .map(|(c, d)| (c.max(0) as usize, d.max(c.max(0)) as usize))
        .collect();
    Ok(score_series(&declared, truth.max(0.0) as usize, Tolerance(tol)))
}

pub fn run(args: &EvaluateArgs) -> Result<()> {
    if args.declared.is_empty() {
        return Err(CliError::Usage("evaluate needs at least one --declared file".into()));
    }
    let truths = read_truth(&args.truth)?;
    let mut scores = Vec::new();
    for path in &args.declared {
        let stem = stem_of(path);
        let truth = if truths.len() == 1 && args.declared.len() == 1 {
            &truths[0]
        } else {
            truths
                .iter()
                .find(|t| t.series == stem)
                .ok_or_else(|| CliError::Data(format!("no truth row for series `{stem}`")))?
        };
        scores.push(score_file(path, truth.true_changepoint, args.tol)?);
    }
    let report = aggregate(&scores, None);
    print!("{}", render_text(&report));
    if let Some(path) = &args.report {
        std::fs::write(path, render_csv(&report))
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

pub fn render_text(r: &ScoreReport) -> String {
    let lat = r
        .latency
        .map(|m| format!("{:.2} ({:.3})", m.mean, m.se))
        .unwrap_or_else(|| "-".into());
    let time = r
        .step_time_ms
        .map(|m| format!("{:.2} ({:.3})", m.mean, m.se))
        .unwrap_or_else(|| "-".into());
    format!(
        "series   TP           FP           precision    recall       F-score      latency        time (ms)\n\
         {:<8} {:<12} {:<12} {:<12} {:<12} {:<12} {:<14} {}\n",
        r.n_series,
        format!("{:.2} ({:.3})", r.tp.mean, r.tp.se),
        format!("{:.2} ({:.3})", r.fp.mean, r.fp.se),
        format!("{:.2} ({:.3})", r.precision.mean, r.precision.se),
        format!("{:.2} ({:.3})", r.recall.mean, r.recall.se),
        format!("{:.2} ({:.3})", r.f_score.mean, r.f_score.se),
        lat,
        time
    )
}

pub fn render_csv(r: &ScoreReport) -> String {
    let opt = |m: Option<bocpd_core::eval::MetricSummary>, f: fn(bocpd_core::eval::MetricSummary) -> f64| {
        m.map(|v| f(v).to_string()).unwrap_or_default()
    };
    format!(
        "n_series,tp,tp_se,fp,fp_se,precision,precision_se,recall,recall_se,f_score,f_score_se,latency,latency_se,time_ms,time_ms_se\n\
         {},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
        r.n_series,
        r.tp.mean,
        r.tp.se,
        r.fp.mean,
        r.fp.se,
        r.precision.mean,
        r.precision.se,
        r.recall.mean,
        r.recall.se,
        r.f_score.mean,
        r.f_score.se,
        opt(r.latency, |m| m.mean),
        opt(r.latency, |m| m.se),
        opt(r.step_time_ms, |m| m.mean),
        opt(r.step_time_ms, |m| m.se),
    )
}
