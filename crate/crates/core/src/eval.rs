//! Scoring declared changepoints against a known truth.
//!
//! Detection is scored as classification: a declared changepoint within
//! `tol` of the truth is the (single) true positive, everything else
//! declared is a false positive. Latency is the gap between the estimated
//! change location and the step it was first declared, taken from the first
//! in-tolerance declaration.

use alloc::vec::Vec;

use crate::fm;

/// Match tolerance in observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tolerance(pub usize);

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance(5)
    }
}

/// Per-series classification outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesScore {
    pub tp: bool,
    pub fp: usize,
    /// `declared_at - changepoint_at` of the first in-tolerance declaration.
    pub latency: Option<usize>,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

/// Score one series. `declared` holds `(changepoint_at, declared_at)` pairs
/// in declaration order; `truth` is the true change location.
///
/// A silent detector earns a zero F-score, and multiple in-tolerance
/// declarations still count as a single true positive. Precision is
/// `tp / (tp + fp)` -- deduplicated counts, so that repeated in-tolerance
/// hits are not penalized and F = 1 exactly when the single change is found
/// with no false declarations.
pub fn score_series(declared: &[(usize, usize)], truth: usize, tol: Tolerance) -> SeriesScore {
    let within = |c: usize| c.abs_diff(truth) <= tol.0;
    let tp = declared.iter().any(|&(c, _)| within(c));
    let fp = declared.iter().filter(|&&(c, _)| !within(c)).count();
    let latency = declared
        .iter()
        .find(|&&(c, _)| within(c))
        .map(|&(c, at)| at - c);
    let denom = tp as usize + fp;
    let precision = if denom > 0 {
        (tp as usize) as f64 / denom as f64
    } else {
        0.0
    };
    let recall = if tp { 1.0 } else { 0.0 };
    let f_score = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    SeriesScore {
        tp,
        fp,
        latency,
        precision,
        recall,
        f_score,
    }
}

/// Mean plus standard error (`sd/sqrt(n)`; zero for a single value).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSummary {
    pub mean: f64,
    pub se: f64,
}

fn summarize(values: &[f64]) -> MetricSummary {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return MetricSummary { mean, se: 0.0 };
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    MetricSummary {
        mean,
        se: fm::sqrt(var / n),
    }
}

/// Aggregate report over replications: per-series metrics averaged with
/// standard errors. The F-score is computed per series first and then
/// averaged. Latency aggregates only over series with a true positive.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub n_series: usize,
    pub tp: MetricSummary,
    pub fp: MetricSummary,
    pub precision: MetricSummary,
    pub recall: MetricSummary,
    pub f_score: MetricSummary,
    pub latency: Option<MetricSummary>,
    pub step_time_ms: Option<MetricSummary>,
}

/// Aggregate per-series scores; `step_time_ms` optionally carries a mean
/// per-observation wall time per series when the caller measured one.
pub fn aggregate(scores: &[SeriesScore], step_time_ms: Option<&[f64]>) -> ScoreReport {
    assert!(!scores.is_empty(), "aggregate needs at least one series");
    let tp: Vec<f64> = scores.iter().map(|s| s.tp as usize as f64).collect();
    let fp: Vec<f64> = scores.iter().map(|s| s.fp as f64).collect();
    let precision: Vec<f64> = scores.iter().map(|s| s.precision).collect();
    let recall: Vec<f64> = scores.iter().map(|s| s.recall).collect();
    let f_score: Vec<f64> = scores.iter().map(|s| s.f_score).collect();
    let latencies: Vec<f64> = scores
        .iter()
        .filter_map(|s| s.latency.map(|l| l as f64))
        .collect();
    ScoreReport {
        n_series: scores.len(),
        tp: summarize(&tp),
        fp: summarize(&fp),
        precision: summarize(&precision),
        recall: summarize(&recall),
        f_score: summarize(&f_score),
        latency: if latencies.is_empty() {
            None
        } else {
            Some(summarize(&latencies))
        },
        step_time_ms: step_time_ms.filter(|v| !v.is_empty()).map(summarize),
    }
}
