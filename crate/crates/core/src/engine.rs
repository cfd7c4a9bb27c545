//! Streaming run-length filter (Bayesian online changepoint detection,
//! Adams & MacKay 2007) over the conjugate regression model.
//!
//! The filter carries one hypothesis per possible run length r -- the number
//! of observations since the most recent changepoint -- each holding the log
//! joint density `log f(Y_{1:t}, r_t = r)` and the sufficient statistics of
//! the observations inside the run. Per observation:
//!
//! - every hypothesis grows by one, weighted by its posterior predictive
//!   density of the new observation and the no-change prior `1 - lambda`;
//! - a fresh `r = 0` hypothesis absorbs `lambda` times the total previous
//!   mass, with the new observation scored under the prior predictive
//!   (it starts a segment about which nothing is known yet);
//! - hypotheses whose posterior falls below a floor are dropped, except the
//!   current step's `r = 0` hypothesis and the single most probable one, so
//!   the filter always remains steppable.
//!
//! Changepoints are declared from windowed posterior mass rather than single
//! atoms: uncertainty about the exact change time splits mass across a few
//! adjacent run lengths, and any of these windows exceeding the declaration
//! threshold counts. Declared locations are the argmax run length inside the
//! winning window.
//!
//! All mixture arithmetic is in log space with a fixed ascending-run-length
//! summation order, so replaying a stream reproduces identical posteriors
//! bit for bit.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fm;
use crate::model::{log_marginal, Hyperparameters, SufficientStats};
use crate::numerics::log_sum_exp;

/// Tuning knobs of the run-length filter.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    /// Per-step prior probability of a changepoint, in (0, 1). Users who
    /// think in expected run lengths should pass `1/expected`.
    pub hazard: f64,
    /// Posterior mass floor below which run-length hypotheses are dropped.
    pub trunc_threshold: f64,
    /// Length L of the contiguous run-length window whose summed mass is
    /// compared against the declaration threshold.
    pub cp_window_len: usize,
    /// Largest window start l0 searched, so windows cover run lengths
    /// `0 ..= cp_search_max + cp_window_len`.
    pub cp_search_max: usize,
    /// Posterior mass a window must reach before a changepoint is declared.
    pub declare_threshold: f64,
    /// A declared changepoint must be supported by at least this many
    /// observations inside the new segment before it is published. This is
    /// what separates "a change just started" from "one wild point", and it
    /// sets the detection latency floor.
    pub declare_min_run: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            hazard: 1.0 / 270.0,
            trunc_threshold: 1e-4,
            cp_window_len: 5,
            cp_search_max: 6,
            declare_threshold: 0.5,
            declare_min_run: 3,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.hazard > 0.0 && self.hazard < 1.0) {
            return Err(Error::InvalidConfig {
                what: "hazard must lie in the open interval (0, 1)",
            });
        }
        if !(self.trunc_threshold >= 0.0 && self.trunc_threshold < 1.0) {
            return Err(Error::InvalidConfig {
                what: "trunc_threshold must lie in [0, 1)",
            });
        }
        if !(self.declare_threshold > 0.0 && self.declare_threshold <= 1.0) {
            return Err(Error::InvalidConfig {
                what: "declare_threshold must lie in (0, 1]",
            });
        }
        if self.cp_window_len == 0 {
            return Err(Error::InvalidConfig {
                what: "cp_window_len must be positive",
            });
        }
        Ok(())
    }
}

/// Normalized posterior over run lengths, entries ascending in run length.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLengthPosterior {
    entries: Vec<(usize, f64)>,
}

impl RunLengthPosterior {
    pub(crate) fn from_entries(entries: Vec<(usize, f64)>) -> Self {
        RunLengthPosterior { entries }
    }

    /// Probability of a specific run length (zero if not tracked).
    pub fn prob(&self, run_length: usize) -> f64 {
        self.entries
            .iter()
            .find(|(r, _)| *r == run_length)
            .map(|(_, p)| *p)
            .unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Most probable run length (ties toward smaller).
    pub fn argmax(&self) -> usize {
        let mut best = (0usize, f64::NEG_INFINITY);
        for &(r, p) in &self.entries {
            if p > best.1 {
                best = (r, p);
            }
        }
        best.0
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }

    /// Total variation distance against another posterior (over the union of
    /// supports).
    pub fn total_variation(&self, other: &RunLengthPosterior) -> f64 {
        let mut tv = 0.0;
        for &(r, p) in &self.entries {
            tv += 0.5 * fm::abs(p - other.prob(r));
        }
        for &(r, q) in &other.entries {
            if self.prob(r) == 0.0 {
                tv += 0.5 * q;
            }
        }
        tv
    }
}

/// A published changepoint declaration.
#[derive(Debug, Clone)]
pub struct ChangeEvent {
    /// Estimated change location: the index of the first observation of the
    /// new segment (`declared_at - r*`).
    pub changepoint_at: usize,
    /// Observation index at which the declaration was made.
    pub declared_at: usize,
    /// Posterior mass of the winning window.
    pub window_mass: f64,
    /// Snapshot of the run-length posterior at declaration time.
    pub posterior: RunLengthPosterior,
}

/// One run-length hypothesis: its log joint weight and the sufficient
/// statistics of the observations attributed to the run. The cached log
/// marginal always equals `log_marginal` of `stats`; it turns each predictive
/// evaluation into a single fresh marginal computation.
#[derive(Debug, Clone)]
pub(crate) struct RunHypothesis {
    pub(crate) run_length: usize,
    pub(crate) log_joint: f64,
    pub(crate) stats: SufficientStats,
    pub(crate) log_ml: f64,
}

/// Plain-data snapshot of one hypothesis, for state serialization.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisState {
    pub run_length: usize,
    pub log_joint: f64,
    pub n: usize,
    pub yty: Vec<f64>,
    pub xtx: Vec<f64>,
    pub xty: Vec<f64>,
}

/// Plain-data snapshot of a detector, sufficient to resume a stream.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorState {
    pub observations_seen: usize,
    pub published_locations: Vec<usize>,
    pub hypotheses: Vec<HypothesisState>,
}

/// Output of one detector step.
#[derive(Debug, Clone)]
pub struct StepResult {
    /// Run-length posterior after absorbing the observation (pre-truncation).
    pub posterior: RunLengthPosterior,
    /// Published change declaration, if any.
    pub event: Option<ChangeEvent>,
}

/// Advance a hypothesis bank one observation: grow every run with its own
/// predictive and the no-change prior, then prepend the fresh `r = 0`
/// hypothesis scored under the prior predictive.
pub(crate) fn advance_scored(
    eta: &Hyperparameters,
    ln_hazard: f64,
    ln_growth: f64,
    hyps: &mut Vec<RunHypothesis>,
    x: &[f64],
    y: &[f64],
) -> Result<()> {
    let prior_weights: Vec<f64> = hyps.iter().map(|h| h.log_joint).collect();
    let lse_prior = log_sum_exp(&prior_weights);

    for h in hyps.iter_mut() {
        h.stats.add_observation(x, y)?;
        let lm_new = log_marginal(eta, &h.stats)?;
        h.log_joint += lm_new - h.log_ml + ln_growth;
        h.log_ml = lm_new;
        h.run_length += 1;
    }

    let single = SufficientStats::zeros(eta.covariate_dim(), eta.observation_dim())
        .update(x, y)?;
    let prior_pred = log_marginal(eta, &single)?;
    hyps.insert(
        0,
        RunHypothesis {
            run_length: 0,
            log_joint: lse_prior + ln_hazard + prior_pred,
            stats: SufficientStats::zeros(eta.covariate_dim(), eta.observation_dim()),
            log_ml: 0.0,
        },
    );
    Ok(())
}

/// Advance a hypothesis bank one observation without scoring it: the
/// observation's density is accounted for elsewhere (the outlier state), so
/// only the run-length transition applies and no statistics change.
pub(crate) fn advance_unscored(ln_hazard: f64, ln_growth: f64, hyps: &mut Vec<RunHypothesis>) {
    let prior_weights: Vec<f64> = hyps.iter().map(|h| h.log_joint).collect();
    let lse_prior = log_sum_exp(&prior_weights);
    let (k, d) = match hyps.first() {
        Some(h) => (h.stats.xtx().dim(), h.stats.yty().dim()),
        None => return,
    };
    for h in hyps.iter_mut() {
        h.log_joint += ln_growth;
        h.run_length += 1;
    }
    hyps.insert(
        0,
        RunHypothesis {
            run_length: 0,
            log_joint: lse_prior + ln_hazard,
            stats: SufficientStats::zeros(k, d),
            log_ml: 0.0,
        },
    );
}

pub(crate) fn posterior_of(hyps: &[RunHypothesis]) -> RunLengthPosterior {
    let weights: Vec<f64> = hyps.iter().map(|h| h.log_joint).collect();
    let evidence = log_sum_exp(&weights);
    RunLengthPosterior::from_entries(
        hyps.iter()
            .map(|h| (h.run_length, fm::exp(h.log_joint - evidence)))
            .collect(),
    )
}

/// Windowed changepoint extraction.
///
/// For each window start `l0` in `0 ..= cp_search_max`, sums the posterior
/// mass of run lengths `l0 ..= l0 + cp_window_len`; if the best window
/// reaches `declare_threshold`, returns an event at the most probable run
/// length within it (ties toward smaller run lengths, i.e. the most recent
/// change). Run length `t` -- the whole stream, "no change ever" -- never
/// counts as evidence for a change, which keeps the first few steps of a
/// stream from trivially filling every window.
pub fn extract_changepoint(
    post: &RunLengthPosterior,
    config: &DetectorConfig,
    t: usize,
) -> Option<ChangeEvent> {
    let mut best_l0 = 0usize;
    let mut best_mass = f64::NEG_INFINITY;
    for l0 in 0..=config.cp_search_max {
        let hi = l0 + config.cp_window_len;
        let mut mass = 0.0;
        for (r, p) in post.iter() {
            if r >= l0 && r <= hi && r < t {
                mass += p;
            }
        }
        if mass > best_mass {
            best_mass = mass;
            best_l0 = l0;
        }
    }
    if best_mass < config.declare_threshold {
        return None;
    }
    let hi = best_l0 + config.cp_window_len;
    let mut r_star = None;
    let mut p_star = f64::NEG_INFINITY;
    for (r, p) in post.iter() {
        if r >= best_l0 && r <= hi && r < t && p > p_star {
            p_star = p;
            r_star = Some(r);
        }
    }
    let r_star = r_star?;
    Some(ChangeEvent {
        changepoint_at: t - r_star,
        declared_at: t,
        window_mass: best_mass,
        posterior: post.clone(),
    })
}

/// The streaming run-length filter. One detector per stream; stepping is
/// strictly sequential, but detectors are plain values and may be moved
/// freely between threads to run many streams in parallel.
#[derive(Debug, Clone)]
pub struct Detector {
    eta: Hyperparameters,
    config: DetectorConfig,
    pub(crate) hyps: Vec<RunHypothesis>,
    t: usize,
    emitted: Vec<usize>,
    ln_hazard: f64,
    ln_growth: f64,
}

impl Detector {
    /// Fresh detector: a single `r = 0` hypothesis with probability one and
    /// empty statistics.
    pub fn new(eta: Hyperparameters, config: DetectorConfig) -> Result<Self> {
        config.validate()?;
        let hyps = alloc::vec![RunHypothesis {
            run_length: 0,
            log_joint: 0.0,
            stats: SufficientStats::zeros(eta.covariate_dim(), eta.observation_dim()),
            log_ml: 0.0,
        }];
        let ln_hazard = fm::ln(config.hazard);
        let ln_growth = fm::ln_1p(-config.hazard);
        Ok(Detector {
            eta,
            config,
            hyps,
            t: 0,
            emitted: Vec::new(),
            ln_hazard,
            ln_growth,
        })
    }

    #[inline]
    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    #[inline]
    pub(crate) fn ln_hazard(&self) -> f64 {
        self.ln_hazard
    }

    #[inline]
    pub(crate) fn ln_growth(&self) -> f64 {
        self.ln_growth
    }

    #[inline]
    pub fn hyperparameters(&self) -> &Hyperparameters {
        &self.eta
    }

    /// Number of observations absorbed so far.
    #[inline]
    pub fn observations_seen(&self) -> usize {
        self.t
    }

    /// Current normalized run-length posterior.
    pub fn run_length_posterior(&self) -> RunLengthPosterior {
        posterior_of(&self.hyps)
    }

    /// Log model evidence `log f(Y_{1:t})`: the log-sum of the run-length
    /// joint weights. Exact only while no hypothesis has been truncated.
    pub fn log_evidence(&self) -> f64 {
        let weights: Vec<f64> = self.hyps.iter().map(|h| h.log_joint).collect();
        log_sum_exp(&weights)
    }

    pub(crate) fn check_input(&self, x: &[f64], y: &[f64]) -> Result<()> {
        if x.len() != self.eta.covariate_dim() || y.len() != self.eta.observation_dim() {
            return Err(Error::DimensionMismatch {
                context: "detector step input",
            });
        }
        if !x.iter().chain(y.iter()).all(|v| v.is_finite()) {
            return Err(Error::DomainError {
                what: "non-finite observation",
                value: f64::NAN,
            });
        }
        Ok(())
    }

    /// Absorb one observation without extraction or truncation.
    pub(crate) fn advance(&mut self, x: &[f64], y: &[f64]) -> Result<()> {
        self.check_input(x, y)?;
        advance_scored(&self.eta, self.ln_hazard, self.ln_growth, &mut self.hyps, x, y)?;
        self.t += 1;
        let weights: Vec<f64> = self.hyps.iter().map(|h| h.log_joint).collect();
        if log_sum_exp(&weights) == f64::NEG_INFINITY {
            return Err(Error::NumericalUnderflow);
        }
        Ok(())
    }

    /// Extraction plus duplicate suppression: candidates whose location lies
    /// within `cp_window_len` of an already published location are dropped,
    /// so one regime change yields one event even though the winning window
    /// keeps re-firing while the new run is young.
    pub(crate) fn fresh_candidate(&self, post: &RunLengthPosterior) -> Option<ChangeEvent> {
        let ev = extract_changepoint(post, &self.config, self.t)?;
        let dup = self.emitted.iter().any(|&loc| {
            let d = if ev.changepoint_at >= loc {
                ev.changepoint_at - loc
            } else {
                loc - ev.changepoint_at
            };
            d <= self.config.cp_window_len
        });
        if dup {
            None
        } else {
            Some(ev)
        }
    }

    /// Publication gate: the winning run must already contain
    /// `declare_min_run` observations.
    pub(crate) fn mature(&self, ev: &ChangeEvent) -> bool {
        ev.declared_at - ev.changepoint_at >= self.config.declare_min_run
    }

    pub(crate) fn record_published(&mut self, location: usize) {
        self.emitted.push(location);
    }

    /// Drop hypotheses below the truncation floor, always keeping the
    /// current step's `r = 0` hypothesis and the most probable one. Returns
    /// the surviving run lengths (ascending).
    pub(crate) fn truncate(&mut self) -> Vec<usize> {
        let post = posterior_of(&self.hyps);
        let keep_argmax = post.argmax();
        let floor = self.config.trunc_threshold;
        self.hyps
            .retain(|h| h.run_length == 0 || h.run_length == keep_argmax || {
                post.prob(h.run_length) >= floor
            });
        self.hyps.iter().map(|h| h.run_length).collect()
    }

    /// Process one observation: advance, extract, publish, truncate.
    pub fn step(&mut self, x: &[f64], y: &[f64]) -> Result<StepResult> {
        self.advance(x, y)?;
        let posterior = posterior_of(&self.hyps);
        let mut event = None;
        if let Some(ev) = self.fresh_candidate(&posterior) {
            if self.mature(&ev) {
                self.record_published(ev.changepoint_at);
                event = Some(ev);
            }
        }
        self.truncate();
        Ok(StepResult { posterior, event })
    }

    /// Plain-data snapshot for persistence.
    pub fn state(&self) -> DetectorState {
        DetectorState {
            observations_seen: self.t,
            published_locations: self.emitted.clone(),
            hypotheses: self.hyps.iter().map(hypothesis_state).collect(),
        }
    }

    /// Rebuild a detector from a snapshot. Cached marginals are recomputed,
    /// so a resumed detector continues bit-identically.
    pub fn from_state(
        eta: Hyperparameters,
        config: DetectorConfig,
        state: &DetectorState,
    ) -> Result<Self> {
        config.validate()?;
        let hyps = state
            .hypotheses
            .iter()
            .map(|h| hypothesis_from_state(&eta, h))
            .collect::<Result<Vec<_>>>()?;
        if hyps.is_empty() {
            return Err(Error::InvalidConfig {
                what: "snapshot holds no hypotheses",
            });
        }
        let ln_hazard = fm::ln(config.hazard);
        let ln_growth = fm::ln_1p(-config.hazard);
        Ok(Detector {
            eta,
            config,
            hyps,
            t: state.observations_seen,
            emitted: state.published_locations.clone(),
            ln_hazard,
            ln_growth,
        })
    }
}

pub(crate) fn hypothesis_state(h: &RunHypothesis) -> HypothesisState {
    HypothesisState {
        run_length: h.run_length,
        log_joint: h.log_joint,
        n: h.stats.count(),
        yty: h.stats.yty().as_slice().to_vec(),
        xtx: h.stats.xtx().as_slice().to_vec(),
        xty: h.stats.xty().as_slice().to_vec(),
    }
}

pub(crate) fn hypothesis_from_state(
    eta: &Hyperparameters,
    h: &HypothesisState,
) -> Result<RunHypothesis> {
    let k = eta.covariate_dim();
    let d = eta.observation_dim();
    let stats = SufficientStats::from_parts(
        crate::numerics::SymMatrix::new(d, h.yty.clone())?,
        crate::numerics::SymMatrix::new(k, h.xtx.clone())?,
        crate::numerics::RectMatrix::new(k, d, h.xty.clone())?,
        h.n,
    )?;
    let log_ml = log_marginal(eta, &stats)?;
    Ok(RunHypothesis {
        run_length: h.run_length,
        log_joint: h.log_joint,
        stats,
        log_ml,
    })
}
