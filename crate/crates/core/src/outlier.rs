//! In-situ outlier detection and removal for the run-length filter.
//!
//! Wild isolated observations (undetected clouds, sensor glitches) would
//! otherwise be declared changepoints. The guard models them as draws from a
//! fixed Gaussian "outlier state" unrelated to the monitored process, and
//! maintains a bank of *shadow filters*: for each of the last `window`
//! observations, a full run-length filter conditioned on that observation
//! being the outlier -- excluded from every run's sufficient statistics and
//! scored under the outlier density instead. Shadows advance in lockstep with
//! the live filter because the conditional joint of past data cannot be
//! recovered retroactively once the candidate has been absorbed.
//!
//! The joint posterior over (run length, outlier candidate) is only evaluated
//! when the live filter suspects a change, which is exactly when an outlier
//! would do damage. If a candidate's posterior probability clears the
//! confirmation threshold, the live filter's weights and statistics are
//! replaced wholesale by that shadow's: the outlier and its entire effect
//! vanish from the analysis without replaying data. The suspected change is
//! then re-examined against the corrected filter and published only if it
//! survives.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::engine::{
    advance_scored, advance_unscored, hypothesis_from_state, hypothesis_state, posterior_of,
    ChangeEvent, Detector, DetectorState, HypothesisState, RunHypothesis, RunLengthPosterior,
};
use crate::error::{Error, Result};
use crate::fm;
use crate::model::SufficientStats;
use crate::numerics::{cholesky_logdet, log_sum_exp, solve_with_factor, RectMatrix, SymMatrix};

const LN_2PI: f64 = 1.8378770664093453;

/// Configuration of the outlier state and the removal policy.
#[derive(Debug, Clone)]
pub struct OutlierConfig {
    /// Number of trailing observations kept as outlier candidates.
    pub window: usize,
    /// Prior probability that no observation in the window is an outlier.
    pub p0: f64,
    /// Posterior probability a candidate must reach to be confirmed and
    /// removed.
    pub alpha: f64,
    /// Mean of the outlier-generating Gaussian.
    pub mu0: Vec<f64>,
    /// Covariance of the outlier-generating Gaussian.
    pub omega0: SymMatrix,
}

impl Default for OutlierConfig {
    /// Benchmark defaults for a two-component signal on the unit scale.
    fn default() -> Self {
        OutlierConfig {
            window: 20,
            p0: 0.5,
            alpha: 0.9,
            mu0: alloc::vec![0.5, 0.5],
            omega0: SymMatrix::scaled_identity(2, 2.0),
        }
    }
}

impl OutlierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::InvalidConfig {
                what: "outlier window must be positive",
            });
        }
        if !(self.p0 > 0.0 && self.p0 < 1.0) {
            return Err(Error::InvalidConfig {
                what: "p0 must lie in (0, 1)",
            });
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig {
                what: "alpha must lie in (0, 1)",
            });
        }
        if self.mu0.len() != self.omega0.dim() {
            return Err(Error::DimensionMismatch {
                context: "outlier mean / covariance",
            });
        }
        cholesky_logdet(&self.omega0).map(|_| ())
    }

    /// Log prior weight of one candidate. The window's candidate mass
    /// `1 - p0` is spread over `window - 1` slots; a single-slot window keeps
    /// all of it.
    fn ln_candidate_weight(&self) -> f64 {
        let spread = if self.window > 1 {
            (self.window - 1) as f64
        } else {
            1.0
        };
        fm::ln((1.0 - self.p0) / spread)
    }
}

/// Log density of the outlier-generating Gaussian at `y`.
pub fn outlier_log_density(y: &[f64], config: &OutlierConfig) -> Result<f64> {
    let d = config.omega0.dim();
    if y.len() != d || config.mu0.len() != d {
        return Err(Error::DimensionMismatch {
            context: "outlier_log_density input",
        });
    }
    let (factor, logdet) = cholesky_logdet(&config.omega0)?;
    let mut z = RectMatrix::zeros(d, 1);
    for i in 0..d {
        z.set(i, 0, y[i] - config.mu0[i]);
    }
    let solved = solve_with_factor(&factor, &z);
    let mut quad = 0.0;
    for i in 0..d {
        quad += z.get(i, 0) * solved.get(i, 0);
    }
    Ok(-0.5 * (d as f64 * LN_2PI + logdet + quad))
}

/// One outlier candidate: the observation, its index, and the run-length
/// filter conditioned on it being the outlier.
#[derive(Debug, Clone)]
pub struct ShadowEntry {
    time: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    pub(crate) hyps: Vec<RunHypothesis>,
}

impl ShadowEntry {
    #[inline]
    pub fn time(&self) -> usize {
        self.time
    }

    #[inline]
    pub fn observation(&self) -> (&[f64], &[f64]) {
        (&self.x, &self.y)
    }

    /// Per-run sufficient statistics of this shadow (run length, stats).
    pub fn run_stats(&self) -> impl Iterator<Item = (usize, &SufficientStats)> + '_ {
        self.hyps.iter().map(|h| (h.run_length, &h.stats))
    }

    /// Conditional posterior over run lengths under this outlier model.
    pub fn run_length_posterior(&self) -> RunLengthPosterior {
        posterior_of(&self.hyps)
    }
}

/// Ring of shadow filters over the trailing candidate window.
#[derive(Debug, Clone, Default)]
pub struct ShadowBank {
    entries: VecDeque<ShadowEntry>,
}

impl ShadowBank {
    pub fn new() -> Self {
        ShadowBank {
            entries: VecDeque::new(),
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &ShadowEntry> {
        self.entries.iter()
    }

    fn remove(&mut self, time: usize) -> Option<ShadowEntry> {
        let idx = self.entries.iter().position(|e| e.time == time)?;
        self.entries.remove(idx)
    }

    fn retain_run_lengths(&mut self, kept: &[usize]) {
        for entry in &mut self.entries {
            entry
                .hyps
                .retain(|h| kept.binary_search(&h.run_length).is_ok());
        }
    }
}

/// Posterior over "which recent observation, if any, is an outlier",
/// marginalized over run length. Sums to one.
#[derive(Debug, Clone)]
pub struct OutlierPosterior {
    none: f64,
    candidates: Vec<(usize, f64)>,
}

impl OutlierPosterior {
    /// Posterior probability that no candidate is an outlier.
    #[inline]
    pub fn prob_none(&self) -> f64 {
        self.none
    }

    /// Posterior probability that the observation at `time` is the outlier.
    pub fn prob(&self, time: usize) -> f64 {
        self.candidates
            .iter()
            .find(|(s, _)| *s == time)
            .map(|(_, p)| *p)
            .unwrap_or(0.0)
    }

    pub fn candidates(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.candidates.iter().copied()
    }

    /// Most probable candidate (ties toward the earliest).
    pub fn best_candidate(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for &(s, p) in &self.candidates {
            if best.map_or(true, |(_, bp)| p > bp) {
                best = Some((s, p));
            }
        }
        best
    }

    pub fn total_mass(&self) -> f64 {
        self.none + self.candidates.iter().map(|(_, p)| p).sum::<f64>()
    }
}

/// A confirmed-and-removed outlier.
#[derive(Debug, Clone)]
pub struct OutlierEvent {
    /// Observation index of the removed point.
    pub outlier_time: usize,
    /// Its posterior probability at confirmation.
    pub posterior_prob: f64,
    /// Observation index at which the removal happened.
    pub detected_at: usize,
}

/// Detection output, tagged by kind; both kinds share one event stream.
#[derive(Debug, Clone)]
pub enum Event {
    Change(ChangeEvent),
    Outlier(OutlierEvent),
}

/// Whether the outlier machinery runs this step: exactly when the live
/// filter has flagged a suspected change that is not yet published.
pub fn trigger_policy(cp_candidate: Option<&ChangeEvent>) -> bool {
    cp_candidate.is_some()
}

/// Joint posterior over (run length, outlier model), marginalized to the
/// outlier axis. The live filter carries the no-outlier model with prior
/// weight `p0`; each shadow carries one candidate with weight
/// `(1 - p0)/(window - 1)` and its own observation already scored under the
/// outlier density.
pub fn outlier_posterior(
    live: &Detector,
    bank: &ShadowBank,
    config: &OutlierConfig,
) -> Result<OutlierPosterior> {
    if bank.is_empty() {
        return Err(Error::EmptyBank);
    }
    let live_weights: Vec<f64> = live.hyps.iter().map(|h| h.log_joint).collect();
    let ln_w_candidate = config.ln_candidate_weight();

    let mut log_terms = Vec::with_capacity(1 + bank.len());
    log_terms.push(fm::ln(config.p0) + log_sum_exp(&live_weights));
    for entry in &bank.entries {
        let weights: Vec<f64> = entry.hyps.iter().map(|h| h.log_joint).collect();
        log_terms.push(ln_w_candidate + log_sum_exp(&weights));
    }
    let total = log_sum_exp(&log_terms);
    if total == f64::NEG_INFINITY {
        return Err(Error::NumericalUnderflow);
    }
    let none = fm::exp(log_terms[0] - total);
    let candidates = bank
        .entries
        .iter()
        .zip(log_terms[1..].iter())
        .map(|(e, lt)| (e.time, fm::exp(lt - total)))
        .collect();
    Ok(OutlierPosterior { none, candidates })
}

/// If the most probable candidate clears `alpha`, replace the live filter's
/// weights and statistics by that shadow's (the conditional joint is carried
/// forward unnormalized; normalization happens at the next posterior
/// readout), drop the candidate from the bank, and report the removal.
/// Otherwise leave everything untouched.
pub fn confirm_and_remove(
    live: &mut Detector,
    bank: &mut ShadowBank,
    post: &OutlierPosterior,
    config: &OutlierConfig,
) -> Option<OutlierEvent> {
    let (time, prob) = post.best_candidate()?;
    if prob < config.alpha {
        return None;
    }
    let entry = bank.remove(time)?;
    live.hyps = entry.hyps;
    Some(OutlierEvent {
        outlier_time: time,
        posterior_prob: prob,
        detected_at: live.observations_seen(),
    })
}

/// Output of one guarded step.
#[derive(Debug, Clone)]
pub struct GuardedStepResult {
    /// Run-length posterior after the step (post-removal if one happened).
    pub posterior: RunLengthPosterior,
    /// Events published this step: at most one outlier removal and at most
    /// one change declaration.
    pub events: Vec<Event>,
}

/// Plain-data snapshot of a guarded detector.
#[derive(Debug, Clone, PartialEq)]
pub struct GuardedDetectorState {
    pub detector: DetectorState,
    pub bank: Vec<ShadowEntryState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShadowEntryState {
    pub time: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub hypotheses: Vec<HypothesisState>,
}

/// A run-length detector wrapped with the outlier guard. One guarded
/// detector per stream; the bank and the filter move together.
#[derive(Debug, Clone)]
pub struct GuardedDetector {
    live: Detector,
    bank: ShadowBank,
    config: OutlierConfig,
}

impl GuardedDetector {
    pub fn new(live: Detector, config: OutlierConfig) -> Result<Self> {
        config.validate()?;
        if config.mu0.len() != live.hyperparameters().observation_dim() {
            return Err(Error::DimensionMismatch {
                context: "outlier state dimension",
            });
        }
        Ok(GuardedDetector {
            live,
            bank: ShadowBank::new(),
            config,
        })
    }

    #[inline]
    pub fn live(&self) -> &Detector {
        &self.live
    }

    #[inline]
    pub fn bank(&self) -> &ShadowBank {
        &self.bank
    }

    #[inline]
    pub fn outlier_config(&self) -> &OutlierConfig {
        &self.config
    }

    #[inline]
    pub fn observations_seen(&self) -> usize {
        self.live.observations_seen()
    }

    pub fn run_length_posterior(&self) -> RunLengthPosterior {
        self.live.run_length_posterior()
    }

    /// Process one observation.
    ///
    /// Order matters: the live filter and every shadow advance first, the
    /// newest observation joins the bank as its own candidate (so a wild
    /// newest point can be caught on the very step it would have flagged a
    /// change), then extraction runs, the guard fires on suspicion, and
    /// truncation comes last -- after any removal, so a shadow's restored
    /// long-run hypothesis is never lost to the floor prematurely.
    pub fn step(&mut self, x: &[f64], y: &[f64]) -> Result<GuardedStepResult> {
        self.live.check_input(x, y)?;
        let pre_hyps = self.live.hyps.clone();
        self.live.advance(x, y)?;
        let t = self.live.observations_seen();
        let ln_hazard = self.live.ln_hazard();
        let ln_growth = self.live.ln_growth();
        let eta = self.live.hyperparameters().clone();

        for entry in &mut self.bank.entries {
            advance_scored(&eta, ln_hazard, ln_growth, &mut entry.hyps, x, y)?;
        }
        while self
            .bank
            .entries
            .front()
            .is_some_and(|e| e.time + self.config.window <= t)
        {
            self.bank.entries.pop_front();
        }
        let mut shadow_hyps = pre_hyps;
        advance_unscored(ln_hazard, ln_growth, &mut shadow_hyps);
        let od = outlier_log_density(y, &self.config)?;
        for h in &mut shadow_hyps {
            h.log_joint += od;
        }
        self.bank.entries.push_back(ShadowEntry {
            time: t,
            x: x.to_vec(),
            y: y.to_vec(),
            hyps: shadow_hyps,
        });

        let mut posterior = posterior_of(&self.live.hyps);
        let mut events = Vec::new();
        let mut candidate = self.live.fresh_candidate(&posterior);

        if trigger_policy(candidate.as_ref()) {
            let post_o = outlier_posterior(&self.live, &self.bank, &self.config)?;
            if let Some(ev) =
                confirm_and_remove(&mut self.live, &mut self.bank, &post_o, &self.config)
            {
                events.push(Event::Outlier(ev));
                posterior = posterior_of(&self.live.hyps);
                candidate = self.live.fresh_candidate(&posterior);
            }
            if let Some(ev) = candidate {
                if self.live.mature(&ev) {
                    self.live.record_published(ev.changepoint_at);
                    events.push(Event::Change(ev));
                }
            }
        }

        let kept = self.live.truncate();
        self.bank.retain_run_lengths(&kept);
        Ok(GuardedStepResult { posterior, events })
    }

    pub fn state(&self) -> GuardedDetectorState {
        GuardedDetectorState {
            detector: self.live.state(),
            bank: self
                .bank
                .entries
                .iter()
                .map(|e| ShadowEntryState {
                    time: e.time,
                    x: e.x.clone(),
                    y: e.y.clone(),
                    hypotheses: e.hyps.iter().map(hypothesis_state).collect(),
                })
                .collect(),
        }
    }

    pub fn from_state(
        eta: crate::model::Hyperparameters,
        dconfig: crate::engine::DetectorConfig,
        oconfig: OutlierConfig,
        state: &GuardedDetectorState,
    ) -> Result<Self> {
        oconfig.validate()?;
        let live = Detector::from_state(eta, dconfig, &state.detector)?;
        let mut bank = ShadowBank::new();
        for e in &state.bank {
            let hyps = e
                .hypotheses
                .iter()
                .map(|h| hypothesis_from_state(live.hyperparameters(), h))
                .collect::<Result<Vec<_>>>()?;
            bank.entries.push_back(ShadowEntry {
                time: e.time,
                x: e.x.clone(),
                y: e.y.clone(),
                hyps,
            });
        }
        Ok(GuardedDetector {
            live,
            bank,
            config: oconfig,
        })
    }
}
