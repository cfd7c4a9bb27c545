//! The `detect` and `replay` subcommands: stream a CSV through the detector,
//! emit the event file, and optionally the per-step run-length posterior
//! matrix and a resumable state snapshot.

use std::path::{Path, PathBuf};

use bocpd_core::engine::{Detector, RunLengthPosterior};
use bocpd_core::outlier::{Event, GuardedDetector, GuardedDetectorState};

use crate::config::RunConfig;
use crate::events::{write_events, EventRow};
use crate::ingest::{covariates_for, ingest};
use crate::snapshot::{self, Snapshot, StreamState};
use crate::{config, CliError, Result};

/// A live engine: the plain filter or the guarded one.
pub enum Engine {
    Plain(Detector),
    Guarded(GuardedDetector),
}

impl Engine {
    pub fn step(&mut self, x: &[f64], y: &[f64]) -> Result<(RunLengthPosterior, Vec<Event>)> {
        match self {
            Engine::Plain(det) => {
                let res = det.step(x, y)?;
                let events = res
                    .event
                    .map(|c| vec![Event::Change(c)])
                    .unwrap_or_default();
                Ok((res.posterior, events))
            }
            Engine::Guarded(g) => {
                let res = g.step(x, y)?;
                Ok((res.posterior, res.events))
            }
        }
    }

    pub fn observations_seen(&self) -> usize {
        match self {
            Engine::Plain(det) => det.observations_seen(),
            Engine::Guarded(g) => g.observations_seen(),
        }
    }
}

pub struct DetectArgs {
    pub config: Option<PathBuf>,
    pub input: PathBuf,
    pub events: PathBuf,
    pub posterior_out: Option<PathBuf>,
    pub snapshot_out: Option<PathBuf>,
    pub resume: Option<PathBuf>,
    pub overrides: Vec<String>,
}

pub fn run(args: &DetectArgs) -> Result<()> {
    let (run_config, mut engine, mut stream_state) = match (&args.resume, &args.config) {
        (Some(_), Some(_)) => {
            return Err(CliError::Usage(
                "give either --config (fresh run) or --resume (continue), not both".into(),
            ))
        }
        (Some(snap_path), None) => {
            if !args.overrides.is_empty() {
                return Err(CliError::Usage(
                    "--set cannot alter a resumed run; the snapshot pins its configuration".into(),
                ));
            }
            load_resume(snap_path)?
        }
        (None, Some(cfg_path)) => {
            let rc = config::load(cfg_path, &args.overrides)?;
            let eta = rc.eta.clone().ok_or_else(|| {
                CliError::Data("detect needs a [hyperparameters] section".into())
            })?;
            let det = Detector::new(eta, rc.detector.clone())?;
            let engine = match &rc.outlier {
                Some(oc) => Engine::Guarded(GuardedDetector::new(det, oc.clone())?),
                None => Engine::Plain(det),
            };
            (rc, engine, StreamState::default())
        }
        (None, None) => {
            return Err(CliError::Usage(
                "detect needs --config (or --resume for a continued run)".into(),
            ))
        }
    };

    let outcome = stream_file(
        &args.input,
        &run_config,
        &mut engine,
        &mut stream_state,
    )?;
    write_events(&args.events, &outcome.events)?;
    if let Some(p) = &args.posterior_out {
        write_posterior_matrix(p, &outcome.posteriors, &stream_state)?;
    }
    if let Some(p) = &args.snapshot_out {
        write_snapshot(p, &run_config, &engine, &stream_state)?;
    }
    eprintln!(
        "processed {} observations ({} skipped), {} events",
        engine.observations_seen(),
        stream_state.skipped,
        outcome.events.len()
    );
    Ok(())
}

pub struct StreamOutcome {
    pub events: Vec<EventRow>,
    /// One posterior per processed observation of this invocation.
    pub posteriors: Vec<RunLengthPosterior>,
}

/// Feed one CSV through the engine, extending `stream_state` and returning
/// emitted events with observation indices mapped back to raw timestamps.
pub fn stream_file(
    input: &Path,
    run_config: &RunConfig,
    engine: &mut Engine,
    stream_state: &mut StreamState,
) -> Result<StreamOutcome> {
    let ingested = ingest(input, &run_config.raw.stream)?;
    stream_state.skipped += ingested.skipped;

    let mut events = Vec::new();
    let mut posteriors = Vec::new();
    for record in &ingested.records {
        if let Some(last) = stream_state.last_time {
            if record.time_value < last {
                return Err(CliError::Data(format!(
                    "{} row {}: timestamps must not precede the resumed stream",
                    input.display(),
                    record.source_row
                )));
            }
        }
        let origin = *stream_state.origin.get_or_insert(record.time_value);
        stream_state.last_time = Some(record.time_value);
        stream_state
            .kept
            .push((record.raw_time.clone(), record.time_value));

        let x = covariates_for(record, origin, &run_config.raw.covariates);
        let (posterior, step_events) = engine.step(&x, &record.values)?;
        posteriors.push(posterior);
        for ev in step_events {
            events.push(event_row(&ev, &stream_state.kept));
        }
    }
    Ok(StreamOutcome { events, posteriors })
}

fn time_label(kept: &[(String, f64)], obs_index: usize) -> String {
    if obs_index == 0 {
        // a change located at the very start of the stream
        return kept
            .first()
            .map(|(raw, _)| raw.clone())
            .unwrap_or_else(|| "0".into());
    }
    kept.get(obs_index - 1)
        .map(|(raw, _)| raw.clone())
        .unwrap_or_else(|| obs_index.to_string())
}

fn event_row(ev: &Event, kept: &[(String, f64)]) -> EventRow {
    match ev {
        Event::Change(c) => EventRow {
            kind: "change".into(),
            changepoint_time: time_label(kept, c.changepoint_at),
            declared_time: time_label(kept, c.declared_at),
            posterior_mass: c.window_mass,
        },
        Event::Outlier(o) => EventRow {
            kind: "outlier".into(),
            changepoint_time: time_label(kept, o.outlier_time),
            declared_time: time_label(kept, o.detected_at),
            posterior_mass: o.posterior_prob,
        },
    }
}

/// Run-length posterior matrix: one row per observation, one column per run
/// length up to the largest ever tracked. Only emitted on request; it is
/// O(t * r) and large.
fn write_posterior_matrix(
    path: &Path,
    posteriors: &[RunLengthPosterior],
    stream_state: &StreamState,
) -> Result<()> {
    let max_r = posteriors
        .iter()
        .flat_map(|p| p.iter().map(|(r, _)| r))
        .max()
        .unwrap_or(0);
    let mut out = String::from("t");
    for r in 0..=max_r {
        out.push_str(&format!(",r{r}"));
    }
    out.push('\n');
    let offset = stream_state.kept.len() - posteriors.len();
    for (i, post) in posteriors.iter().enumerate() {
        out.push_str(&stream_state.kept[offset + i].0);
        let mut row = vec![None::<f64>; max_r + 1];
        for (r, p) in post.iter() {
            row[r] = Some(p);
        }
        for cell in row {
            match cell {
                Some(p) => out.push_str(&format!(",{p}")),
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    std::fs::write(path, out)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn write_snapshot(
    path: &Path,
    run_config: &RunConfig,
    engine: &Engine,
    stream_state: &StreamState,
) -> Result<()> {
    let eta = run_config
        .eta
        .as_ref()
        .ok_or_else(|| CliError::Data("snapshot needs resolved hyperparameters".into()))?;
    let raw = snapshot::inline_hyperparameters(&run_config.raw, eta);
    let (guarded, detector, bank) = match engine {
        Engine::Plain(det) => (false, det.state(), None),
        Engine::Guarded(g) => {
            let GuardedDetectorState { detector, bank } = g.state();
            (true, detector, Some(bank))
        }
    };
    snapshot::write(
        path,
        &Snapshot {
            raw_config: raw,
            guarded,
            detector,
            bank,
            stream: stream_state.clone(),
        },
    )
}

fn load_resume(path: &Path) -> Result<(RunConfig, Engine, StreamState)> {
    let snap = snapshot::read(path)?;
    let run_config = config::resolve(snap.raw_config.clone(), Path::new("."))?;
    let eta = run_config
        .eta
        .clone()
        .ok_or_else(|| CliError::Data("snapshot config lacks hyperparameters".into()))?;
    let engine = if snap.guarded {
        let oc = run_config
            .outlier
            .clone()
            .ok_or_else(|| CliError::Data("snapshot says guarded but outlier is disabled".into()))?;
        let state = GuardedDetectorState {
            detector: snap.detector.clone(),
            bank: snap.bank.clone().unwrap_or_default(),
        };
        Engine::Guarded(GuardedDetector::from_state(
            eta,
            run_config.detector.clone(),
            oc,
            &state,
        )?)
    } else {
        Engine::Plain(Detector::from_state(
            eta,
            run_config.detector.clone(),
            &snap.detector,
        )?)
    };
    Ok((run_config, engine, snap.stream))
}

/// `replay`: continue a snapshotted run over the remaining observations.
pub struct ReplayArgs {
    pub resume: PathBuf,
    pub input: PathBuf,
    pub events: PathBuf,
    pub posterior_out: Option<PathBuf>,
    pub snapshot_out: Option<PathBuf>,
}

pub fn run_replay(args: &ReplayArgs) -> Result<()> {
    run(&DetectArgs {
        config: None,
        input: args.input.clone(),
        events: args.events.clone(),
        posterior_out: args.posterior_out.clone(),
        snapshot_out: args.snapshot_out.clone(),
        resume: Some(args.resume.clone()),
        overrides: Vec::new(),
    })
}
