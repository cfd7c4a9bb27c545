//! Versioned detector snapshots so monitoring can resume across process
//! restarts. Text format with bit-exact floats (hex of the IEEE-754 bits):
//! a resumed run continues with byte-identical state. The snapshot embeds
//! the resolved configuration, so `replay` needs no config file, and a
//! mismatched snapshot version is refused outright.

use std::fmt::Write as _;
use std::path::Path;

use bocpd_core::engine::{DetectorState, HypothesisState};
use bocpd_core::outlier::ShadowEntryState;

use crate::config::{EtaFile, HyperSection, RawConfig};
use crate::{CliError, Result};

const MAGIC: &str = "BOCPD-SNAPSHOT v1";

/// Ingestion bookkeeping carried across a resume: the stream's time origin,
/// the monotonicity watermark, the skip counter, and the timestamps of all
/// delivered observations (events may point back into the past, so the
/// mapping from observation index to timestamp must survive).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StreamState {
    pub origin: Option<f64>,
    pub last_time: Option<f64>,
    pub skipped: usize,
    pub kept: Vec<(String, f64)>,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub raw_config: RawConfig,
    pub guarded: bool,
    pub detector: DetectorState,
    pub bank: Option<Vec<ShadowEntryState>>,
    pub stream: StreamState,
}

fn bits(v: f64) -> String {
    format!("{:016x}", v.to_bits())
}

fn unbits(s: &str) -> Result<f64> {
    u64::from_str_radix(s, 16)
        .map(f64::from_bits)
        .map_err(|_| CliError::Data(format!("snapshot: bad float bits `{s}`")))
}

fn push_vec(out: &mut String, label: &str, v: &[f64]) {
    let _ = write!(out, "{label}");
    for x in v {
        let _ = write!(out, " {}", bits(*x));
    }
    out.push('\n');
}

fn push_hypothesis(out: &mut String, h: &HypothesisState) {
    let _ = writeln!(out, "hyp {} {} {}", h.run_length, bits(h.log_joint), h.n);
    push_vec(out, "yty", &h.yty);
    push_vec(out, "xtx", &h.xtx);
    push_vec(out, "xty", &h.xty);
}

pub fn write(path: &Path, snap: &Snapshot) -> Result<()> {
    // The embedded config must be self-contained: inline prior, no file
    // references.
    let raw = snap.raw_config.clone();
    match &raw.hyperparameters {
        Some(h) if h.file.is_none() => {}
        _ => {
            return Err(CliError::Data(
                "snapshot config must carry inline hyperparameters".into(),
            ))
        }
    }
    let config_toml =
        toml::to_string(&raw).map_err(|e| CliError::Data(format!("snapshot config: {e}")))?;
    let config_lines: Vec<&str> = config_toml.lines().collect();

    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "config_lines {}", config_lines.len());
    for line in &config_lines {
        let _ = writeln!(out, "{line}");
    }
    let _ = writeln!(out, "guarded {}", snap.guarded as u8);
    let _ = writeln!(
        out,
        "stream skipped={} origin={} last={}",
        snap.stream.skipped,
        snap.stream.origin.map(bits).unwrap_or_else(|| "-".into()),
        snap.stream.last_time.map(bits).unwrap_or_else(|| "-".into()),
    );
    let _ = writeln!(out, "kept {}", snap.stream.kept.len());
    for (raw_time, tv) in &snap.stream.kept {
        let _ = writeln!(out, "t {} {raw_time}", bits(*tv));
    }
    let _ = writeln!(
        out,
        "detector seen={} published={}",
        snap.detector.observations_seen,
        snap.detector
            .published_locations
            .iter()
            .map(|l| l.to_string())
            .collect::<Vec<_>>()
            .join(",")
    );
    let _ = writeln!(out, "hypotheses {}", snap.detector.hypotheses.len());
    for h in &snap.detector.hypotheses {
        push_hypothesis(&mut out, h);
    }
    match &snap.bank {
        None => {
            let _ = writeln!(out, "bank -");
        }
        Some(entries) => {
            let _ = writeln!(out, "bank {}", entries.len());
            for e in entries {
                let _ = writeln!(out, "entry {}", e.time);
                push_vec(&mut out, "x", &e.x);
                push_vec(&mut out, "y", &e.y);
                let _ = writeln!(out, "hypotheses {}", e.hypotheses.len());
                for h in &e.hypotheses {
                    push_hypothesis(&mut out, h);
                }
            }
        }
    }
    std::fs::write(path, out)
        .map_err(|e| CliError::Data(format!("cannot write snapshot {}: {e}", path.display())))
}

struct LineReader<'a> {
    lines: std::str::Lines<'a>,
    line_no: usize,
}

impl<'a> LineReader<'a> {
    fn next(&mut self) -> Result<&'a str> {
        self.line_no += 1;
        self.lines
            .next()
            .ok_or_else(|| CliError::Data("snapshot: unexpected end of file".into()))
    }

    fn expect_prefix(&mut self, prefix: &str) -> Result<&'a str> {
        let line = self.next()?;
        line.strip_prefix(prefix)
            .map(str::trim)
            .ok_or_else(|| {
                CliError::Data(format!(
                    "snapshot line {}: expected `{prefix}...`, got `{line}`",
                    self.line_no
                ))
            })
    }
}

fn parse_vec(line: &str, label: &str, len: usize) -> Result<Vec<f64>> {
    let rest = line
        .strip_prefix(label)
        .ok_or_else(|| CliError::Data(format!("snapshot: expected `{label}` row")))?;
    let vals: Vec<f64> = rest
        .split_whitespace()
        .map(unbits)
        .collect::<Result<_>>()?;
    if vals.len() != len {
        return Err(CliError::Data(format!(
            "snapshot: `{label}` row has {} values, expected {len}",
            vals.len()
        )));
    }
    Ok(vals)
}

fn parse_hypothesis(r: &mut LineReader, k: usize, d: usize) -> Result<HypothesisState> {
    let head = r.expect_prefix("hyp")?;
    let parts: Vec<&str> = head.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(CliError::Data("snapshot: malformed hypothesis header".into()));
    }
    let run_length = parts[0]
        .parse()
        .map_err(|_| CliError::Data("snapshot: bad run length".into()))?;
    let log_joint = unbits(parts[1])?;
    let n = parts[2]
        .parse()
        .map_err(|_| CliError::Data("snapshot: bad count".into()))?;
    let yty = parse_vec(r.next()?, "yty", d * d)?;
    let xtx = parse_vec(r.next()?, "xtx", k * k)?;
    let xty = parse_vec(r.next()?, "xty", k * d)?;
    Ok(HypothesisState {
        run_length,
        log_joint,
        n,
        yty,
        xtx,
        xty,
    })
}

pub fn read(path: &Path) -> Result<Snapshot> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read snapshot {}: {e}", path.display())))?;
    let mut r = LineReader {
        lines: text.lines(),
        line_no: 0,
    };
    let magic = r.next()?;
    if magic != MAGIC {
        return Err(CliError::Data(format!(
            "snapshot version mismatch: expected `{MAGIC}`, found `{magic}`"
        )));
    }
    let n_cfg: usize = r
        .expect_prefix("config_lines")?
        .parse()
        .map_err(|_| CliError::Data("snapshot: bad config_lines".into()))?;
    let mut config_toml = String::new();
    for _ in 0..n_cfg {
        config_toml.push_str(r.next()?);
        config_toml.push('\n');
    }
    let raw_config: RawConfig = toml::from_str(&config_toml)
        .map_err(|e| CliError::Data(format!("snapshot config: {e}")))?;
    let (k, d) = embedded_dims(&raw_config)?;

    let guarded = r.expect_prefix("guarded")? == "1";
    let stream_line = r.expect_prefix("stream")?;
    let mut skipped = 0usize;
    let mut origin = None;
    let mut last_time = None;
    for field in stream_line.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| CliError::Data("snapshot: malformed stream line".into()))?;
        match key {
            "skipped" => {
                skipped = value
                    .parse()
                    .map_err(|_| CliError::Data("snapshot: bad skipped".into()))?
            }
            "origin" if value != "-" => origin = Some(unbits(value)?),
            "last" if value != "-" => last_time = Some(unbits(value)?),
            _ => {}
        }
    }
    let n_kept: usize = r
        .expect_prefix("kept")?
        .parse()
        .map_err(|_| CliError::Data("snapshot: bad kept count".into()))?;
    let mut kept = Vec::with_capacity(n_kept);
    for _ in 0..n_kept {
        let line = r.expect_prefix("t")?;
        let (b, raw_time) = line
            .split_once(' ')
            .ok_or_else(|| CliError::Data("snapshot: malformed time row".into()))?;
        kept.push((raw_time.to_string(), unbits(b)?));
    }

    let det_line = r.expect_prefix("detector")?;
    let mut observations_seen = 0usize;
    let mut published = Vec::new();
    for field in det_line.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| CliError::Data("snapshot: malformed detector line".into()))?;
        match key {
            "seen" => {
                observations_seen = value
                    .parse()
                    .map_err(|_| CliError::Data("snapshot: bad seen".into()))?
            }
            "published" if !value.is_empty() => {
                published = value
                    .split(',')
                    .map(|v| {
                        v.parse()
                            .map_err(|_| CliError::Data("snapshot: bad published".into()))
                    })
                    .collect::<Result<_>>()?;
            }
            _ => {}
        }
    }
    let n_hyp: usize = r
        .expect_prefix("hypotheses")?
        .parse()
        .map_err(|_| CliError::Data("snapshot: bad hypothesis count".into()))?;
    let mut hypotheses = Vec::with_capacity(n_hyp);
    for _ in 0..n_hyp {
        hypotheses.push(parse_hypothesis(&mut r, k, d)?);
    }
    let detector = DetectorState {
        observations_seen,
        published_locations: published,
        hypotheses,
    };

    let bank_head = r.expect_prefix("bank")?;
    let bank = if bank_head == "-" {
        None
    } else {
        let n_entries: usize = bank_head
            .parse()
            .map_err(|_| CliError::Data("snapshot: bad bank count".into()))?;
        let mut entries = Vec::with_capacity(n_entries);
        for _ in 0..n_entries {
            let time = r
                .expect_prefix("entry")?
                .parse()
                .map_err(|_| CliError::Data("snapshot: bad entry time".into()))?;
            let x = parse_vec(r.next()?, "x", k)?;
            let y = parse_vec(r.next()?, "y", d)?;
            let n_h: usize = r
                .expect_prefix("hypotheses")?
                .parse()
                .map_err(|_| CliError::Data("snapshot: bad entry hypothesis count".into()))?;
            let mut hyps = Vec::with_capacity(n_h);
            for _ in 0..n_h {
                hyps.push(parse_hypothesis(&mut r, k, d)?);
            }
            entries.push(ShadowEntryState {
                time,
                x,
                y,
                hypotheses: hyps,
            });
        }
        Some(entries)
    };

    Ok(Snapshot {
        raw_config,
        guarded,
        detector,
        bank,
        stream: StreamState {
            origin,
            last_time,
            skipped,
            kept,
        },
    })
}

fn embedded_dims(raw: &RawConfig) -> Result<(usize, usize)> {
    let h = raw
        .hyperparameters
        .as_ref()
        .ok_or_else(|| CliError::Data("snapshot config lacks hyperparameters".into()))?;
    let lambda0 = h
        .lambda0
        .as_ref()
        .ok_or_else(|| CliError::Data("snapshot config lacks lambda0".into()))?;
    let v0 = h
        .v0
        .as_ref()
        .ok_or_else(|| CliError::Data("snapshot config lacks v0".into()))?;
    Ok((lambda0.len(), v0.len()))
}

/// Inline a resolved prior into a config destined for a snapshot.
pub fn inline_hyperparameters(raw: &RawConfig, eta: &bocpd_core::Hyperparameters) -> RawConfig {
    let eta_file = EtaFile::from_core(eta);
    let mut out = raw.clone();
    out.hyperparameters = Some(HyperSection {
        file: None,
        b0: Some(eta_file.b0),
        lambda0: Some(eta_file.lambda0),
        v0: Some(eta_file.v0),
        nu0: Some(eta_file.nu0),
    });
    out
}
