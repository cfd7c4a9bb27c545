//! Run configuration: a TOML file with sections for the prior, the detector,
//! the outlier guard, the covariate recipe, and the input column mapping.
//! Unknown keys are rejected so sweep overrides cannot silently miss.

use std::path::{Path, PathBuf};

use bocpd_core::engine::DetectorConfig;
use bocpd_core::model::Hyperparameters;
use bocpd_core::numerics::{RectMatrix, SymMatrix};
use bocpd_core::outlier::OutlierConfig;
use serde::{Deserialize, Serialize};

use crate::{CliError, Result};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default)]
    pub hyperparameters: Option<HyperSection>,
    #[serde(default)]
    pub detector: DetectorSection,
    #[serde(default)]
    pub outlier: OutlierSection,
    #[serde(default)]
    pub covariates: CovariateSection,
    #[serde(default)]
    pub stream: StreamSection,
}

/// Prior parameters, inline or referenced from a separate file (as written
/// by `estimate-priors`). A relative `file` path resolves against the
/// directory of the config file itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b0: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda0: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v0: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu0: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorSection {
    pub hazard: f64,
    pub trunc_threshold: f64,
    pub cp_window_len: usize,
    pub cp_search_max: usize,
    pub declare_threshold: f64,
    pub declare_min_run: usize,
}

impl Default for DetectorSection {
    fn default() -> Self {
        let d = DetectorConfig::default();
        DetectorSection {
            hazard: d.hazard,
            trunc_threshold: d.trunc_threshold,
            cp_window_len: d.cp_window_len,
            cp_search_max: d.cp_search_max,
            declare_threshold: d.declare_threshold,
            declare_min_run: d.declare_min_run,
        }
    }
}

impl DetectorSection {
    pub fn to_core(&self) -> DetectorConfig {
        DetectorConfig {
            hazard: self.hazard,
            trunc_threshold: self.trunc_threshold,
            cp_window_len: self.cp_window_len,
            cp_search_max: self.cp_search_max,
            declare_threshold: self.declare_threshold,
            declare_min_run: self.declare_min_run,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutlierSection {
    pub enabled: bool,
    pub window: usize,
    pub p0: f64,
    pub alpha: f64,
    pub mu0: Vec<f64>,
    pub omega0: Vec<Vec<f64>>,
}

impl Default for OutlierSection {
    fn default() -> Self {
        OutlierSection {
            enabled: true,
            window: 20,
            p0: 0.5,
            alpha: 0.9,
            mu0: vec![0.5, 0.5],
            omega0: vec![vec![2.0, 0.0], vec![0.0, 2.0]],
        }
    }
}

impl OutlierSection {
    pub fn to_core(&self) -> Result<OutlierConfig> {
        let omega0 = matrix_from_rows(&self.omega0, "outlier.omega0")?;
        let d = omega0.rows();
        let cfg = OutlierConfig {
            window: self.window,
            p0: self.p0,
            alpha: self.alpha,
            mu0: self.mu0.clone(),
            omega0: sym_from_rect(omega0, d)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CovariateSection {
    /// Period of the harmonic pair, in the stream's day units.
    pub period_days: f64,
    /// Divisor applied to the day index for the trend column.
    pub trend_div: f64,
    /// Whether an intercept column is prepended.
    pub intercept: bool,
}

impl Default for CovariateSection {
    fn default() -> Self {
        CovariateSection {
            period_days: 365.0,
            trend_div: 365.0,
            intercept: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StreamSection {
    /// Timestamp column: integer day indices or ISO `YYYY-MM-DD` dates.
    pub time_col: String,
    /// Signal columns, in model order.
    pub value_cols: Vec<String>,
    /// Optional quality column; rows whose value is not in `qa_ok` are
    /// skipped entirely.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qa_col: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qa_ok: Option<Vec<String>>,
    /// Optional covariate columns taken directly from the file instead of
    /// the harmonic recipe (an intercept is still prepended when the recipe
    /// says so).
    pub x_cols: Vec<String>,
}

impl Default for StreamSection {
    fn default() -> Self {
        StreamSection {
            time_col: "t".into(),
            value_cols: vec!["y1".into(), "y2".into()],
            qa_col: None,
            qa_ok: None,
            x_cols: Vec::new(),
        }
    }
}

/// Hyperparameter file schema, as produced by `estimate-priors`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EtaFile {
    pub b0: Vec<Vec<f64>>,
    pub lambda0: Vec<Vec<f64>>,
    pub v0: Vec<Vec<f64>>,
    pub nu0: f64,
}

fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<RectMatrix> {
    let slices: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
    RectMatrix::from_rows(&slices)
        .map_err(|e| CliError::Data(format!("{what}: {e}")))
}

fn sym_from_rect(m: RectMatrix, dim: usize) -> Result<SymMatrix> {
    if m.rows() != dim || m.cols() != dim {
        return Err(CliError::Data("matrix must be square".into()));
    }
    SymMatrix::new(dim, m.as_slice().to_vec()).map_err(|e| CliError::Data(e.to_string()))
}

impl EtaFile {
    pub fn to_core(&self) -> Result<Hyperparameters> {
        let b0 = matrix_from_rows(&self.b0, "b0")?;
        let lambda0 = matrix_from_rows(&self.lambda0, "lambda0")?;
        let v0 = matrix_from_rows(&self.v0, "v0")?;
        let k = lambda0.rows();
        let d = v0.rows();
        Ok(Hyperparameters::new(
            b0,
            sym_from_rect(lambda0, k)?,
            sym_from_rect(v0, d)?,
            self.nu0,
        )?)
    }

    pub fn from_core(eta: &Hyperparameters) -> EtaFile {
        let rect_rows = |m: &RectMatrix| -> Vec<Vec<f64>> {
            (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
        };
        let sym_rows = |m: &SymMatrix| -> Vec<Vec<f64>> {
            (0..m.dim())
                .map(|i| (0..m.dim()).map(|j| m.get(i, j)).collect())
                .collect()
        };
        EtaFile {
            b0: rect_rows(eta.b0()),
            lambda0: sym_rows(eta.lambda0()),
            v0: sym_rows(eta.v0()),
            nu0: eta.nu0(),
        }
    }

    /// Deterministic TOML rendering with shortest-round-trip floats.
    pub fn render(&self) -> String {
        let rows = |name: &str, m: &[Vec<f64>]| -> String {
            let body = m
                .iter()
                .map(|r| {
                    let cells: Vec<String> = r.iter().map(float_literal).collect();
                    format!("    [{}],", cells.join(", "))
                })
                .collect::<Vec<_>>()
                .join("\n");
            format!("{name} = [\n{body}\n]\n")
        };
        format!(
            "{}{}{}nu0 = {}\n",
            rows("b0", &self.b0),
            rows("lambda0", &self.lambda0),
            rows("v0", &self.v0),
            float_literal(&self.nu0)
        )
    }
}

/// Shortest-round-trip float rendering that stays a TOML float.
fn float_literal(v: &f64) -> String {
    let s = format!("{v}");
    if s.contains('.') || s.contains('e') || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}

/// Fully resolved configuration ready to build detectors from.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub raw: RawConfig,
    pub eta: Option<Hyperparameters>,
    pub detector: DetectorConfig,
    pub outlier: Option<OutlierConfig>,
}

/// Parse a `--set key=value` override; the value is parsed as a TOML literal
/// (so `detector.cp_window_len=3` and `hyperparameters.nu0=4.5` both work),
/// falling back to a bare string.
pub fn parse_override(spec: &str) -> Result<(Vec<String>, toml::Value)> {
    let (path, raw_value) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got `{spec}`")))?;
    let path: Vec<String> = path.split('.').map(|s| s.trim().to_string()).collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(CliError::Usage(format!("bad --set key in `{spec}`")));
    }
    let value = match format!("v = {raw_value}").parse::<toml::Table>() {
        Ok(t) => t["v"].clone(),
        Err(_) => toml::Value::String(raw_value.to_string()),
    };
    Ok((path, value))
}

fn apply_override(root: &mut toml::Value, path: &[String], value: toml::Value) -> Result<()> {
    let mut node = root;
    for key in &path[..path.len() - 1] {
        let table = node
            .as_table_mut()
            .ok_or_else(|| CliError::Data(format!("--set path `{}` is not a table", key)))?;
        node = table
            .entry(key.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    let table = node
        .as_table_mut()
        .ok_or_else(|| CliError::Data("--set path does not address a table".into()))?;
    table.insert(path[path.len() - 1].clone(), value);
    Ok(())
}

/// Parse a config file and apply `--set` overrides without resolving the
/// prior (used by `estimate-priors`, which produces the prior itself).
pub fn load_raw(path: &Path, overrides: &[String]) -> Result<RawConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read config {}: {e}", path.display())))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| CliError::Data(format!("config parse error: {e}")))?;
    let mut value = toml::Value::Table(table);
    for spec in overrides {
        let (p, v) = parse_override(spec)?;
        apply_override(&mut value, &p, v)?;
    }
    value
        .try_into()
        .map_err(|e| CliError::Data(format!("config error: {e}")))
}

/// Load a config file, apply `--set` overrides, and resolve the prior.
pub fn load(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let raw = load_raw(path, overrides)?;
    resolve(raw, path.parent().unwrap_or(Path::new(".")))
}

pub fn resolve(raw: RawConfig, base_dir: &Path) -> Result<RunConfig> {
    let eta = match &raw.hyperparameters {
        None => None,
        Some(h) => Some(resolve_eta(h, base_dir)?),
    };
    let detector = raw.detector.to_core();
    detector.validate()?;
    let outlier = if raw.outlier.enabled {
        Some(raw.outlier.to_core()?)
    } else {
        None
    };
    if raw.stream.qa_col.is_some() && raw.stream.qa_ok.is_none() {
        return Err(CliError::Data(
            "stream.qa_ok must list the usable quality values when stream.qa_col is set".into(),
        ));
    }
    Ok(RunConfig {
        raw,
        eta,
        detector,
        outlier,
    })
}

fn resolve_eta(h: &HyperSection, base_dir: &Path) -> Result<Hyperparameters> {
    if let Some(file) = &h.file {
        if h.b0.is_some() || h.lambda0.is_some() || h.v0.is_some() || h.nu0.is_some() {
            return Err(CliError::Data(
                "hyperparameters: give either `file` or inline values, not both".into(),
            ));
        }
        let path = if file.is_absolute() {
            file.clone()
        } else {
            base_dir.join(file)
        };
        let text = std::fs::read_to_string(&path).map_err(|e| {
            CliError::Data(format!("cannot read hyperparameters {}: {e}", path.display()))
        })?;
        let eta: EtaFile = toml::from_str(&text)
            .map_err(|e| CliError::Data(format!("hyperparameter file error: {e}")))?;
        eta.to_core()
    } else {
        let (b0, lambda0, v0, nu0) = match (&h.b0, &h.lambda0, &h.v0, h.nu0) {
            (Some(b), Some(l), Some(v), Some(n)) => (b, l, v, n),
            _ => {
                return Err(CliError::Data(
                    "hyperparameters: b0, lambda0, v0 and nu0 are all required inline".into(),
                ))
            }
        };
        EtaFile {
            b0: b0.clone(),
            lambda0: lambda0.clone(),
            v0: v0.clone(),
            nu0,
        }
        .to_core()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_temp(content: &str) -> tempdir::Scratch {
        tempdir::Scratch::with_file("config.toml", content)
    }

    // minimal scratch-dir helper, no external crates
    mod tempdir {
        use std::path::PathBuf;
        pub struct Scratch {
            pub dir: PathBuf,
            pub file: PathBuf,
        }
        impl Scratch {
            pub fn with_file(name: &str, content: &str) -> Scratch {
                let dir = std::env::temp_dir().join(format!(
                    "bocpd-cfg-{}-{:?}",
                    std::process::id(),
                    std::thread::current().id()
                ));
                std::fs::create_dir_all(&dir).unwrap();
                let file = dir.join(name);
                std::fs::write(&file, content).unwrap();
                Scratch { dir, file }
            }
        }
        impl Drop for Scratch {
            fn drop(&mut self) {
                let _ = std::fs::remove_dir_all(&self.dir);
            }
        }
    }

    const MINIMAL: &str = r#"
[hyperparameters]
b0 = [[0.5, 0.5]]
lambda0 = [[0.01]]
v0 = [[0.02, 0.0], [0.0, 0.02]]
nu0 = 5.0
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let scratch = write_temp(MINIMAL);
        let cfg = load(&scratch.file, &[]).unwrap();
        assert_eq!(cfg.detector.cp_window_len, 5);
        assert_eq!(cfg.detector.cp_search_max, 6);
        assert!((cfg.detector.hazard - 1.0 / 270.0).abs() < 1e-15);
        assert!(cfg.outlier.is_some());
        let eta = cfg.eta.unwrap();
        assert_eq!(eta.covariate_dim(), 1);
        assert_eq!(eta.observation_dim(), 2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let scratch = write_temp(&format!("{MINIMAL}\n[detector]\nwindow_size = 3\n"));
        let err = load(&scratch.file, &[]).unwrap_err();
        assert!(matches!(err, CliError::Data(_)), "{err}");
    }

    #[test]
    fn set_overrides_apply_and_are_typed() {
        let scratch = write_temp(MINIMAL);
        let cfg = load(
            &scratch.file,
            &[
                "detector.cp_window_len=3".into(),
                "outlier.enabled=false".into(),
                "hyperparameters.nu0=7.5".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.detector.cp_window_len, 3);
        assert!(cfg.outlier.is_none());
        assert_eq!(cfg.eta.unwrap().nu0(), 7.5);
    }

    #[test]
    fn bad_override_key_is_rejected() {
        let scratch = write_temp(MINIMAL);
        let err = load(&scratch.file, &["detector.no_such_knob=1".into()]).unwrap_err();
        assert!(matches!(err, CliError::Data(_)));
    }

    #[test]
    fn qa_col_requires_qa_ok() {
        let scratch = write_temp(&format!("{MINIMAL}\n[stream]\nqa_col = \"qa\"\n"));
        assert!(load(&scratch.file, &[]).is_err());
    }

    #[test]
    fn eta_file_roundtrip() {
        let eta = EtaFile {
            b0: vec![vec![0.5, 0.25]],
            lambda0: vec![vec![0.125]],
            v0: vec![vec![0.02, 0.001], vec![0.001, 0.03]],
            nu0: 4.75,
        };
        let rendered = eta.render();
        let parsed: EtaFile = toml::from_str(&rendered).unwrap();
        assert_eq!(parsed.b0, eta.b0);
        assert_eq!(parsed.v0, eta.v0);
        assert_eq!(parsed.nu0, eta.nu0);
        parsed.to_core().unwrap();
    }
}
