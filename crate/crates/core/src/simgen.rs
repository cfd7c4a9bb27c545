//! Scenario generator for the benchmark simulation study.
//!
//! Each series is 270 observations of a two-component signal around level
//! 0.5, with a regime change at index 181 (level shift, and for the last
//! scenario a correlation flip with no level shift), optional seasonality
//! through harmonic covariates, and exactly one injected wild point at a
//! uniform random index in 90..=270. Everything is reproducible from the
//! seed alone.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::fm;
use crate::numerics::{cholesky_factor, RectMatrix, SymMatrix};
use crate::sample::{inverse_wishart, matrix_normal_with_factors, mvn_with_factor};

/// Harmonic period, in time steps, of the seasonal covariates.
const SEASONAL_PERIOD: f64 = 365.0;
/// Inverse-Wishart degrees of freedom of the noise covariance draw.
const NOISE_DOF: f64 = 20.0;
/// Scale of the noise covariance: `0.001 * [[1, rho], [rho, 1]]` used
/// directly as the inverse-Wishart scale, so the expected covariance is that
/// matrix divided by `NOISE_DOF - 3`.
const NOISE_SCALE: f64 = 0.001;
/// Seasonal coefficient means (sin, cos, trend rows; both components equal).
const SEASONAL_COEF: [[f64; 2]; 3] = [[0.1, 0.1], [0.04, 0.04], [0.0, 0.0]];
/// Precision of the coefficient draw around `SEASONAL_COEF`.
const COEF_PRECISION: f64 = 10.0;
/// Pre-change level of both components.
const BASE_LEVEL: f64 = 0.5;

/// One row of the scenario table.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub case_id: u8,
    /// Post-change level of both components.
    pub mu_star: f64,
    /// Noise correlation before the change.
    pub rho0: f64,
    /// Noise correlation after the change; only the correlation-flip case
    /// sets this.
    pub rho_star: Option<f64>,
    /// Whether seasonal coefficients are drawn (otherwise zero).
    pub seasonal: bool,
    /// Index of the first observation generated by the new regime.
    pub t_star: usize,
    /// Series length.
    pub length: usize,
    /// Value written over the chosen outlier index.
    pub outlier_value: [f64; 2],
    /// Inclusive index range the outlier is drawn from.
    pub outlier_range: (usize, usize),
}

impl ScenarioSpec {
    /// The nine benchmark cases.
    pub fn table_case(case: u8) -> Result<ScenarioSpec> {
        let (mu_star, rho0, rho_star, seasonal) = match case {
            1 => (0.4, 0.0, None, false),
            2 => (0.3, 0.0, None, false),
            3 => (0.4, 0.9, None, false),
            4 => (0.3, 0.9, None, false),
            5 => (0.4, 0.0, None, true),
            6 => (0.3, 0.0, None, true),
            7 => (0.4, 0.9, None, true),
            8 => (0.3, 0.9, None, true),
            9 => (0.5, 0.5, Some(-0.5), true),
            _ => {
                return Err(Error::InvalidSpec {
                    what: "case id must be 1..=9",
                })
            }
        };
        Ok(ScenarioSpec {
            case_id: case,
            mu_star,
            rho0,
            rho_star,
            seasonal,
            t_star: 181,
            length: 270,
            outlier_value: [0.8, 0.1],
            outlier_range: (90, 270),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.length == 0 || self.t_star == 0 || self.t_star > self.length {
            return Err(Error::InvalidSpec {
                what: "t_star must lie within the series",
            });
        }
        let (lo, hi) = self.outlier_range;
        if lo == 0 || lo > hi || hi > self.length {
            return Err(Error::InvalidSpec {
                what: "outlier range must lie within the series",
            });
        }
        if fm::abs(self.rho0) >= 1.0 || self.rho_star.is_some_and(|r| fm::abs(r) >= 1.0) {
            return Err(Error::InvalidSpec {
                what: "correlations must lie in (-1, 1)",
            });
        }
        Ok(())
    }

    fn noise_scale_matrix(&self, rho: f64) -> SymMatrix {
        SymMatrix::new(
            2,
            alloc::vec![NOISE_SCALE, NOISE_SCALE * rho, NOISE_SCALE * rho, NOISE_SCALE],
        )
        .expect("2x2 buffer")
    }
}

/// A generated series with its ground truth.
#[derive(Debug, Clone)]
pub struct LabeledSeries {
    /// Covariates, one row per observation: `[sin, cos, trend]` where the
    /// harmonic argument is `2 pi t / 365` and the trend is `t / length`.
    pub x: RectMatrix,
    /// Observations, one row per time index (row `i` is time `i + 1`).
    pub y: RectMatrix,
    pub true_changepoint: usize,
    pub outlier_time: usize,
    pub seed: u64,
}

impl LabeledSeries {
    pub fn len(&self) -> usize {
        self.y.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.y.rows() == 0
    }
}

/// Deterministic covariates at time index `t` (1-based).
pub fn covariate_row(t: usize, length: usize) -> [f64; 3] {
    let tf = t as f64;
    let arg = 2.0 * core::f64::consts::PI * tf / SEASONAL_PERIOD;
    [fm::sin(arg), fm::cos(arg), tf / length as f64]
}

/// Generate one series. Draw order is fixed: pre-change covariance,
/// post-change covariance (correlation-flip case only), seasonal
/// coefficients, outlier index, then noise in time order.
pub fn generate(spec: &ScenarioSpec, seed: u64) -> Result<LabeledSeries> {
    spec.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    let sigma0 = inverse_wishart(&mut rng, &spec.noise_scale_matrix(spec.rho0), NOISE_DOF)?;
    let sigma_star = match spec.rho_star {
        Some(rho) => Some(inverse_wishart(
            &mut rng,
            &spec.noise_scale_matrix(rho),
            NOISE_DOF,
        )?),
        None => None,
    };

    let beta = if spec.seasonal {
        let mean = RectMatrix::from_rows(&[
            &SEASONAL_COEF[0],
            &SEASONAL_COEF[1],
            &SEASONAL_COEF[2],
        ])?;
        let chol_row = cholesky_factor(&SymMatrix::scaled_identity(3, 1.0 / COEF_PRECISION))?;
        let chol_col = cholesky_factor(&sigma0)?;
        matrix_normal_with_factors(&mut rng, &mean, &chol_row, &chol_col)?
    } else {
        RectMatrix::zeros(3, 2)
    };

    let (lo, hi) = spec.outlier_range;
    let outlier_time = rng.random_range(lo..=hi);

    let chol0 = cholesky_factor(&sigma0)?;
    let chol_star = match &sigma_star {
        Some(s) => Some(cholesky_factor(s)?),
        None => None,
    };

    let n = spec.length;
    let mut x = RectMatrix::zeros(n, 3);
    let mut y = RectMatrix::zeros(n, 2);
    for t in 1..=n {
        let xr = covariate_row(t, n);
        for j in 0..3 {
            x.set(t - 1, j, xr[j]);
        }
        let level = if t < spec.t_star {
            BASE_LEVEL
        } else {
            spec.mu_star
        };
        let mean = [
            level + xr[0] * beta.get(0, 0) + xr[1] * beta.get(1, 0) + xr[2] * beta.get(2, 0),
            level + xr[0] * beta.get(0, 1) + xr[1] * beta.get(1, 1) + xr[2] * beta.get(2, 1),
        ];
        let chol = match (&chol_star, t >= spec.t_star) {
            (Some(cs), true) => cs,
            _ => &chol0,
        };
        let row = mvn_with_factor(&mut rng, &mean, chol);
        y.set(t - 1, 0, row[0]);
        y.set(t - 1, 1, row[1]);
    }
    y.set(outlier_time - 1, 0, spec.outlier_value[0]);
    y.set(outlier_time - 1, 1, spec.outlier_value[1]);

    Ok(LabeledSeries {
        x,
        y,
        true_changepoint: spec.t_star,
        outlier_time,
        seed,
    })
}

/// Independent replications with seeds `base_seed .. base_seed + n_reps`.
pub fn batch(spec: &ScenarioSpec, n_reps: usize, base_seed: u64) -> Result<Vec<LabeledSeries>> {
    (0..n_reps)
        .map(|i| generate(spec, base_seed + i as u64))
        .collect()
}
