//! Matrix-normal inverse-Wishart conjugate regression state model.
//!
//! Observation model for a segment: rows `y | x ~ Normal(x B, Sigma)` with
//! `B | Sigma ~ MatrixNormal(B0, Lambda0^{-1}, Sigma)` and
//! `Sigma ~ InverseWishart(V0, nu0)`. Conjugacy gives closed-form posterior
//! parameters, a closed-form log marginal likelihood, and a matrix-t
//! posterior predictive, all as functions of fixed-size sufficient
//! statistics. Segments therefore never need the raw data: an observation
//! can be added or removed by a rank-one update, which is what lets the
//! outlier guard excise a point without replay.

use crate::error::{Error, Result};
use crate::numerics::{
    cholesky_logdet, log_multigamma, solve_with_factor, RectMatrix, SymMatrix,
};

const LN_PI: f64 = 1.1447298858494002;

/// Fixed prior hyperparameters of the regression state model.
///
/// Dimensions: `b0` is k x d (coefficient mean), `lambda0` is k x k
/// (coefficient precision scale), `v0` is d x d (inverse-Wishart scale),
/// `nu0` the real-valued degrees of freedom, `nu0 > d - 1`.
#[derive(Debug, Clone)]
pub struct Hyperparameters {
    b0: RectMatrix,
    lambda0: SymMatrix,
    v0: SymMatrix,
    nu0: f64,
    // cached pieces of the marginal normalizing constant
    logdet_lambda0: f64,
    logdet_v0: f64,
    lgmd_half_nu0: f64,
}

impl Hyperparameters {
    pub fn new(b0: RectMatrix, lambda0: SymMatrix, v0: SymMatrix, nu0: f64) -> Result<Self> {
        let k = lambda0.dim();
        let d = v0.dim();
        if b0.rows() != k || b0.cols() != d {
            return Err(Error::DimensionMismatch {
                context: "Hyperparameters b0 shape",
            });
        }
        if !(nu0 > d as f64 - 1.0) {
            return Err(Error::InvalidConfig {
                what: "nu0 must exceed d - 1",
            });
        }
        let (_, logdet_lambda0) = cholesky_logdet(&lambda0)?;
        let (_, logdet_v0) = cholesky_logdet(&v0)?;
        let lgmd_half_nu0 = log_multigamma(d, nu0 / 2.0)?;
        Ok(Hyperparameters {
            b0,
            lambda0,
            v0,
            nu0,
            logdet_lambda0,
            logdet_v0,
            lgmd_half_nu0,
        })
    }

    #[inline]
    pub fn covariate_dim(&self) -> usize {
        self.lambda0.dim()
    }

    #[inline]
    pub fn observation_dim(&self) -> usize {
        self.v0.dim()
    }

    #[inline]
    pub fn b0(&self) -> &RectMatrix {
        &self.b0
    }

    #[inline]
    pub fn lambda0(&self) -> &SymMatrix {
        &self.lambda0
    }

    #[inline]
    pub fn v0(&self) -> &SymMatrix {
        &self.v0
    }

    #[inline]
    pub fn nu0(&self) -> f64 {
        self.nu0
    }
}

/// Per-segment sufficient statistics: the Gram matrices `Y^T Y`, `X^T X`,
/// `X^T Y` and the observation count. They are the entire data memory of a
/// run-length hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    yty: SymMatrix,
    xtx: SymMatrix,
    xty: RectMatrix,
    n: usize,
}

impl SufficientStats {
    pub fn zeros(k: usize, d: usize) -> Self {
        SufficientStats {
            yty: SymMatrix::zeros(d),
            xtx: SymMatrix::zeros(k),
            xty: RectMatrix::zeros(k, d),
            n: 0,
        }
    }

    #[inline]
    pub fn count(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn yty(&self) -> &SymMatrix {
        &self.yty
    }

    #[inline]
    pub fn xtx(&self) -> &SymMatrix {
        &self.xtx
    }

    #[inline]
    pub fn xty(&self) -> &RectMatrix {
        &self.xty
    }

    /// Rebuild from raw parts; the caller vouches for consistency of `n`.
    pub fn from_parts(yty: SymMatrix, xtx: SymMatrix, xty: RectMatrix, n: usize) -> Result<Self> {
        if xty.rows() != xtx.dim() || xty.cols() != yty.dim() {
            return Err(Error::DimensionMismatch {
                context: "SufficientStats::from_parts",
            });
        }
        Ok(SufficientStats { yty, xtx, xty, n })
    }

    fn check_dims(&self, x: &[f64], y: &[f64]) -> Result<()> {
        if x.len() != self.xtx.dim() || y.len() != self.yty.dim() {
            return Err(Error::DimensionMismatch {
                context: "observation length",
            });
        }
        Ok(())
    }

    /// Accumulates one observation in place.
    pub fn add_observation(&mut self, x: &[f64], y: &[f64]) -> Result<()> {
        self.check_dims(x, y)?;
        self.yty.add_outer(y, 1.0)?;
        self.xtx.add_outer(x, 1.0)?;
        self.xty.add_outer(x, y, 1.0)?;
        self.n += 1;
        Ok(())
    }

    /// Removes one previously accumulated observation in place.
    pub fn remove_observation(&mut self, x: &[f64], y: &[f64]) -> Result<()> {
        if self.n == 0 {
            return Err(Error::EmptyStats);
        }
        self.check_dims(x, y)?;
        self.yty.add_outer(y, -1.0)?;
        self.xtx.add_outer(x, -1.0)?;
        self.xty.add_outer(x, y, -1.0)?;
        self.n -= 1;
        Ok(())
    }

    /// Functional form of [`add_observation`](Self::add_observation).
    pub fn update(&self, x: &[f64], y: &[f64]) -> Result<Self> {
        let mut s = self.clone();
        s.add_observation(x, y)?;
        Ok(s)
    }

    /// Functional form of [`remove_observation`](Self::remove_observation).
    pub fn downdate(&self, x: &[f64], y: &[f64]) -> Result<Self> {
        let mut s = self.clone();
        s.remove_observation(x, y)?;
        Ok(s)
    }
}

/// Posterior parameters of the conjugate model given data summarized by
/// sufficient statistics.
#[derive(Debug, Clone)]
pub struct PosteriorParams {
    b: RectMatrix,
    lambda: SymMatrix,
    v: SymMatrix,
    nu: f64,
    logdet_lambda: f64,
    logdet_v: f64,
}

impl PosteriorParams {
    #[inline]
    pub fn b(&self) -> &RectMatrix {
        &self.b
    }

    #[inline]
    pub fn lambda(&self) -> &SymMatrix {
        &self.lambda
    }

    #[inline]
    pub fn v(&self) -> &SymMatrix {
        &self.v
    }

    #[inline]
    pub fn nu(&self) -> f64 {
        self.nu
    }

    #[inline]
    pub fn logdet_lambda(&self) -> f64 {
        self.logdet_lambda
    }

    #[inline]
    pub fn logdet_v(&self) -> f64 {
        self.logdet_v
    }
}

/// Factorize with one jitter retry. Subtractive downdates can graze
/// singularity by rounding alone; a single diagonal bump of
/// `1e-12 * trace/dim` is allowed before giving up.
fn cholesky_logdet_jittered(
    m: &SymMatrix,
    context: &'static str,
) -> Result<(RectMatrix, f64)> {
    match cholesky_logdet(m) {
        Ok(r) => Ok(r),
        Err(Error::NotPositiveDefinite { .. }) => {
            let mut bumped = m.clone();
            bumped.add_jitter(1e-12 * m.trace() / m.dim() as f64);
            cholesky_logdet(&bumped).map_err(|_| Error::NotPositiveDefinite { context })
        }
        Err(e) => Err(e),
    }
}

/// Posterior parameter update:
/// `Lambda_t = X^T X + Lambda0`,
/// `B_t = Lambda_t^{-1} (X^T Y + Lambda0 B0)`,
/// `V_t = V0 + (Y - X B_t)^T (Y - X B_t) + (B_t - B0)^T Lambda0 (B_t - B0)`,
/// `nu_t = nu0 + n` -- with the residual form expanded so only sufficient
/// statistics are needed.
pub fn posterior_params(eta: &Hyperparameters, s: &SufficientStats) -> Result<PosteriorParams> {
    let k = eta.covariate_dim();
    let d = eta.observation_dim();
    if s.xtx.dim() != k || s.yty.dim() != d {
        return Err(Error::DimensionMismatch {
            context: "posterior_params stats shape",
        });
    }

    let lambda = s.xtx.add(&eta.lambda0)?;
    let (l_factor, logdet_lambda) = cholesky_logdet_jittered(&lambda, "Lambda_t")?;

    // B_t
    let lam0_b0 = eta.lambda0.to_rect().matmul(&eta.b0)?;
    let rhs = s.xty.add(&lam0_b0)?;
    let b = solve_with_factor(&l_factor, &rhs);

    // V_t = V0 + (G - K^T B - B^T K + B^T H B) + (B - B0)^T Lambda0 (B - B0)
    let kt_b = s.xty.transpose().matmul(&b)?;
    let bt_k = kt_b.transpose();
    let bt_h_b = b.transpose().matmul(&s.xtx.to_rect())?.matmul(&b)?;
    let resid = s
        .yty
        .to_rect()
        .sub(&kt_b)?
        .sub(&bt_k)?
        .add(&bt_h_b)?;
    let diff = b.sub(&eta.b0)?;
    let shrink = diff
        .transpose()
        .matmul(&eta.lambda0.to_rect())?
        .matmul(&diff)?;
    let v_rect = eta.v0.to_rect().add(&resid)?.add(&shrink)?;
    let v = SymMatrix::new(d, v_rect.as_slice().to_vec())?;
    let (_, logdet_v) = cholesky_logdet_jittered(&v, "V_t")?;

    Ok(PosteriorParams {
        b,
        lambda,
        v,
        nu: eta.nu0 + s.n as f64,
        logdet_lambda,
        logdet_v,
    })
}

/// Log marginal likelihood of the data summarized by `s` under the conjugate
/// model, i.e. the log of the integral of the likelihood against the prior.
///
/// Computed as the ratio of matrix-normal inverse-Wishart normalizing
/// constants:
/// `-(nd/2) log pi + log Γ_d(nu_t/2) - log Γ_d(nu0/2)
///  + (d/2)(logdet Lambda0 - logdet Lambda_t)
///  + (nu0/2) logdet V0 - (nu_t/2) logdet V_t`.
///
/// Empty statistics give exactly zero.
pub fn log_marginal(eta: &Hyperparameters, s: &SufficientStats) -> Result<f64> {
    let d = eta.observation_dim() as f64;
    let post = posterior_params(eta, s)?;
    let n = s.n as f64;
    Ok(-(n * d / 2.0) * LN_PI
        + log_multigamma(eta.observation_dim(), post.nu / 2.0)?
        - eta.lgmd_half_nu0
        + (d / 2.0) * (eta.logdet_lambda0 - post.logdet_lambda)
        + (eta.nu0 / 2.0) * eta.logdet_v0
        - (post.nu / 2.0) * post.logdet_v)
}

/// Log posterior predictive density of one observation `(x, y)` given the
/// data summarized by `s`: the difference of log marginals with and without
/// the new observation (the log density of the matrix-t predictive at `y`).
pub fn log_predictive(
    eta: &Hyperparameters,
    s: &SufficientStats,
    x: &[f64],
    y: &[f64],
) -> Result<f64> {
    let updated = s.update(x, y)?;
    Ok(log_marginal(eta, &updated)? - log_marginal(eta, s)?)
}
