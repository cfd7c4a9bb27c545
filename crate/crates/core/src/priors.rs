//! Hyperparameter estimation from historical stable segments.
//!
//! Each supplied segment gets an ordinary multivariate regression fit
//! `(B_hat_i, Sigma_hat_i)`; the inverse-Wishart degrees of freedom are then
//! recovered by a numerical root solve of the profile score in `nu` (with
//! the scale matrix substituted by its `nu`-dependent moment estimate), and
//! the remaining hyperparameters follow in closed form. Segments are
//! presumed stable by the caller; no stability testing happens here.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fm;
use crate::model::Hyperparameters;
use crate::numerics::{cholesky_logdet, digamma, solve_spd, spd_inverse, RectMatrix, SymMatrix};

/// Ordinary multivariate regression estimates for one historical segment.
#[derive(Debug, Clone)]
pub struct SegmentFit {
    pub b_hat: RectMatrix,
    pub sigma_hat: SymMatrix,
    pub n_obs: usize,
}

/// Least-squares fit: `B_hat = (X^T X)^{-1} X^T Y`,
/// `Sigma_hat = (Y - X B_hat)^T (Y - X B_hat) / (n - k)`.
pub fn fit_segment(x: &RectMatrix, y: &RectMatrix) -> Result<SegmentFit> {
    let n = x.rows();
    let k = x.cols();
    let d = y.cols();
    if y.rows() != n {
        return Err(Error::DimensionMismatch {
            context: "fit_segment row counts",
        });
    }
    if n < k + d {
        return Err(Error::TooFewObservations { got: n, need: k + d });
    }
    let xtx = x.gram();
    let xty = x.transpose().matmul(y)?;
    let b_hat = solve_spd(&xtx, &xty).map_err(|e| match e {
        Error::NotPositiveDefinite { .. } => Error::RankDeficient,
        other => other,
    })?;
    let resid = y.sub(&x.matmul(&b_hat)?)?;
    let sigma_hat = resid.gram().scale(1.0 / (n - k) as f64);
    // Degenerate (for example exactly linear, noise-free) data produces a
    // residual scatter at rounding level, which cannot seed an
    // inverse-Wishart prior. The floor is relative to the response scale.
    let response_scale = y.gram().trace() / (n * d) as f64;
    if sigma_hat.trace() / d as f64 <= 1e-12 * response_scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NotPositiveDefinite {
            context: "residual scatter below the positive definiteness floor",
        });
    }
    cholesky_logdet(&sigma_hat)?;
    Ok(SegmentFit {
        b_hat,
        sigma_hat,
        n_obs: n,
    })
}

/// Profile score in the inverse-Wishart degrees of freedom:
/// `n/2 log|V0(nu)| - nd/2 log 2 - 1/2 sum_i log|Sigma_i|
///  - n/2 sum_{j=1..d} psi((nu + 1 - j)/2)`,
/// with `V0(nu) = (nu - d - 1)/n * sum_i Sigma_i`.
pub fn nu_score(sigma_fits: &[SymMatrix], d: usize, nu: f64) -> Result<f64> {
    let n = sigma_fits.len() as f64;
    if sigma_fits.is_empty() {
        return Err(Error::TooFewSegments { got: 0 });
    }
    if nu <= d as f64 + 1.0 {
        return Err(Error::DomainError {
            what: "nu must exceed d + 1",
            value: nu,
        });
    }
    let mut sum = SymMatrix::zeros(d);
    let mut sum_logdet = 0.0;
    for s in sigma_fits {
        if s.dim() != d {
            return Err(Error::DimensionMismatch {
                context: "nu_score sigma dims",
            });
        }
        sum = sum.add(s)?;
        let (_, ld) = cholesky_logdet(s)?;
        sum_logdet += ld;
    }
    let (_, logdet_sum) = cholesky_logdet(&sum)?;
    let logdet_v0 = d as f64 * fm::ln((nu - d as f64 - 1.0) / n) + logdet_sum;
    let mut psi_sum = 0.0;
    for j in 1..=d {
        psi_sum += digamma((nu + 1.0 - j as f64) / 2.0)?;
    }
    Ok(n / 2.0 * logdet_v0
        - n * d as f64 / 2.0 * core::f64::consts::LN_2
        - 0.5 * sum_logdet
        - n / 2.0 * psi_sum)
}

const NU_EPS: f64 = 1e-6;
const NU_MAX: f64 = 1e6;

/// Root of the degrees-of-freedom score over `(d + 1 + eps, 1e6]`: a
/// geometric bracket scan followed by bisection and a secant polish.
pub fn solve_nu(sigma_fits: &[SymMatrix], d: usize) -> Result<f64> {
    if sigma_fits.is_empty() {
        return Err(Error::TooFewSegments { got: 0 });
    }
    let floor = d as f64 + 1.0;
    let score = |nu: f64| nu_score(sigma_fits, d, nu);

    // Geometric scan in the offset above the domain floor.
    let mut prev_nu = floor + NU_EPS;
    let mut prev_s = score(prev_nu)?;
    let mut offset = 2.0 * NU_EPS;
    let mut bracket = None;
    while floor + offset <= NU_MAX {
        let nu = floor + offset;
        let s = score(nu)?;
        if prev_s == 0.0 {
            return Ok(prev_nu);
        }
        if prev_s.signum() != s.signum() {
            bracket = Some((prev_nu, prev_s, nu, s));
            break;
        }
        prev_nu = nu;
        prev_s = s;
        offset *= 2.0;
    }
    let (mut lo, mut s_lo, mut hi, mut s_hi) = bracket.ok_or(Error::NoRoot)?;

    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let s_mid = score(mid)?;
        if s_mid == 0.0 {
            return Ok(mid);
        }
        if s_mid.signum() == s_lo.signum() {
            lo = mid;
            s_lo = s_mid;
        } else {
            hi = mid;
            s_hi = s_mid;
        }
        if hi - lo < 1e-13 * hi.max(1.0) {
            break;
        }
    }

    // Secant polish drives the residual to rounding level.
    let mut a = lo;
    let mut fa = s_lo;
    let mut b = hi;
    let mut fb = s_hi;
    for _ in 0..20 {
        if fb == fa {
            break;
        }
        let c = b - fb * (b - a) / (fb - fa);
        if !(c > floor && c <= NU_MAX) || !c.is_finite() {
            break;
        }
        let fc = score(c)?;
        a = b;
        fa = fb;
        b = c;
        fb = fc;
        if fc == 0.0 {
            break;
        }
    }
    if fm::abs(fb) <= fm::abs(fa) {
        Ok(b)
    } else {
        Ok(a)
    }
}

/// Recover the full prior from per-segment fits:
/// degrees of freedom by the root solve, `V0` from the inverse-Wishart mean
/// relation, `B0` as the average coefficient estimate, and the coefficient
/// precision from the inverse of the precision-weighted coefficient scatter
/// `(1/(n d)) sum_i (B_i - B0) Sigma_i^{-1} (B_i - B0)^T`.
pub fn estimate_hyperparameters(
    fits: &[SegmentFit],
    d: usize,
    k: usize,
) -> Result<Hyperparameters> {
    if fits.len() < 2 {
        return Err(Error::TooFewSegments { got: fits.len() });
    }
    for f in fits {
        if f.b_hat.rows() != k || f.b_hat.cols() != d || f.sigma_hat.dim() != d {
            return Err(Error::DimensionMismatch {
                context: "estimate_hyperparameters fit shapes",
            });
        }
    }
    let n = fits.len() as f64;
    let sigmas: Vec<SymMatrix> = fits.iter().map(|f| f.sigma_hat.clone()).collect();
    let nu0 = solve_nu(&sigmas, d)?;

    let mut sigma_sum = SymMatrix::zeros(d);
    for s in &sigmas {
        sigma_sum = sigma_sum.add(s)?;
    }
    let v0 = sigma_sum.scale((nu0 - d as f64 - 1.0) / n);

    let mut b0 = RectMatrix::zeros(k, d);
    for f in fits {
        b0 = b0.add(&f.b_hat)?;
    }
    let b0 = b0.scale(1.0 / n);

    let mut lambda_inv = SymMatrix::zeros(k);
    for f in fits {
        let diff = f.b_hat.sub(&b0)?;
        let sigma_inv = spd_inverse(&f.sigma_hat)?;
        let term = diff.matmul(&sigma_inv.to_rect())?.matmul(&diff.transpose())?;
        lambda_inv = lambda_inv.add(&SymMatrix::new(k, term.as_slice().to_vec())?)?;
    }
    let lambda_inv = lambda_inv.scale(1.0 / (n * d as f64));
    let lambda0 = spd_inverse(&lambda_inv).map_err(|e| match e {
        Error::NotPositiveDefinite { .. } => Error::SingularLambda,
        other => other,
    })?;

    Hyperparameters::new(b0, lambda0, v0, nu0)
}
