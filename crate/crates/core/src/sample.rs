//! Seeded samplers for the matrix distributions used by the generator and
//! the estimation tests: multivariate normal, Wishart/inverse-Wishart via
//! the Bartlett decomposition, and the matrix normal.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::Result;
use crate::numerics::{cholesky_factor, spd_inverse, RectMatrix, SymMatrix};

pub fn standard_normal_vec<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Draw from `Normal(mean, L L^T)` given the lower Cholesky factor `L`.
pub fn mvn_with_factor<R: Rng + ?Sized>(
    rng: &mut R,
    mean: &[f64],
    chol_cov: &RectMatrix,
) -> Vec<f64> {
    let d = mean.len();
    let z = standard_normal_vec(rng, d);
    let mut out = mean.to_vec();
    for i in 0..d {
        for j in 0..=i {
            out[i] += chol_cov.get(i, j) * z[j];
        }
    }
    out
}

/// Draw `W ~ Wishart(dof, scale)` via the Bartlett decomposition.
pub fn wishart<R: Rng + ?Sized>(rng: &mut R, scale: &SymMatrix, dof: f64) -> Result<SymMatrix> {
    let d = scale.dim();
    let l = cholesky_factor(scale)?;
    let mut a = RectMatrix::zeros(d, d);
    for j in 0..d {
        let chi = ChiSquared::new(dof - j as f64).map_err(|_| crate::error::Error::DomainError {
            what: "wishart degrees of freedom",
            value: dof,
        })?;
        let c: f64 = chi.sample(rng);
        a.set(j, j, libm::sqrt(c));
        for i in (j + 1)..d {
            a.set(i, j, StandardNormal.sample(rng));
        }
    }
    let la = l.matmul(&a)?;
    Ok(la.gram_of_transpose())
}

/// Draw `Sigma ~ InverseWishart(scale, dof)`: the inverse of a Wishart draw
/// with the inverted scale.
pub fn inverse_wishart<R: Rng + ?Sized>(
    rng: &mut R,
    scale: &SymMatrix,
    dof: f64,
) -> Result<SymMatrix> {
    let w = wishart(rng, &spd_inverse(scale)?, dof)?;
    spd_inverse(&w)
}

/// Draw from `MatrixNormal(mean, U, V)` given lower Cholesky factors of the
/// row covariance `U` (k x k) and column covariance `V` (d x d).
pub fn matrix_normal_with_factors<R: Rng + ?Sized>(
    rng: &mut R,
    mean: &RectMatrix,
    chol_row: &RectMatrix,
    chol_col: &RectMatrix,
) -> Result<RectMatrix> {
    let k = mean.rows();
    let d = mean.cols();
    let mut z = RectMatrix::zeros(k, d);
    for i in 0..k {
        for j in 0..d {
            z.set(i, j, StandardNormal.sample(rng));
        }
    }
    mean.add(&chol_row.matmul(&z)?.matmul(&chol_col.transpose())?)
}
