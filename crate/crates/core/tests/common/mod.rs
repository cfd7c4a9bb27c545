//! Shared test support: independent oracles and the benchmark pipeline.
//!
//! The oracles deliberately re-derive results through different code paths
//! than the streaming implementation: dense recursions over explicitly
//! materialized windows, numerical quadrature, and plain Monte Carlo. They
//! share only the lowest-level verified kernels (log marginal, special
//! functions) with the code under test.

#![allow(dead_code)]

use bocpd_core::engine::{Detector, DetectorConfig};
use bocpd_core::model::{log_marginal, Hyperparameters, SufficientStats};
use bocpd_core::numerics::{log_sum_exp, RectMatrix, SymMatrix};
use bocpd_core::outlier::{outlier_log_density, OutlierConfig};
use bocpd_core::simgen::LabeledSeries;

// ---------------------------------------------------------------------------
// Benchmark pipeline: generator output -> detector -> declared changepoints
// ---------------------------------------------------------------------------

/// Detector prior used throughout the simulation benchmark, chosen faithful
/// to the generating process: level 0.5 on both components, seasonal
/// coefficient means when the scenario has seasonality, coefficient
/// precision 0.1 on every column, and an inverse-Wishart scale whose implied
/// mean equals the generator's expected noise covariance
/// (`0.001/17 * [[1, rho0], [rho0, 1]]`) at a light prior mass `nu0 = 5`.
pub fn benchmark_eta(seasonal: bool, rho0: f64) -> Hyperparameters {
    let b0 = if seasonal {
        RectMatrix::new(
            4,
            2,
            vec![0.5, 0.5, 0.1, 0.1, 0.04, 0.04, 0.0, 0.0],
        )
        .unwrap()
    } else {
        RectMatrix::new(4, 2, vec![0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap()
    };
    let lambda0 = SymMatrix::scaled_identity(4, 0.1);
    let nu0 = 5.0;
    let noise_mean = 0.001 / 17.0; // generator scale over its IW dof excess
    let s = (nu0 - 3.0) * noise_mean;
    let v0 = SymMatrix::new(2, vec![s, s * rho0, s * rho0, s]).unwrap();
    Hyperparameters::new(b0, lambda0, v0, nu0).unwrap()
}

/// Detector covariates for a generated series row: intercept plus the
/// generator's own `[sin, cos, trend]` columns.
pub fn detection_covariates(series: &LabeledSeries, t: usize) -> [f64; 4] {
    [
        1.0,
        series.x.get(t - 1, 0),
        series.x.get(t - 1, 1),
        series.x.get(t - 1, 2),
    ]
}

/// Run the full detector over a generated series and return the declared
/// changepoints as `(changepoint_at, declared_at)` pairs.
pub fn run_series(
    series: &LabeledSeries,
    spec: &bocpd_core::simgen::ScenarioSpec,
    guarded: bool,
    dconfig: &DetectorConfig,
) -> Vec<(usize, usize)> {
    let eta = benchmark_eta(spec.seasonal, spec.rho0);
    let dconfig = dconfig.clone();
    let mut declared = Vec::new();
    if guarded {
        let det = Detector::new(eta, dconfig).unwrap();
        let mut g =
            bocpd_core::outlier::GuardedDetector::new(det, OutlierConfig::default()).unwrap();
        for t in 1..=series.len() {
            let x = detection_covariates(series, t);
            let y = [series.y.get(t - 1, 0), series.y.get(t - 1, 1)];
            let res = g.step(&x, &y).unwrap();
            for ev in res.events {
                if let bocpd_core::outlier::Event::Change(c) = ev {
                    declared.push((c.changepoint_at, c.declared_at));
                }
            }
        }
    } else {
        let mut det = Detector::new(eta, dconfig).unwrap();
        for t in 1..=series.len() {
            let x = detection_covariates(series, t);
            let y = [series.y.get(t - 1, 0), series.y.get(t - 1, 1)];
            let res = det.step(&x, &y).unwrap();
            if let Some(c) = res.event {
                declared.push((c.changepoint_at, c.declared_at));
            }
        }
    }
    declared
}

// ---------------------------------------------------------------------------
// Dense run-length recursion oracle (no truncation, windows rebuilt fresh)
// ---------------------------------------------------------------------------

/// Dense recursion over all run lengths with predictive terms computed as
/// ratios of batch marginals over explicitly materialized windows. Returns
/// per-step `(log_evidence, posterior over run lengths 0..=t)`.
pub fn dense_recursion(
    eta: &Hyperparameters,
    hazard: f64,
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
) -> Vec<(f64, Vec<f64>)> {
    let ln_h = hazard.ln();
    let ln_g = (1.0 - hazard).ln();
    let k = eta.covariate_dim();
    let d = eta.observation_dim();

    // stats over observations lo..=hi (1-based), accumulated in time order
    let window_lm = |lo: usize, hi: usize| -> f64 {
        let mut s = SufficientStats::zeros(k, d);
        for u in lo..=hi {
            s.add_observation(&xs[u - 1], &ys[u - 1]).unwrap();
        }
        log_marginal(eta, &s).unwrap()
    };

    let mut weights: Vec<f64> = vec![0.0]; // r = 0 before any data
    let mut out = Vec::new();
    for t in 1..=ys.len() {
        let lse_prev = log_sum_exp(&weights);
        let mut next = vec![0.0f64; weights.len() + 1];
        // growth: prior hypothesis r covers (t-1-r+1)..=(t-1)
        for (r, w) in weights.iter().enumerate() {
            let pred = if r == 0 {
                window_lm(t, t)
            } else {
                window_lm(t - r, t) - window_lm(t - r, t - 1)
            };
            next[r + 1] = w + pred + ln_g;
        }
        next[0] = lse_prev + ln_h + window_lm(t, t);
        let evidence = log_sum_exp(&next);
        let posterior: Vec<f64> = next.iter().map(|w| (w - evidence).exp()).collect();
        out.push((evidence, posterior));
        weights = next;
    }
    out
}

// ---------------------------------------------------------------------------
// Exhaustive (run length, outlier) enumeration oracle
// ---------------------------------------------------------------------------

/// Dense recursion conditioned on observation `skip` being an outlier: that
/// observation is excluded from all statistics, its step applies only the
/// run-length transition, and the outlier density enters the joint once.
fn dense_recursion_excluding(
    eta: &Hyperparameters,
    hazard: f64,
    oconfig: &OutlierConfig,
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
    skip: usize,
    upto: usize,
) -> Vec<f64> {
    let ln_h = hazard.ln();
    let ln_g = (1.0 - hazard).ln();
    let k = eta.covariate_dim();
    let d = eta.observation_dim();

    let window_lm = |lo: usize, hi: usize| -> f64 {
        let mut s = SufficientStats::zeros(k, d);
        for u in lo..=hi {
            if u == skip {
                continue;
            }
            s.add_observation(&xs[u - 1], &ys[u - 1]).unwrap();
        }
        log_marginal(eta, &s).unwrap()
    };

    let mut weights: Vec<f64> = vec![0.0];
    for t in 1..=upto {
        let lse_prev = log_sum_exp(&weights);
        let mut next = vec![0.0f64; weights.len() + 1];
        if t == skip {
            for (r, w) in weights.iter().enumerate() {
                next[r + 1] = w + ln_g;
            }
            next[0] = lse_prev + ln_h;
            let od = outlier_log_density(&ys[t - 1], oconfig).unwrap();
            for w in &mut next {
                *w += od;
            }
        } else {
            for (r, w) in weights.iter().enumerate() {
                let pred = if t - r > t - 1 {
                    window_lm(t, t)
                } else {
                    window_lm(t - r, t) - window_lm(t - r, t - 1)
                };
                next[r + 1] = w + pred + ln_g;
            }
            next[0] = lse_prev + ln_h + window_lm(t, t);
        }
        weights = next;
    }
    weights
}

/// Exhaustive posterior over outlier models at time `t`: the no-outlier
/// model against every candidate in the trailing window, each evaluated by
/// a full dense recursion.
pub fn exhaustive_outlier_posterior(
    eta: &Hyperparameters,
    hazard: f64,
    oconfig: &OutlierConfig,
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
    t: usize,
) -> (f64, Vec<(usize, f64)>) {
    let first = (t + 1).saturating_sub(oconfig.window).max(1);
    let candidates: Vec<usize> = (first..=t).collect();
    let w_cand = if oconfig.window > 1 {
        ((1.0 - oconfig.p0) / (oconfig.window - 1) as f64).ln()
    } else {
        (1.0 - oconfig.p0).ln()
    };

    // skip = 0 never matches a 1-based index: plain dense weights
    let none_weights = dense_recursion_excluding(eta, hazard, oconfig, xs, ys, 0, t);
    let mut log_terms = vec![oconfig.p0.ln() + log_sum_exp(&none_weights)];
    for &s in &candidates {
        let w = dense_recursion_excluding(eta, hazard, oconfig, xs, ys, s, t);
        log_terms.push(w_cand + log_sum_exp(&w));
    }
    let total = log_sum_exp(&log_terms);
    let none = (log_terms[0] - total).exp();
    let cand_probs = candidates
        .iter()
        .zip(log_terms[1..].iter())
        .map(|(&s, lt)| (s, (lt - total).exp()))
        .collect();
    (none, cand_probs)
}

/// Batch sufficient statistics over 1-based observation indices `lo..=hi`,
/// excluding `skip` (pass 0 to exclude nothing), accumulated in time order.
pub fn batch_stats_excluding(
    k: usize,
    d: usize,
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
    lo: usize,
    hi: usize,
    skip: usize,
) -> SufficientStats {
    let mut s = SufficientStats::zeros(k, d);
    for u in lo..=hi {
        if u == skip {
            continue;
        }
        s.add_observation(&xs[u - 1], &ys[u - 1]).unwrap();
    }
    s
}

// ---------------------------------------------------------------------------
// Quadrature oracle for the univariate (d = 1, k = 1) marginal likelihood
// ---------------------------------------------------------------------------

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, eps: f64, depth: u32) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, m: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
    }
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        m: f64,
        b: f64,
        whole: f64,
        eps: f64,
        depth: u32,
    ) -> f64 {
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let left = simpson(f, a, lm, m);
        let right = simpson(f, m, rm, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * eps {
            left + right + (left + right - whole) / 15.0
        } else {
            rec(f, a, lm, m, left, eps / 2.0, depth - 1)
                + rec(f, m, rm, b, right, eps / 2.0, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    rec(f, a, m, b, simpson(f, a, m, b), eps, depth)
}

/// Log of an integral of `exp(log_f)` over `[a, b]`, scaled by the max of
/// `log_f` on a coarse grid to stay in range. The integrand is a needle on a
/// wide interval, so each grid cell is refined separately; a single
/// top-level adaptive pass would terminate on the flat tails without ever
/// sampling the peak.
fn log_integral<F: Fn(f64) -> f64>(log_f: &F, a: f64, b: f64, eps: f64) -> f64 {
    let grid = 128;
    let mut peak = f64::NEG_INFINITY;
    for i in 0..=grid {
        let x = a + (b - a) * i as f64 / grid as f64;
        peak = peak.max(log_f(x));
    }
    if peak == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let scaled = |x: f64| (log_f(x) - peak).exp();
    let cell_eps = eps / grid as f64;
    let mut total = 0.0;
    for i in 0..grid {
        let lo = a + (b - a) * i as f64 / grid as f64;
        let hi = a + (b - a) * (i + 1) as f64 / grid as f64;
        total += adaptive_simpson(&scaled, lo, hi, cell_eps, 24);
    }
    peak + total.ln()
}

/// Marginal likelihood for the scalar model by iterated quadrature over the
/// coefficient and the noise variance (on a log scale):
/// `f(y) = ∫∫ Π N(y_i | x_i b, s2) N(b | b0, s2/l0) InvGamma(s2 | nu0/2, v0/2) db ds2`.
pub fn quadrature_log_marginal(
    b0: f64,
    lambda0: f64,
    v0: f64,
    nu0: f64,
    data: &[(f64, f64)],
) -> f64 {
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    let a_shape = nu0 / 2.0;
    let b_rate = v0 / 2.0;
    let log_ig_const = a_shape * b_rate.ln() - bocpd_core::numerics::ln_gamma(a_shape);

    let sxx: f64 = data.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = data.iter().map(|(x, y)| x * y).sum();
    let n = data.len() as f64;

    // joint log density at (beta, u = log s2), including the Jacobian s2
    let log_joint = |beta: f64, u: f64| -> f64 {
        let s2 = u.exp();
        let mut ll = 0.0;
        for (x, y) in data {
            let r = y - x * beta;
            ll += -0.5 * (ln_2pi + u) - 0.5 * r * r / s2;
        }
        let prior_b = -0.5 * (ln_2pi + u - lambda0.ln()) - 0.5 * lambda0 * (beta - b0) * (beta - b0) / s2;
        let prior_s2 = log_ig_const - (a_shape + 1.0) * u - b_rate / s2;
        ll + prior_b + prior_s2 + u
    };

    // inner integral over beta for fixed u, centered at the exact
    // conditional posterior mean with a generous width
    let g = |u: f64| -> f64 {
        let s2 = u.exp();
        let center = (lambda0 * b0 + sxy) / (lambda0 + sxx);
        let width = 16.0 * (s2 / (lambda0 + sxx)).sqrt();
        log_integral(&|beta| log_joint(beta, u), center - width, center + width, 1e-10)
    };

    let ss: f64 = data
        .iter()
        .map(|(x, y)| {
            let r = y - x * (sxy / sxx.max(1e-12));
            r * r
        })
        .sum();
    let u_center = ((v0 + ss + 1e-6) / (nu0 + n)).ln();
    log_integral(&g, u_center - 28.0, u_center + 22.0, 1e-10)
}

// ---------------------------------------------------------------------------
// Monte Carlo oracle for the bivariate (d = 2, k = 1) marginal likelihood
// ---------------------------------------------------------------------------

/// Plain Monte Carlo estimate of the marginal: average the likelihood of
/// the data over prior draws, entirely in 2x2 stack arithmetic (no shared
/// code with the closed form beyond the RNG). Returns
/// `(log_mean, standard_error_of_log)`.
pub fn monte_carlo_log_marginal_d2(
    b0: [f64; 2],
    lambda0: f64,
    v0: [[f64; 2]; 2],
    nu0: f64,
    data: &[(f64, [f64; 2])],
    draws: usize,
    seed: u64,
) -> (f64, f64) {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use rand_distr::{ChiSquared, Distribution, StandardNormal};

    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    // Cholesky of V0^{-1} for the Bartlett construction of W ~ Wishart.
    let det_v0 = v0[0][0] * v0[1][1] - v0[0][1] * v0[1][0];
    let v0_inv = [
        [v0[1][1] / det_v0, -v0[0][1] / det_v0],
        [-v0[1][0] / det_v0, v0[0][0] / det_v0],
    ];
    let l00 = v0_inv[0][0].sqrt();
    let l10 = v0_inv[1][0] / l00;
    let l11 = (v0_inv[1][1] - l10 * l10).sqrt();

    let chi1 = ChiSquared::new(nu0).unwrap();
    let chi2 = ChiSquared::new(nu0 - 1.0).unwrap();
    let inv_sqrt_l0 = (1.0 / lambda0).sqrt();

    let mut max_w = f64::NEG_INFINITY;
    let mut s1 = 0.0f64;
    let mut s2 = 0.0f64;
    for _ in 0..draws {
        // Bartlett: A lower-triangular
        let a00 = chi1.sample(&mut rng).sqrt();
        let a11 = chi2.sample(&mut rng).sqrt();
        let a10: f64 = StandardNormal.sample(&mut rng);
        // T = L * A (lower-triangular); W = T T^T; Sigma = W^{-1}
        let t00 = l00 * a00;
        let t10 = l10 * a00 + l11 * a10;
        let t11 = l11 * a11;
        // Cholesky factor of Sigma = T^{-T} T^{-1}: Sigma = C C^T with
        // C = T^{-T} reordered; easier: invert W (2x2) and factor it.
        let w00 = t00 * t00;
        let w10 = t10 * t00;
        let w11 = t10 * t10 + t11 * t11;
        let det_w = w00 * w11 - w10 * w10;
        let sg00 = w11 / det_w;
        let sg10 = -w10 / det_w;
        let sg11 = w00 / det_w;
        let c00 = sg00.sqrt();
        let c10 = sg10 / c00;
        let c11 = (sg11 - c10 * c10).sqrt();
        let logdet_sigma = 2.0 * (c00.ln() + c11.ln());

        // B ~ MN(b0, 1/lambda0, Sigma): 1x2 row
        let z0: f64 = StandardNormal.sample(&mut rng);
        let z1: f64 = StandardNormal.sample(&mut rng);
        let b = [
            b0[0] + inv_sqrt_l0 * (c00 * z0),
            b0[1] + inv_sqrt_l0 * (c10 * z0 + c11 * z1),
        ];

        let mut ll = 0.0;
        for (x, y) in data {
            let r = [y[0] - x * b[0], y[1] - x * b[1]];
            // solve C z = r
            let q0 = r[0] / c00;
            let q1 = (r[1] - c10 * q0) / c11;
            ll += -ln_2pi - 0.5 * logdet_sigma - 0.5 * (q0 * q0 + q1 * q1);
        }

        if ll > max_w {
            let shift = (max_w - ll).exp();
            s1 *= shift;
            s2 *= shift * shift;
            max_w = ll;
        }
        let e = (ll - max_w).exp();
        s1 += e;
        s2 += e * e;
    }
    let n = draws as f64;
    let log_mean = max_w + (s1 / n).ln();
    let se_log = (s2 / (s1 * s1) - 1.0 / n).max(0.0).sqrt();
    (log_mean, se_log)
}
