//! Hardy certificates, criticality probes and threshold extrapolation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    assemble, assemble_hk, assemble_weight, lowest_eigenpairs, transverse_mu_profile,
    Coefficients, OperatorKind, OperatorPair, WeightedGrid,
};
use crate::error::{LabError, Result};
use crate::geometry::{bump, linspace, CurvatureProfile, Metric};
use crate::oracle::TransverseMode;

/// `(J1, K J1)_f` by tensor Gauss quadrature over the given cells.
pub fn curvature_pairing<M: Metric + ?Sized>(
    metric: &M,
    profile: &CurvatureProfile,
    x1: &[f64],
    x2: &[f64],
) -> f64 {
    let a = metric.half_width();
    let mode = TransverseMode::new(a, 1);
    let g = [
        (0.112_701_665_379_258_31, 5.0 / 18.0),
        (0.5, 8.0 / 18.0),
        (0.887_298_334_620_741_7, 5.0 / 18.0),
    ];
    let mut total = 0.0;
    for w1 in x1.windows(2) {
        for w2 in x2.windows(2) {
            let (h1, h2) = (w1[1] - w1[0], w2[1] - w2[0]);
            for &(p, wp) in &g {
                for &(q, wq) in &g {
                    let (s, t) = (w1[0] + p * h1, w2[0] + q * h2);
                    let j = mode.eval(t);
                    total += wp * wq * h1 * h2 * profile.eval(s, t) * j * j * metric.f(s, t);
                }
            }
        }
    }
    total
}

/// Constants of the Hardy inequality `H_K - E1 >= c_K / (1 + delta^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HardyCertificate {
    /// `||K||_inf a^2`.
    pub xi: f64,
    pub interval: (f64, f64),
    pub c: f64,
    pub big_c: f64,
    pub lambda_j: f64,
    pub c_k: f64,
    pub mu_min: f64,
    pub mu_max: f64,
}

impl HardyCertificate {
    /// `rho(x) = c_K / (1 + (x1 - x1^0)^2)` with `x1^0` the midpoint of `J`.
    pub fn weight(&self, x1: f64) -> f64 {
        let mid = 0.5 * (self.interval.0 + self.interval.1);
        let d = x1 - mid;
        self.c_k / (1.0 + d * d)
    }
}

/// Tolerance on `mu_K` when checking its sign on `J`.
const MU_TOL: f64 = 1e-8;

/// Hardy constant on the interval `J`, using `columns` equally spaced
/// transverse problems to sample `mu_K`.
pub fn hardy_constant<M: Metric + ?Sized>(
    metric: &M,
    profile: &CurvatureProfile,
    interval: (f64, f64),
    x2: &[f64],
    columns: usize,
) -> Result<HardyCertificate> {
    let (j0, j1) = interval;
    if !(j1 > j0) || columns < 3 {
        return Err(LabError::InvalidArgument(format!(
            "interval ({j0}, {j1}) with {columns} columns"
        )));
    }
    let a = metric.half_width();
    let xi = profile.sup_norm() * a * a;
    let len = j1 - j0;
    let c = (1.0 - xi) / 16.0;
    let q = xi / (1.0 - xi);
    let big_c = (0.125 + 4.0 / (len * len)) / (1.0 - q * q);

    let cols = linspace(j0, j1, columns);
    let mu = transverse_mu_profile(metric, &cols, x2)?;
    let mu_min = mu.iter().copied().fold(f64::INFINITY, f64::min);
    let mu_max = mu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if mu_min < -MU_TOL {
        return Err(LabError::HypothesisFailed(format!(
            "mu_K reaches {mu_min:e} on J"
        )));
    }
    if mu_max <= MU_TOL {
        return Err(LabError::HypothesisFailed(
            "mu_K vanishes identically on J".into(),
        ));
    }

    // no d/dx2 term: the operator is a family of line problems in x1
    let mu_at = |x: f64| {
        let t = ((x - j0) / len * (columns - 1) as f64).clamp(0.0, (columns - 1) as f64);
        let i = (t.floor() as usize).min(columns - 2);
        let s = t - i as f64;
        ((1.0 - s) * mu[i] + s * mu[i + 1]).max(0.0)
    };
    let line = |&y: &f64| -> Result<f64> {
        let grid = WeightedGrid::line(cols.clone(), false);
        let (s, m) = assemble(&grid, |x, _| {
            let f = metric.f(x, y);
            Coefficients {
                a11: 1.0 / f,
                potential: mu_at(x) * f,
                mass: f,
                ..Default::default()
            }
        })?;
        let pair = OperatorPair {
            s,
            m,
            kind: OperatorKind::Transverse,
            grid,
        };
        Ok(lowest_eigenpairs(&pair, 1, 1e-10)?.values[0])
    };
    #[cfg(feature = "parallel")]
    let lams: Vec<f64> = {
        use rayon::prelude::*;
        x2.par_iter().map(line).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let lams: Vec<f64> = x2.iter().map(line).collect::<Result<_>>()?;
    let lambda_j = lams.into_iter().fold(f64::INFINITY, f64::min);

    Ok(HardyCertificate {
        xi,
        interval,
        c,
        big_c,
        lambda_j,
        c_k: c * lambda_j / (lambda_j + big_c),
        mu_min,
        mu_max,
    })
}

/// `C(xi) = xi^2/4 (1 + xi^2/(1-xi^2))^2 (1 - xi^2/(1-xi^2))^-2`.
pub fn thin_strip_constant(xi: f64) -> f64 {
    let r = xi * xi / (1.0 - xi * xi);
    0.25 * xi * xi * (1.0 + r).powi(2) / (1.0 - r).powi(2)
}

/// Pointwise lower bound `-k(x1)/2 - C(xi) chi_[-R,R](x1)` for `mu_K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThinStripBound {
    pub x1: Vec<f64>,
    pub bound: Vec<f64>,
    pub c_xi: f64,
    pub nonnegative: bool,
    pub nontrivial: bool,
}

pub fn thin_strip_bound(profile: &CurvatureProfile, a: f64, x1: &[f64]) -> ThinStripBound {
    let xi = profile.sup_norm() * a * a;
    let c_xi = thin_strip_constant(xi);
    let r = profile.support_radius();
    let bound: Vec<f64> = x1
        .iter()
        .map(|&x| {
            let chi = if x.abs() <= r { 1.0 } else { 0.0 };
            -0.5 * profile.axis_infimum(x) - c_xi * chi
        })
        .collect();
    ThinStripBound {
        x1: x1.to_vec(),
        nonnegative: bound.iter().all(|&b| b >= 0.0),
        nontrivial: bound.iter().any(|&b| b > 0.0),
        bound,
        c_xi,
    }
}

/// Random trial functions for [`hardy_verify`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOptions {
    pub trials: usize,
    pub seed: u64,
    /// Smallest longitudinal half-width of a trial bump.
    pub min_width: f64,
    /// Amplitude of the higher transverse modes mixed into each trial.
    pub noise: f64,
}

impl Default for TrialOptions {
    fn default() -> Self {
        Self {
            trials: 100,
            seed: 1,
            min_width: 0.5,
            noise: 0.3,
        }
    }
}

/// Smallest value of
/// `(h_K[psi] - E1 ||psi||_f^2 - ||rho^(1/2) psi||_f^2) / ||psi||_f^2`
/// over seeded, compactly supported trial functions.
pub fn hardy_verify<M: Metric + ?Sized>(
    pair: &OperatorPair,
    metric: &M,
    rho: impl Fn(f64, f64) -> f64 + Sync,
    e1: f64,
    opts: &TrialOptions,
) -> Result<f64> {
    let grid = &pair.grid;
    let weight = assemble_weight(metric, grid, rho)?;
    let a = metric.half_width();
    let (lo, hi) = (grid.x1[0], grid.x1[grid.n1() - 1]);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut worst = f64::INFINITY;
    for trial in 0..opts.trials {
        // the first trial is the widest pure ground-mode bump; every other
        // one mixes in higher transverse modes
        let (center, width, mix) = if trial == 0 {
            let c = 0.5 * (lo + hi);
            (c, 0.95 * (hi - c), vec![0.0; 3])
        } else {
            let center = rng.random_range(0.8 * lo..0.8 * hi);
            let room = (center - lo).min(hi - center);
            let wmax = room.max(opts.min_width * 1.01);
            let width = rng.random_range(opts.min_width.ln()..wmax.ln()).exp().min(room);
            let amp = if trial % 2 == 0 { opts.noise } else { 0.0 };
            let mix: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..=1.0) * amp).collect();
            (center, width, mix)
        };
        let psi = grid.interpolate(|x1, x2| {
            let envelope = bump((x1 - center) / width);
            let mut t = TransverseMode::new(a, 1).eval(x2);
            for (k, c) in mix.iter().enumerate() {
                t += c * TransverseMode::new(a, k + 2).eval(x2);
            }
            envelope * t
        });
        let norm = pair.m.quad(&psi);
        if !(norm > 0.0) {
            continue;
        }
        let margin = (pair.s.quad(&psi) - e1 * norm - weight.quad(&psi)) / norm;
        worst = worst.min(margin);
    }
    Ok(worst)
}

/// Lowest eigenvalue of `h_K + V` with `V` acting in `L^2(f dx)`.
pub fn perturbed_threshold<M: Metric + ?Sized>(
    pair: &OperatorPair,
    metric: &M,
    v_pot: impl Fn(f64, f64) -> f64 + Sync,
) -> Result<f64> {
    let q = assemble_weight(metric, &pair.grid, v_pot)?;
    let perturbed = pair.with_added(&q, OperatorKind::Perturbed);
    Ok(lowest_eigenpairs(&perturbed, 1, 1e-9)?.values[0])
}

/// Eigenvalues of `h_K` in boxes `[-L, L]` extrapolated in `1/L^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdProbe {
    pub l_values: Vec<f64>,
    /// `eigenvalues[i][j]`: `j`-th eigenvalue at `l_values[i]`.
    pub eigenvalues: Vec<Vec<f64>>,
    /// Limits of eigenvalues that do not move with `L` (bound states).
    pub discrete: Vec<f64>,
    pub threshold: f64,
    /// Coefficient of `1/L^2` for the threshold branch.
    pub slope: f64,
}

/// Least-squares `y = c + b x`.
fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(u, v)| (u - mx) * (v - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - b * mx, b)
}

/// Branches whose `1/L^2` coefficient stays below this are bound states.
const BOUND_SLOPE: f64 = 0.25;

pub fn essential_threshold_probe<M: Metric + ?Sized>(
    metric: &M,
    x2: &[f64],
    l_values: &[f64],
    h1: f64,
    branches: usize,
) -> Result<ThresholdProbe> {
    if l_values.len() < 2 {
        return Err(LabError::InvalidArgument("need at least two box lengths".into()));
    }
    let mut eigenvalues = Vec::with_capacity(l_values.len());
    for &l in l_values {
        let n1 = (2.0 * l / h1).round() as usize + 1;
        let grid = WeightedGrid::tensor(linspace(-l, l, n1), x2.to_vec(), true);
        let pair = assemble_hk(metric, &grid)?;
        eigenvalues.push(lowest_eigenpairs(&pair, branches, 1e-9)?.values);
    }
    let inv: Vec<f64> = l_values.iter().map(|l| 1.0 / (l * l)).collect();
    let mut discrete = Vec::new();
    let mut threshold = f64::NAN;
    let mut slope = f64::NAN;
    for j in 0..branches {
        let y: Vec<f64> = eigenvalues.iter().map(|e| e[j]).collect();
        let (c, b) = line_fit(&inv, &y);
        if b.abs() < BOUND_SLOPE {
            discrete.push(c);
        } else {
            threshold = c;
            slope = b;
            break;
        }
    }
    Ok(ThresholdProbe {
        l_values: l_values.to_vec(),
        eigenvalues,
        discrete,
        threshold,
        slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{FlatMetric, RuledMetric, ThetaDot};
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn substitution_values() {
        assert!((thin_strip_constant(0.1) - 2.6031e-3).abs() < 1e-7);
        assert_eq!(thin_strip_constant(0.0), 0.0);
    }

    #[test]
    fn flat_strip_has_no_hardy_certificate() {
        let x2 = linspace(-1.0, 1.0, 17);
        let r = hardy_constant(&FlatMetric { a: 1.0 }, &CurvatureProfile::Zero, (-1.0, 1.0), &x2, 11);
        assert!(matches!(r, Err(LabError::HypothesisFailed(_))));
    }

    #[test]
    fn hardy_constants_follow_the_formulas() {
        // xi = 0.2 and |J| = 2 give c = 0.05, C = 1.2
        let a = 1.0;
        let td = ThetaDot::Bump {
            amplitude: 0.2f64.sqrt(),
            radius: 1.0,
        };
        let metric = RuledMetric { theta_dot: td, a };
        let profile = CurvatureProfile::Ruled { theta_dot: td };
        let cert = hardy_constant(&metric, &profile, (-1.0, 1.0), &linspace(-a, a, 17), 41).unwrap();
        assert!((cert.xi - 0.2).abs() < 1e-12);
        assert!((cert.c - 0.05).abs() < 1e-12);
        assert!((cert.big_c - 1.2).abs() < 1e-12);
        assert!(cert.lambda_j > 0.0 && cert.c_k > 0.0);
        assert!(cert.c_k < cert.c);
    }

    #[test]
    fn negative_bump_gives_positive_thin_strip_bound() {
        let profile = CurvatureProfile::GaussianBump {
            amplitude: -1.0,
            center: [0.0, 0.0],
            widths: [1.0, 1.0],
            radius: 3.0,
        };
        let x1 = linspace(-4.0, 4.0, 81);
        let b = thin_strip_bound(&profile, 0.1, &x1);
        let i0 = 40;
        assert!(b.bound[i0] > 0.4);
        assert!(b.nontrivial);
        let zero = thin_strip_bound(&CurvatureProfile::Zero, 1.0, &x1);
        assert_eq!(zero.c_xi, 0.0);
        assert!(zero.nonnegative && !zero.nontrivial);
    }

    #[test]
    fn flat_strip_margins() {
        let a = 1.0;
        let metric = FlatMetric { a };
        let grid = WeightedGrid::tensor(linspace(-40.0, 40.0, 321), linspace(-a, a, 17), true);
        let pair = assemble_hk(&metric, &grid).unwrap();
        let e1 = (FRAC_PI_2 / a).powi(2);
        let opts = TrialOptions {
            trials: 40,
            ..Default::default()
        };
        let zero = hardy_verify(&pair, &metric, |_, _| 0.0, e1, &opts).unwrap();
        assert!(zero >= -1e-10, "{zero}");
        let eps = hardy_verify(&pair, &metric, |_, _| 0.05, e1, &opts).unwrap();
        assert!(eps < 0.0, "{eps}");
    }

    #[test]
    fn flat_strip_is_critical() {
        let a = FRAC_PI_2;
        let metric = FlatMetric { a };
        let grid = WeightedGrid::tensor(linspace(-30.0, 30.0, 241), linspace(-a, a, 17), true);
        let pair = assemble_hk(&metric, &grid).unwrap();
        let v0 = perturbed_threshold(&pair, &metric, |_, _| 0.0).unwrap();
        let lam = lowest_eigenpairs(&pair, 1, 1e-9).unwrap().values[0];
        assert!((v0 - lam).abs() < 1e-9);
        let v = perturbed_threshold(&pair, &metric, |x1, _| -0.3 * (-x1 * x1).exp()).unwrap();
        assert!(v < 1.0, "{v}");
    }

    #[test]
    fn flat_threshold_extrapolates_to_e1() {
        let a = FRAC_PI_2;
        let x2 = linspace(-a, a, 65);
        let p = essential_threshold_probe(&FlatMetric { a }, &x2, &[10.0, 15.0, 20.0], 0.25, 2).unwrap();
        assert!(p.discrete.is_empty());
        assert!((p.threshold - 1.0).abs() < 1e-3, "{}", p.threshold);
        assert!((p.slope - FRAC_PI_2.powi(2)).abs() < 0.05);
    }
}
