//! Killed diffusion generated by the Laplace-Beltrami operator of the strip.
//!
//! With `G = diag(f^2, 1)` the generator expands to
//! `f^-2 d1^2 - f^-3 (d1 f) d1 + d2^2 + f^-1 (d2 f) d2`, so the Ito
//! coefficients are `b = (-f^-3 d1 f, f^-1 d2 f)` and
//! `sigma = diag(sqrt(2)/f, sqrt(2))`. The factor `sqrt(2)` comes from the
//! clock of `du/dt = Delta u`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{LabError, Result};
use crate::geometry::Metric;
use crate::region::Region;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Drift and diffusion of the killed process.
#[derive(Clone, Copy)]
pub struct SdeSpec<'a> {
    metric: &'a dyn Metric,
    pub a: f64,
    pub support_radius: f64,
}

impl std::fmt::Debug for SdeSpec<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SdeSpec")
            .field("a", &self.a)
            .field("support_radius", &self.support_radius)
            .finish()
    }
}

pub fn sde_from_metric(metric: &dyn Metric) -> SdeSpec<'_> {
    SdeSpec {
        metric,
        a: metric.half_width(),
        support_radius: if metric.is_flat() {
            0.0
        } else {
            metric.support_radius()
        },
    }
}

impl SdeSpec<'_> {
    #[inline]
    fn is_flat_at(&self, x1: f64) -> bool {
        x1.abs() > self.support_radius
    }

    /// `(b, sigma)` at `x`.
    pub fn coefficients(&self, x: [f64; 2]) -> ([f64; 2], [f64; 2]) {
        if self.is_flat_at(x[0]) {
            return ([0.0, 0.0], [SQRT2, SQRT2]);
        }
        let f = self.metric.f(x[0], x[1]);
        let d1 = self.metric.d1f(x[0], x[1]);
        let d2 = self.metric.d2f(x[0], x[1]);
        ([-d1 / (f * f * f), d2 / f], [SQRT2 / f, SQRT2])
    }
}

/// Simulation controls.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Times at which positions are recorded; the last one is `t_max`.
    pub checkpoints: Vec<f64>,
    /// `|x1|` beyond which a path is counted as having left the box.
    pub x1_box: f64,
}

/// Outcome of a batch of killed paths.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub n_paths: usize,
    pub x0: [f64; 2],
    pub seed: u64,
    pub dt: f64,
    /// Kill times, `f64::INFINITY` for paths alive at `t_max`.
    pub kill_times: Vec<f64>,
    pub checkpoints: Vec<f64>,
    /// Positions of the paths alive at each checkpoint.
    pub positions: Vec<Vec<[f64; 2]>>,
    /// Alive paths that reached `|x1| >= x1_box` before `t_max`.
    pub escaped: usize,
}

struct PathRecord {
    kill: f64,
    positions: Vec<Option<[f64; 2]>>,
    escaped: bool,
}

fn run_path(sde: &SdeSpec<'_>, x0: [f64; 2], steps: &[usize], dt: f64, seed: u64, index: u64, x1_box: f64) -> PathRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let a = sde.a;
    let sq = dt.sqrt();
    let mut x = x0;
    let mut positions = vec![None; steps.len()];
    let mut next = 0;
    while next < steps.len() && steps[next] == 0 {
        positions[next] = Some(x);
        next += 1;
    }
    let total = steps.last().copied().unwrap_or(0);
    let mut escaped = false;
    for k in 1..=total {
        let (b, s) = sde.coefficients(x);
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let y = [x[0] + b[0] * dt + s[0] * sq * z1, x[1] + b[1] * dt + s[1] * sq * z2];
        let t = k as f64 * dt;
        if y[1].abs() >= a {
            return PathRecord { kill: t, positions, escaped };
        }
        // Brownian-bridge crossing probability against each wall, with
        // transverse variance 2 dt
        let u: f64 = rng.random();
        let upper = (-(a - x[1]) * (a - y[1]) / dt).exp();
        let lower = (-(a + x[1]) * (a + y[1]) / dt).exp();
        if u < upper + lower - upper * lower {
            return PathRecord { kill: t, positions, escaped };
        }
        x = y;
        if x[0].abs() >= x1_box {
            escaped = true;
        }
        while next < steps.len() && steps[next] == k {
            positions[next] = Some(x);
            next += 1;
        }
    }
    PathRecord {
        kill: f64::INFINITY,
        positions,
        escaped,
    }
}

/// Euler-Maruyama with a bridge kill correction at `x2 = +/-a`.
///
/// Paths use independent ChaCha streams keyed by their index, so the
/// result does not depend on how the work is scheduled.
pub fn simulate_killed(sde: &SdeSpec<'_>, x0: [f64; 2], opts: &SimOptions) -> Result<PathEnsemble> {
    let a = sde.a;
    if !(x0[1].abs() < a) || !x0[0].is_finite() {
        return Err(LabError::BadStart { x1: x0[0], x2: x0[1] });
    }
    let limit = a * a / 100.0;
    if !(opts.dt > 0.0) || opts.dt > limit {
        return Err(LabError::StepTooLarge { dt: opts.dt, limit });
    }
    if opts.checkpoints.windows(2).any(|w| w[1] < w[0]) || opts.checkpoints.iter().any(|&t| t < 0.0) {
        return Err(LabError::InvalidArgument("checkpoints must be increasing and nonnegative".into()));
    }
    let steps: Vec<usize> = opts
        .checkpoints
        .iter()
        .map(|&t| (t / opts.dt).round() as usize)
        .collect();

    let run = |i: usize| run_path(sde, x0, &steps, opts.dt, opts.seed, i as u64, opts.x1_box);
    #[cfg(feature = "parallel")]
    let records: Vec<PathRecord> = {
        use rayon::prelude::*;
        (0..opts.n_paths).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let records: Vec<PathRecord> = (0..opts.n_paths).map(run).collect();

    let mut positions = vec![Vec::new(); steps.len()];
    let mut kill_times = Vec::with_capacity(records.len());
    let mut escaped = 0;
    for r in records {
        kill_times.push(r.kill);
        escaped += usize::from(r.escaped && r.kill.is_infinite());
        for (slot, p) in positions.iter_mut().zip(r.positions) {
            if let Some(p) = p {
                slot.push(p);
            }
        }
    }
    Ok(PathEnsemble {
        n_paths: opts.n_paths,
        x0,
        seed: opts.seed,
        dt: opts.dt,
        kill_times,
        checkpoints: opts.checkpoints.clone(),
        positions,
        escaped,
    })
}

/// Quantile of the two-sided 99% normal interval.
pub const Z99: f64 = 2.575_829_303_548_901;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurvivalEstimate {
    pub t: f64,
    pub probability: f64,
    /// Half-width of the 99% Wilson score interval.
    pub half_width: f64,
    pub hits: usize,
    pub n_paths: usize,
    pub region: Region,
}

impl SurvivalEstimate {
    pub fn interval(&self) -> (f64, f64) {
        let n = self.n_paths as f64;
        let p = self.probability;
        let z2 = Z99 * Z99;
        let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
        (centre - self.half_width, centre + self.half_width)
    }

    /// Lower end of the normal-approximation interval.
    pub fn normal_lower(&self) -> f64 {
        let n = self.n_paths as f64;
        let p = self.probability;
        p - Z99 * (p * (1.0 - p) / n).sqrt()
    }
}

fn wilson_half_width(hits: usize, n: usize) -> f64 {
    let n = n as f64;
    let p = hits as f64 / n;
    let z2 = Z99 * Z99;
    Z99 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n)
}

fn checkpoint_index(ens: &PathEnsemble, t: f64) -> Result<usize> {
    ens.checkpoints
        .iter()
        .position(|&c| (c - t).abs() <= 1e-9 * t.abs().max(1.0))
        .ok_or(LabError::CheckpointMissing(t))
}

/// `P(X_t in B, tau > t)` with its binomial interval.
pub fn survival_estimate(ens: &PathEnsemble, region: Region, t: f64) -> Result<SurvivalEstimate> {
    let k = checkpoint_index(ens, t)?;
    let hits = ens.positions[k].iter().filter(|p| region.contains(**p)).count();
    Ok(SurvivalEstimate {
        t,
        probability: hits as f64 / ens.n_paths as f64,
        half_width: wilson_half_width(hits, ens.n_paths),
        hits,
        n_paths: ens.n_paths,
        region,
    })
}

/// Fraction of paths with `tau > t` at any `t`, from the kill times.
pub fn alive_fraction(ens: &PathEnsemble, t: f64) -> f64 {
    ens.kill_times.iter().filter(|&&k| k > t).count() as f64 / ens.n_paths as f64
}

/// Pointwise exponent fit `log P + E1 t = c + slope log t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointwiseRate {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    /// Rate from the free fit `log P = c - lambda t + slope log t`.
    pub lambda_free: f64,
    pub slope_free: f64,
}

/// Minimum number of times for a pointwise fit.
pub const MIN_RATE_POINTS: usize = 6;

fn weighted_ls(cols: &[Vec<f64>], y: &[f64], w: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let sw: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
    let scaled: Vec<Vec<f64>> = cols
        .iter()
        .map(|c| c.iter().zip(&sw).map(|(a, b)| a * b).collect())
        .collect();
    let ys: Vec<f64> = y.iter().zip(&sw).map(|(a, b)| a * b).collect();
    let (beta, se, _) = crate::evolution::least_squares(&scaled, &ys)?;
    Ok((beta, se))
}

pub fn pointwise_rate(estimates: &[SurvivalEstimate], e1: f64) -> Result<PointwiseRate> {
    if estimates.len() < MIN_RATE_POINTS {
        return Err(LabError::DegenerateFit {
            samples: estimates.len(),
            required: MIN_RATE_POINTS,
        });
    }
    if let Some(bad) = estimates.iter().find(|e| e.normal_lower() <= 0.0) {
        return Err(LabError::InsufficientSignal(format!(
            "interval at t = {} reaches zero ({} hits)",
            bad.t, bad.hits
        )));
    }
    // var(log p) ~ (1 - p) / (n p)
    let w: Vec<f64> = estimates
        .iter()
        .map(|e| e.n_paths as f64 * e.probability / (1.0 - e.probability))
        .collect();
    let ones = vec![1.0; estimates.len()];
    let lt: Vec<f64> = estimates.iter().map(|e| e.t.ln()).collect();
    let t: Vec<f64> = estimates.iter().map(|e| e.t).collect();
    let y: Vec<f64> = estimates.iter().map(|e| e.probability.ln() + e1 * e.t).collect();
    let (b, se) = weighted_ls(&[ones.clone(), lt.clone()], &y, &w)?;
    let yl: Vec<f64> = estimates.iter().map(|e| e.probability.ln()).collect();
    let (bf, _) = weighted_ls(&[ones, t, lt], &yl, &w)?;
    Ok(PointwiseRate {
        slope: b[1],
        stderr: se[1],
        intercept: b[0],
        lambda_free: -bf[1],
        slope_free: bf[2],
    })
}

/// Rectangular bins over the strip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bins {
    pub x1: (f64, f64, usize),
    pub x2: (f64, f64, usize),
}

/// Normalized histogram of `X_t` given survival, row-major in `x1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bins: Bins,
    pub mass: Vec<f64>,
    pub alive: usize,
    /// Survivors falling outside every bin.
    pub outside: usize,
}

impl Histogram {
    pub fn bin_center(&self, i: usize, j: usize) -> [f64; 2] {
        let (a0, a1, na) = self.bins.x1;
        let (b0, b1, nb) = self.bins.x2;
        [
            a0 + (i as f64 + 0.5) * (a1 - a0) / na as f64,
            b0 + (j as f64 + 0.5) * (b1 - b0) / nb as f64,
        ]
    }

    /// Total variation distance to another mass vector on the same bins.
    pub fn tv_distance(&self, other: &[f64]) -> f64 {
        0.5 * self.mass.iter().zip(other).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }
}

/// Minimum number of survivors for a conditional histogram.
pub const MIN_SURVIVORS: usize = 100;

pub fn conditional_distribution(ens: &PathEnsemble, t: f64, bins: Bins) -> Result<Histogram> {
    let k = checkpoint_index(ens, t)?;
    let pos = &ens.positions[k];
    if pos.len() < MIN_SURVIVORS {
        return Err(LabError::TooFewSurvivors {
            t,
            alive: pos.len(),
            required: MIN_SURVIVORS,
        });
    }
    let (a0, a1, na) = bins.x1;
    let (b0, b1, nb) = bins.x2;
    let mut counts = vec![0usize; na * nb];
    let mut outside = 0;
    for p in pos {
        let i = ((p[0] - a0) / (a1 - a0) * na as f64).floor();
        let j = ((p[1] - b0) / (b1 - b0) * nb as f64).floor();
        if i < 0.0 || j < 0.0 || i >= na as f64 || j >= nb as f64 {
            outside += 1;
            continue;
        }
        counts[i as usize * nb + j as usize] += 1;
    }
    let alive = pos.len();
    Ok(Histogram {
        bins,
        mass: counts.iter().map(|&c| c as f64 / alive as f64).collect(),
        alive,
        outside,
    })
}

/// Kolmogorov-Smirnov test of the survivors' `x1` against `N(x0_1, 2t)`.
///
/// Returns the statistic and its asymptotic p-value.
pub fn ks_flat_marginal(ens: &PathEnsemble, t: f64) -> Result<(f64, f64)> {
    let k = checkpoint_index(ens, t)?;
    let mut xs: Vec<f64> = ens.positions[k].iter().map(|p| p[0]).collect();
    if xs.len() < MIN_SURVIVORS {
        return Err(LabError::TooFewSurvivors {
            t,
            alive: xs.len(),
            required: MIN_SURVIVORS,
        });
    }
    xs.sort_by(f64::total_cmp);
    let normal = Normal::new(ens.x0[0], (2.0 * t).sqrt())
        .map_err(|e| LabError::InvalidArgument(e.to_string()))?;
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let c = normal.cdf(x);
        d = d.max((c - i as f64 / n).abs()).max(((i + 1) as f64 / n - c).abs());
    }
    Ok((d, ks_pvalue(d * n.sqrt())))
}

/// Asymptotic Kolmogorov distribution tail `P(K > x)`.
fn ks_pvalue(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * x * x).exp();
        s += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    s.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{FlatMetric, RuledMetric, ThetaDot};
    use crate::oracle::{flat_survival, SeriesOptions};
    use std::f64::consts::FRAC_PI_2;

    fn opts(n: usize, checkpoints: Vec<f64>) -> SimOptions {
        SimOptions {
            dt: 1e-3,
            n_paths: n,
            seed: 7,
            checkpoints,
            x1_box: 50.0,
        }
    }

    #[test]
    fn flat_coefficients_are_exact() {
        let m = FlatMetric { a: 1.0 };
        let sde = sde_from_metric(&m);
        assert_eq!(sde.coefficients([0.3, 0.2]), ([0.0, 0.0], [SQRT2, SQRT2]));
    }

    #[test]
    fn ruled_transverse_drift() {
        // f = sqrt(2) and d2 f / f = 1/2 at theta' = 1, x2 = 1
        let m = RuledMetric {
            theta_dot: ThetaDot::Constant(1.0),
            a: 1.5,
        };
        let sde = sde_from_metric(&m);
        let (b, s) = sde.coefficients([0.0, 1.0]);
        assert!((b[1] - 0.5).abs() < 1e-12);
        assert_eq!(b[0], 0.0);
        assert!((s[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_horizon_and_determinism() {
        let m = FlatMetric { a: 1.0 };
        let sde = sde_from_metric(&m);
        let e = simulate_killed(&sde, [0.0, 0.0], &opts(50, vec![0.0])).unwrap();
        assert!(e.kill_times.iter().all(|k| k.is_infinite()));
        assert!(e.positions[0].iter().all(|p| *p == [0.0, 0.0]));
        let a = simulate_killed(&sde, [0.1, 0.2], &opts(200, vec![0.1, 0.3])).unwrap();
        let b = simulate_killed(&sde, [0.1, 0.2], &opts(200, vec![0.1, 0.3])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn preconditions() {
        let m = FlatMetric { a: 1.0 };
        let sde = sde_from_metric(&m);
        assert!(matches!(
            simulate_killed(&sde, [0.0, 1.0], &opts(1, vec![1.0])),
            Err(LabError::BadStart { .. })
        ));
        let mut o = opts(1, vec![1.0]);
        o.dt = 0.1;
        assert!(matches!(simulate_killed(&sde, [0.0, 0.0], &o), Err(LabError::StepTooLarge { .. })));
        let e = simulate_killed(&sde, [0.0, 0.0], &opts(10, vec![0.1])).unwrap();
        assert!(matches!(
            survival_estimate(&e, Region::Whole, 0.2),
            Err(LabError::CheckpointMissing(_))
        ));
    }

    #[test]
    fn flat_survival_matches_oracle() {
        let a = FRAC_PI_2;
        let m = FlatMetric { a };
        let sde = sde_from_metric(&m);
        let e = simulate_killed(&sde, [0.0, 0.0], &opts(20_000, vec![0.5, 1.0])).unwrap();
        for t in [0.5, 1.0] {
            let est = survival_estimate(&e, Region::Whole, t).unwrap();
            let exact = flat_survival([0.0, 0.0], Region::Whole, t, a, &SeriesOptions::default())
                .unwrap()
                .value;
            assert!(
                (est.probability - exact).abs() <= 3.0 * est.half_width,
                "t = {t}: {} vs {exact}",
                est.probability
            );
            assert!((alive_fraction(&e, t) - est.probability).abs() < 1e-12);
        }
        let (_, p) = ks_flat_marginal(&e, 1.0).unwrap();
        assert!(p > 1e-3, "KS p-value {p}");
        let far = Region::rect((100.0, 101.0), (-1.0, 1.0));
        assert_eq!(survival_estimate(&e, far, 1.0).unwrap().probability, 0.0);
    }

    #[test]
    fn survival_is_monotone_and_histogram_normalized() {
        let m = FlatMetric { a: 1.0 };
        let sde = sde_from_metric(&m);
        let cps = vec![0.0, 0.1, 0.2, 0.4];
        let e = simulate_killed(&sde, [0.0, 0.3], &opts(2000, cps.clone())).unwrap();
        let s: Vec<f64> = cps.iter().map(|&t| survival_estimate(&e, Region::Whole, t).unwrap().probability).collect();
        assert!(s.windows(2).all(|w| w[1] <= w[0]));
        let bins = Bins {
            x1: (-3.0, 3.0, 12),
            x2: (-1.0, 1.0, 8),
        };
        let h0 = conditional_distribution(&e, 0.0, bins).unwrap();
        assert_eq!(h0.mass.iter().filter(|&&m| m > 0.0).count(), 1);
        let h = conditional_distribution(&e, 0.4, bins).unwrap();
        let total: f64 = h.mass.iter().sum::<f64>() + h.outside as f64 / h.alive as f64;
        assert!((total - 1.0).abs() < 1e-12);
        assert!(matches!(
            conditional_distribution(&simulate_killed(&sde, [0.0, 0.0], &opts(50, vec![0.1])).unwrap(), 0.1, bins),
            Err(LabError::TooFewSurvivors { .. })
        ));
    }

    #[test]
    fn curved_increments_are_flat_outside_support() {
        let m = RuledMetric {
            theta_dot: ThetaDot::Bump {
                amplitude: 0.4,
                radius: 2.0,
            },
            a: 1.0,
        };
        let sde = sde_from_metric(&m);
        assert_eq!(sde.coefficients([2.5, 0.3]), ([0.0, 0.0], [SQRT2, SQRT2]));
        let (b, s) = sde.coefficients([0.5, 0.3]);
        assert!(b[1] > 0.0 && s[0] < SQRT2);
    }

    #[test]
    fn pointwise_rate_rejects_weak_signal() {
        let est: Vec<SurvivalEstimate> = (1..=6)
            .map(|k| SurvivalEstimate {
                t: k as f64,
                probability: if k == 6 { 0.0 } else { 0.1 },
                half_width: 0.01,
                hits: if k == 6 { 0 } else { 100 },
                n_paths: 1000,
                region: Region::Whole,
            })
            .collect();
        assert!(matches!(pointwise_rate(&est, 1.0), Err(LabError::InsufficientSignal(_))));
    }

    #[test]
    fn ks_pvalue_limits() {
        assert!((ks_pvalue(1.36) - 0.05).abs() < 2e-3);
        assert_eq!(ks_pvalue(0.0), 1.0);
    }
}
