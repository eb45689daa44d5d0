//! Heat flow `u' + H_K u = 0` in `L^2(f dx)` and decay-rate extraction.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{LabError, Result};
use crate::geometry::Metric;
use crate::linalg::{BandedCholesky, SymBanded};
use crate::oracle::TransverseMode;
use crate::spectral::{
    assemble, lowest_eigenpairs, transverse_pair, Coefficients, NuPoint, OperatorPair, WeightedGrid,
};

/// Solution snapshot on the unknowns of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatState {
    pub u: Vec<f64>,
    pub t: f64,
    pub norm_f: f64,
    /// `||u||_{wf}` with `w = exp(x1^2 / 4)`, when it is finite.
    pub norm_wf: Option<f64>,
}

/// Families of initial data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialKind {
    /// `w^{-alpha} J1(x2)`, normalized in `L^2(wf)`.
    Mode { alpha: f64 },
    /// Indicator of a rectangle, unnormalized.
    Indicator { x1: (f64, f64), x2: (f64, f64) },
    /// Narrow Gaussian of unit `L^1(f)` mass around `x0`.
    Delta { x0: [f64; 2], width: f64 },
}

const GAUSS3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_31, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

/// `||u||_{wf}` by elementwise Gauss quadrature, with the weight combined
/// in log space so that large `x1` never overflows on its own.
pub fn weighted_norm<M: Metric + ?Sized>(grid: &WeightedGrid, metric: &M, u: &[f64]) -> Option<f64> {
    let full = grid.expand(u);
    let n2 = grid.n2();
    let mut total = 0.0;
    for i1 in 0..grid.n1() - 1 {
        let (xa, h1) = (grid.x1[i1], grid.x1[i1 + 1] - grid.x1[i1]);
        for j in 0..n2 - 1 {
            let (ya, h2) = (grid.x2[j], grid.x2[j + 1] - grid.x2[j]);
            let c = [
                full[i1 * n2 + j],
                full[(i1 + 1) * n2 + j],
                full[i1 * n2 + j + 1],
                full[(i1 + 1) * n2 + j + 1],
            ];
            if c.iter().all(|&v| v == 0.0) {
                continue;
            }
            for &(p, wp) in &GAUSS3 {
                for &(q, wq) in &GAUSS3 {
                    let v = c[0] * (1.0 - p) * (1.0 - q)
                        + c[1] * p * (1.0 - q)
                        + c[2] * (1.0 - p) * q
                        + c[3] * p * q;
                    if v == 0.0 {
                        continue;
                    }
                    let (x1, x2) = (xa + p * h1, ya + q * h2);
                    let log = 0.25 * x1 * x1 + 2.0 * v.abs().ln();
                    total += wp * wq * h1 * h2 * log.exp() * metric.f(x1, x2);
                }
            }
        }
    }
    let n = total.sqrt();
    n.is_finite().then_some(n)
}

pub fn weighted_initial<M: Metric + ?Sized>(
    pair: &OperatorPair,
    metric: &M,
    kind: InitialKind,
) -> Result<HeatState> {
    let grid = &pair.grid;
    let a = metric.half_width();
    let u = match kind {
        InitialKind::Mode { alpha } => {
            if alpha <= 0.5 {
                return Err(LabError::NotInWeightedSpace { alpha });
            }
            let mode = TransverseMode::new(a, 1);
            let raw = grid.interpolate(|x1, x2| (-0.25 * alpha * x1 * x1).exp() * mode.eval(x2));
            let n = weighted_norm(grid, metric, &raw).ok_or_else(|| {
                LabError::InvalidArgument("weighted norm of the initial datum overflowed".into())
            })?;
            raw.into_iter().map(|v| v / n).collect()
        }
        InitialKind::Indicator { x1, x2 } => grid.interpolate(|s, t| {
            if s >= x1.0 && s <= x1.1 && t >= x2.0 && t <= x2.1 {
                1.0
            } else {
                0.0
            }
        }),
        InitialKind::Delta { x0, width } => {
            let raw = grid.interpolate(|s, t| {
                let r2 = (s - x0[0]).powi(2) + (t - x0[1]).powi(2);
                (-r2 / (2.0 * width * width)).exp()
            });
            let mass: f64 = pair.lumped_mass().iter().zip(&raw).map(|(m, v)| m * v).sum();
            raw.into_iter().map(|v| v / mass).collect()
        }
    };
    let norm_f = pair.norm(&u);
    Ok(HeatState {
        norm_wf: weighted_norm(grid, metric, &u),
        u,
        t: 0.0,
        norm_f,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    pub dt: f64,
    /// Backward-Euler half steps taken first to damp rough data.
    pub smoothing_steps: usize,
}

impl EvolveOptions {
    /// `dt = min(0.01, (t1 - t0) / 2000)`.
    pub fn for_window(t0: f64, t1: f64) -> Self {
        Self {
            dt: 0.01f64.min((t1 - t0) / 2000.0),
            smoothing_steps: 4,
        }
    }
}

/// `(M + theta dt S)` factorizations keyed by the step, reused across calls.
struct Stepper<'a> {
    pair: &'a OperatorPair,
    cache: HashMap<(u64, bool), BandedCholesky>,
}

impl<'a> Stepper<'a> {
    fn new(pair: &'a OperatorPair) -> Self {
        Self {
            pair,
            cache: HashMap::new(),
        }
    }

    fn factor(&mut self, dt: f64, implicit: bool) -> Result<&BandedCholesky> {
        let key = (dt.to_bits(), implicit);
        if !self.cache.contains_key(&key) {
            let theta = if implicit { 1.0 } else { 0.5 };
            let a = self.pair.m.combine(1.0, &self.pair.s, theta * dt);
            let chol = a.cholesky().map_err(|e| {
                LabError::LinearSolveFailure(format!("step matrix not positive definite: {e}"))
            })?;
            self.cache.insert(key, chol);
        }
        Ok(&self.cache[&key])
    }

    /// One Crank-Nicolson step, or backward Euler when `implicit`.
    fn step(&mut self, u: &mut Vec<f64>, dt: f64, implicit: bool) -> Result<()> {
        let mut rhs = self.pair.m.matvec(u);
        if !implicit {
            let su = self.pair.s.matvec(u);
            for (r, s) in rhs.iter_mut().zip(&su) {
                *r -= 0.5 * dt * s;
            }
        }
        self.factor(dt, implicit)?.solve_in_place(&mut rhs);
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(LabError::LinearSolveFailure("non-finite solution".into()));
        }
        *u = rhs;
        Ok(())
    }
}

/// Trajectory at the requested times (which must not precede `u0.t`).
pub fn evolve(
    pair: &OperatorPair,
    u0: &HeatState,
    times: &[f64],
    opts: &EvolveOptions,
) -> Result<Vec<HeatState>> {
    if !(opts.dt > 0.0) {
        return Err(LabError::InvalidArgument(format!("dt = {} must be positive", opts.dt)));
    }
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < u0.t) {
        return Err(LabError::InvalidArgument("times must be increasing from t0".into()));
    }
    let mut stepper = Stepper::new(pair);
    let mut u = u0.u.clone();
    let mut t = u0.t;
    let mut smoothing = opts.smoothing_steps;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        loop {
            let remaining = target - t;
            if remaining <= 1e-12 * target.abs().max(1.0) {
                break;
            }
            if smoothing > 0 {
                let h = (0.5 * opts.dt).min(remaining);
                stepper.step(&mut u, h, true)?;
                t += h;
                smoothing -= 1;
                continue;
            }
            let h = if remaining < opts.dt * (1.0 + 1e-9) { remaining } else { opts.dt };
            // snap the final step so cached factorizations stay reusable
            let h = if (h - opts.dt).abs() < 1e-12 { opts.dt } else { h };
            stepper.step(&mut u, h, false)?;
            t += h;
        }
        t = t.max(target);
        out.push(HeatState {
            norm_f: pair.norm(&u),
            u: u.clone(),
            t: target,
            norm_wf: None,
        });
    }
    Ok(out)
}

/// Result of the decay regressions over a window.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    /// Rate from `log ||u|| = c - lambda t - gamma log(1 + t)`.
    pub lambda_hat: f64,
    /// Exponent from `log ||u|| + E1 t = c - gamma log(1 + t)`.
    pub gamma_hat: f64,
    /// Exponent from the free-rate regression.
    pub gamma_free: f64,
    /// Rate from the pure exponential `log ||u|| = c - lambda t`.
    pub lambda_exp: f64,
    pub stderr_lambda: f64,
    pub stderr_gamma: f64,
    pub window: (f64, f64),
    pub samples: usize,
    pub residual_norm: f64,
}

/// Ordinary least squares; returns coefficients, standard errors and the
/// residual norm.
pub fn least_squares(columns: &[Vec<f64>], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let n = y.len();
    let p = columns.len();
    if n <= p {
        return Err(LabError::DegenerateFit {
            samples: n,
            required: p + 1,
        });
    }
    let x = DMatrix::from_fn(n, p, |i, j| columns[j][i]);
    let yv = DVector::from_column_slice(y);
    let xtx = x.transpose() * &x;
    let inv = xtx
        .try_inverse()
        .ok_or_else(|| LabError::InvalidArgument("collinear regressors".into()))?;
    let beta = &inv * x.transpose() * &yv;
    let resid = &yv - &x * &beta;
    let rss = resid.norm_squared();
    let sigma2 = rss / (n - p) as f64;
    let se = (0..p).map(|j| (sigma2 * inv[(j, j)]).max(0.0).sqrt()).collect();
    Ok((beta.iter().copied().collect(), se, rss.sqrt()))
}

/// Minimum number of trajectory samples inside a fit window.
pub const MIN_FIT_SAMPLES: usize = 8;

pub fn fit_decay(trajectory: &[HeatState], e1: f64, window: (f64, f64)) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = trajectory
        .iter()
        .filter(|s| s.t >= window.0 - 1e-12 && s.t <= window.1 + 1e-12 && s.norm_f > 0.0)
        .map(|s| (s.t, s.norm_f.ln()))
        .collect();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(LabError::DegenerateFit {
            samples: pts.len(),
            required: MIN_FIT_SAMPLES,
        });
    }
    let ones = vec![1.0; pts.len()];
    let t: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let lt: Vec<f64> = t.iter().map(|v| (1.0 + v).ln()).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let yc: Vec<f64> = pts.iter().map(|p| p.1 + e1 * p.0).collect();

    let (bc, sec, res) = least_squares(&[ones.clone(), lt.clone()], &yc)?;
    let (bf, sef, _) = least_squares(&[ones.clone(), t.clone(), lt], &y)?;
    let (be, _, _) = least_squares(&[ones, t], &y)?;
    Ok(DecayFit {
        lambda_hat: -bf[1],
        gamma_hat: -bc[1],
        gamma_free: -bf[2],
        lambda_exp: -be[1],
        stderr_lambda: sef[1],
        stderr_gamma: sec[1],
        window,
        samples: pts.len(),
        residual_norm: res,
    })
}

/// Longitudinal profile `phi(x1) = (J1, u(x1, .))` and the remainder.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeProjection {
    pub x1: Vec<f64>,
    pub phi: Vec<f64>,
    /// `||u - J1 (x) phi||` in the unweighted `L^2`.
    pub remainder: f64,
    pub norm: f64,
}

/// Projection on the discrete first transverse mode of the grid.
pub fn project_mode1(grid: &WeightedGrid, u: &[f64]) -> Result<ModeProjection> {
    let (n1, n2) = (grid.n1(), grid.n2());
    let a = 0.5 * (grid.x2[n2 - 1] - grid.x2[0]);
    let tp = transverse_pair(&crate::geometry::FlatMetric { a }, 0.0, &grid.x2)?;
    let j1 = tp.grid.expand(&lowest_eigenpairs(&tp, 1, 1e-12)?.vectors[0]);
    let m2 = &tp.m;
    let inner = n2 - 2;

    let long = WeightedGrid::line(grid.x1.clone(), false);
    let (_, m1) = assemble(&long, |_, _| Coefficients {
        mass: 1.0,
        ..Default::default()
    })?;

    let full = grid.expand(u);
    let mut phi = vec![0.0; n1];
    let mut cols = vec![vec![0.0; inner]; n1];
    for i1 in 0..n1 {
        cols[i1].copy_from_slice(&full[i1 * n2 + 1..i1 * n2 + 1 + inner]);
        let mj = m2.matvec(&j1[1..n2 - 1]);
        phi[i1] = cols[i1].iter().zip(&mj).map(|(a, b)| a * b).sum();
    }
    // ||u||^2 = sum_ij M1_ij (u_i, u_j)_{M2}
    let mut norm2 = 0.0;
    for i in 0..n1 {
        let mui = m2.matvec(&cols[i]);
        for j in i.saturating_sub(1)..(i + 2).min(n1) {
            let w = m1.get(i, j);
            if w != 0.0 {
                norm2 += w * cols[j].iter().zip(&mui).map(|(a, b)| a * b).sum::<f64>();
            }
        }
    }
    let p2 = m1.quad(&phi);
    Ok(ModeProjection {
        x1: grid.x1.clone(),
        phi,
        remainder: (norm2 - p2).max(0.0).sqrt(),
        norm: norm2.max(0.0).sqrt(),
    })
}

/// Exponent predicted by `exp(-int_0^s nu)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeminormBound {
    /// `(1/s) int nu` over the sampled lattice.
    pub average: f64,
    /// Estimate of `nu(infinity)`: the value at the largest `s`.
    pub limit: f64,
    pub s_max: f64,
}

pub fn seminorm_decay_bound(nu: &[NuPoint]) -> Result<SeminormBound> {
    let mut pts: Vec<(f64, f64)> = nu.iter().map(|p| (p.s, p.nu)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let Some(&(s_max, last)) = pts.last() else {
        return Err(LabError::InvalidArgument("no samples of nu".into()));
    };
    if pts.len() == 1 {
        return Ok(SeminormBound {
            average: last,
            limit: last,
            s_max,
        });
    }
    let integral: f64 = pts
        .windows(2)
        .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
        .sum();
    Ok(SeminormBound {
        average: integral / (s_max - pts[0].0),
        limit: last,
        s_max,
    })
}

/// Rate of the discrete semigroup on an eigenvector: one Crank-Nicolson
/// factor per step, for exactness checks.
pub fn crank_nicolson_factor(lambda: f64, dt: f64) -> f64 {
    (1.0 - 0.5 * dt * lambda) / (1.0 + 0.5 * dt * lambda)
}

/// Mass matrix restricted to a sub-box, for norms of `u` over a region.
pub fn region_mass<M: Metric + ?Sized>(
    grid: &WeightedGrid,
    metric: &M,
    region: crate::region::Region,
) -> SymBanded {
    crate::spectral::assemble_weight(metric, grid, move |x1, x2| {
        if region.contains([x1, x2]) {
            1.0
        } else {
            0.0
        }
    })
    .expect("weight assembly does not fail")
}
