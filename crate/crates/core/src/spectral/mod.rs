//! Weighted finite-element forms and their lowest eigenpairs.
//!
//! Every operator is represented by its quadratic form on a tensor grid of
//! piecewise (bi)linear elements: a stiffness matrix `S` and a mass matrix
//! `M` for the weighted measure `f dx`. Dirichlet nodes are eliminated, and
//! the remaining unknowns are numbered with `x2` running fastest so that
//! both matrices are banded.

mod assembly;
mod hardy;
mod selfsimilar;

pub use assembly::{assemble, Coefficients};
pub use hardy::{
    curvature_pairing, essential_threshold_probe, hardy_constant, hardy_verify,
    perturbed_threshold, thin_strip_bound, thin_strip_constant, HardyCertificate, ThinStripBound,
    ThresholdProbe, TrialOptions,
};
pub use selfsimilar::{
    assemble_ls, distinct_levels, harmonic_oscillator, nu, nu_sweep, self_similar_grid, LsOptions, NuPoint,
};

use crate::error::{LabError, Result};
use crate::geometry::Metric;
use crate::linalg::{lowest_generalized, Eigenpairs, LanczosOptions, SymBanded};

pub type EigenResult = Eigenpairs;

/// Tensor grid of nodes with a Dirichlet mask.
///
/// A one-dimensional grid is stored with a single `x2` node at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGrid {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    mask: Vec<bool>,
    free_index: Vec<Option<usize>>,
    free: Vec<usize>,
}

impl WeightedGrid {
    fn from_mask(x1: Vec<f64>, x2: Vec<f64>, mask: Vec<bool>) -> Self {
        let mut free_index = vec![None; mask.len()];
        let mut free = Vec::new();
        for (g, &m) in mask.iter().enumerate() {
            if !m {
                free_index[g] = Some(free.len());
                free.push(g);
            }
        }
        Self {
            x1,
            x2,
            mask,
            free_index,
            free,
        }
    }

    /// Two-dimensional grid: Dirichlet on `x2 = +/-a`, and on the `x1` ends
    /// when `dirichlet_x1` is set.
    pub fn tensor(x1: Vec<f64>, x2: Vec<f64>, dirichlet_x1: bool) -> Self {
        let (n1, n2) = (x1.len(), x2.len());
        let mut mask = vec![false; n1 * n2];
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                let wall = i2 == 0 || i2 + 1 == n2;
                let end = dirichlet_x1 && (i1 == 0 || i1 + 1 == n1);
                mask[i1 * n2 + i2] = wall || end;
            }
        }
        Self::from_mask(x1, x2, mask)
    }

    /// One-dimensional grid with optional Dirichlet ends.
    pub fn line(nodes: Vec<f64>, dirichlet_ends: bool) -> Self {
        let n = nodes.len();
        let mask = (0..n)
            .map(|i| dirichlet_ends && (i == 0 || i + 1 == n))
            .collect();
        Self::from_mask(nodes, vec![0.0], mask)
    }

    /// Adds the node at `x1 = value` (one-dimensional grids) to the mask.
    pub fn with_dirichlet_at(self, value: f64) -> Result<Self> {
        let i = self
            .x1
            .iter()
            .position(|&x| (x - value).abs() <= 1e-12 * (1.0 + value.abs()))
            .ok_or(LabError::GridMisaligned)?;
        let n2 = self.n2();
        let mut mask = self.mask;
        for i2 in 0..n2 {
            mask[i * n2 + i2] = true;
        }
        Ok(Self::from_mask(self.x1, self.x2, mask))
    }

    pub fn n1(&self) -> usize {
        self.x1.len()
    }

    pub fn n2(&self) -> usize {
        self.x2.len()
    }

    pub fn is_line(&self) -> bool {
        self.x2.len() == 1
    }

    pub fn n_nodes(&self) -> usize {
        self.mask.len()
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn is_masked(&self, node: usize) -> bool {
        self.mask[node]
    }

    pub fn free_index(&self, node: usize) -> Option<usize> {
        self.free_index[node]
    }

    /// Global node of each unknown.
    pub fn free_nodes(&self) -> &[usize] {
        &self.free
    }

    pub fn coords(&self, node: usize) -> [f64; 2] {
        let n2 = self.n2();
        [self.x1[node / n2], self.x2[node % n2]]
    }

    /// Scatters unknowns onto all nodes, with zeros on the mask.
    pub fn expand(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_nodes()];
        for (k, &g) in self.free.iter().enumerate() {
            out[g] = v[k];
        }
        out
    }

    /// Gathers nodal values at the unknowns.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&g| full[g]).collect()
    }

    /// Nodal interpolant of `g` at the unknowns.
    pub fn interpolate(&self, g: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.free
            .iter()
            .map(|&n| {
                let [x1, x2] = self.coords(n);
                g(x1, x2)
            })
            .collect()
    }

    /// Largest distance between coupled unknowns.
    pub(crate) fn bandwidth(&self) -> usize {
        let n2 = self.n2();
        let mut bw = 0;
        let cells2 = if self.is_line() { 1 } else { n2 - 1 };
        for i1 in 0..self.n1().saturating_sub(1) {
            for j in 0..cells2 {
                let nodes = element_nodes(i1, j, n2, self.is_line());
                let idx: Vec<usize> = nodes.iter().filter_map(|&g| self.free_index[g]).collect();
                if let (Some(lo), Some(hi)) = (idx.iter().min(), idx.iter().max()) {
                    bw = bw.max(hi - lo);
                }
            }
        }
        bw
    }
}

pub(crate) fn element_nodes(i1: usize, j: usize, n2: usize, line: bool) -> Vec<usize> {
    if line {
        vec![i1, i1 + 1]
    } else {
        vec![
            i1 * n2 + j,
            (i1 + 1) * n2 + j,
            i1 * n2 + j + 1,
            (i1 + 1) * n2 + j + 1,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Hk,
    Ls,
    Transverse,
    Oscillator,
    Perturbed,
    Weight,
}

impl OperatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            OperatorKind::Hk => "h_K",
            OperatorKind::Ls => "L_s",
            OperatorKind::Transverse => "transverse",
            OperatorKind::Oscillator => "oscillator",
            OperatorKind::Perturbed => "perturbed",
            OperatorKind::Weight => "weight",
        }
    }
}

/// Stiffness and mass matrices of a form on a grid.
#[derive(Debug, Clone)]
pub struct OperatorPair {
    pub s: SymBanded,
    pub m: SymBanded,
    pub kind: OperatorKind,
    pub grid: WeightedGrid,
}

impl OperatorPair {
    pub fn dim(&self) -> usize {
        self.s.dim()
    }

    /// Row sums of the mass matrix: quadrature weights of `f dx` at the unknowns.
    pub fn lumped_mass(&self) -> Vec<f64> {
        self.m.matvec(&vec![1.0; self.dim()])
    }

    /// `S[v] / M[v]`.
    pub fn rayleigh(&self, v: &[f64]) -> f64 {
        self.s.quad(v) / self.m.quad(v)
    }

    /// Norm of `v` in the weighted `L^2` space.
    pub fn norm(&self, v: &[f64]) -> f64 {
        self.m.quad(v).max(0.0).sqrt()
    }

    /// Same mass, stiffness `S + extra`.
    pub fn with_added(&self, extra: &SymBanded, kind: OperatorKind) -> Self {
        Self {
            s: self.s.combine(1.0, extra, 1.0),
            m: self.m.clone(),
            kind,
            grid: self.grid.clone(),
        }
    }
}

/// `h_K[psi] = int (f^-1 |d1 psi|^2 + f |d2 psi|^2) dx`, mass `int |psi|^2 f dx`.
pub fn assemble_hk<M: Metric + ?Sized>(metric: &M, grid: &WeightedGrid) -> Result<OperatorPair> {
    let (s, m) = assemble(grid, |x1, x2| {
        let f = metric.f(x1, x2);
        Coefficients {
            a11: 1.0 / f,
            a22: f,
            mass: f,
            ..Default::default()
        }
    })?;
    Ok(OperatorPair {
        s,
        m,
        kind: OperatorKind::Hk,
        grid: grid.clone(),
    })
}

/// Mass matrix of the weight `rho f`, for weighted norms `||rho^(1/2) psi||_f^2`.
pub fn assemble_weight<M: Metric + ?Sized>(
    metric: &M,
    grid: &WeightedGrid,
    rho: impl Fn(f64, f64) -> f64 + Sync,
) -> Result<SymBanded> {
    let (_, m) = assembly::assemble_unchecked(grid, |x1, x2| Coefficients {
        mass: rho(x1, x2) * metric.f(x1, x2),
        ..Default::default()
    });
    Ok(m)
}

/// Transverse pair on one column: `int |phi'|^2 f dx2` and `int |phi|^2 f dx2`.
pub fn transverse_pair<M: Metric + ?Sized>(metric: &M, x1: f64, x2: &[f64]) -> Result<OperatorPair> {
    let grid = WeightedGrid::line(x2.to_vec(), true);
    let (s, m) = assemble(&grid, |y, _| {
        let f = metric.f(x1, y);
        Coefficients {
            a11: f,
            mass: f,
            ..Default::default()
        }
    })?;
    Ok(OperatorPair {
        s,
        m,
        kind: OperatorKind::Transverse,
        grid,
    })
}

/// Lowest Dirichlet eigenvalue of `-d^2/dx2^2` on the given transverse nodes.
///
/// This is the discrete counterpart of `E1 = (pi/2a)^2`, used wherever a
/// threshold has to cancel exactly against the same discretization.
pub fn discrete_e1(x2: &[f64]) -> Result<f64> {
    let a = 0.5 * (x2[x2.len() - 1] - x2[0]);
    let pair = transverse_pair(&crate::geometry::FlatMetric { a }, 0.0, x2)?;
    Ok(lowest_eigenpairs(&pair, 1, 1e-10)?.values[0])
}

/// `mu_K(x1)`: lowest eigenvalue of the weighted transverse problem minus
/// the flat threshold on the same nodes.
pub fn transverse_mu<M: Metric + ?Sized>(metric: &M, x1: f64, x2: &[f64]) -> Result<f64> {
    let e1 = discrete_e1(x2)?;
    transverse_mu_with(metric, x1, x2, e1)
}

pub(crate) fn transverse_mu_with<M: Metric + ?Sized>(
    metric: &M,
    x1: f64,
    x2: &[f64],
    e1: f64,
) -> Result<f64> {
    if x1.abs() > metric.support_radius() {
        return Ok(0.0);
    }
    let pair = transverse_pair(metric, x1, x2)?;
    Ok(lowest_eigenpairs(&pair, 1, 1e-10)?.values[0] - e1)
}

/// `mu_K` along a list of columns.
pub fn transverse_mu_profile<M: Metric + ?Sized>(
    metric: &M,
    x1: &[f64],
    x2: &[f64],
) -> Result<Vec<f64>> {
    let e1 = discrete_e1(x2)?;
    let run = |&x: &f64| transverse_mu_with(metric, x, x2, e1);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        x1.par_iter().map(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        x1.iter().map(run).collect()
    }
}

/// Strict solve with the given options.
pub fn lowest_eigenpairs_with(
    pair: &OperatorPair,
    k: usize,
    opts: &LanczosOptions,
) -> Result<EigenResult> {
    lowest_generalized(&pair.s, &pair.m, k, opts)
}

/// The `k` lowest eigenpairs with relative tolerance `tol`.
///
/// A loose first pass at the shift -1 estimates the bottom of the spectrum;
/// the strict pass then shifts to just below it, which keeps clustered
/// eigenvalues (long boxes, thin strips) well separated. A shift that lands
/// inside the spectrum is caught by the Cholesky factorization and moved
/// down.
pub fn lowest_eigenpairs(pair: &OperatorPair, k: usize, tol: f64) -> Result<EigenResult> {
    let n = pair.dim();
    let base = LanczosOptions {
        tol,
        ..Default::default()
    };
    let mut shift = base.shift;
    // make sure the starting shift is admissible
    for _ in 0..8 {
        if pair.s.combine(1.0, &pair.m, -shift).cholesky().is_ok() {
            break;
        }
        shift *= 8.0;
    }
    let probe = LanczosOptions {
        shift,
        tol: tol.max(1e-5),
        max_restarts: 12,
        ..base
    };
    let kp = (k + 1).min(n);
    if let Ok(est) = lowest_generalized(&pair.s, &pair.m, kp, &probe) {
        let lo = est.values[0];
        let spread = (est.values[kp - 1] - lo).max(1e-6 * lo.abs().max(1.0));
        let mut step = 0.5 * spread;
        for _ in 0..6 {
            let sigma = lo - step;
            if sigma <= shift {
                break;
            }
            let opts = LanczosOptions { shift: sigma, ..base };
            match lowest_generalized(&pair.s, &pair.m, k, &opts) {
                Err(LabError::ShiftInsideSpectrum { .. }) => step *= 4.0,
                other => return other,
            }
        }
    }
    lowest_generalized(&pair.s, &pair.m, k, &LanczosOptions { shift, ..base })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{linspace, FlatMetric};
    use std::f64::consts::PI;

    #[test]
    fn flat_transverse_spectrum() {
        let x2 = linspace(-PI / 2.0, PI / 2.0, 201);
        let pair = transverse_pair(&FlatMetric { a: PI / 2.0 }, 0.0, &x2).unwrap();
        let ev = lowest_eigenpairs(&pair, 3, 1e-10).unwrap();
        for (k, v) in ev.values.iter().enumerate() {
            let exact = ((k + 1) * (k + 1)) as f64;
            assert!((v - exact).abs() < 2e-4 * exact, "{v} vs {exact}");
        }
    }

    #[test]
    fn flat_mu_vanishes() {
        let x2 = linspace(-1.0, 1.0, 33);
        assert_eq!(transverse_mu(&FlatMetric { a: 1.0 }, 0.0, &x2).unwrap(), 0.0);
    }

    #[test]
    fn flat_hk_matches_tensor_decomposition() {
        let (a, l) = (1.0, 3.0);
        let x1 = linspace(-l, l, 61);
        let x2 = linspace(-a, a, 17);
        let grid = WeightedGrid::tensor(x1.clone(), x2.clone(), true);
        let pair = assemble_hk(&FlatMetric { a }, &grid).unwrap();
        let ev = lowest_eigenpairs(&pair, 3, 1e-10).unwrap();
        let long = lowest_eigenpairs(
            &{
                let g = WeightedGrid::line(x1, true);
                let (s, m) = assemble(&g, |_, _| Coefficients {
                    a11: 1.0,
                    mass: 1.0,
                    ..Default::default()
                })
                .unwrap();
                OperatorPair {
                    s,
                    m,
                    kind: OperatorKind::Transverse,
                    grid: g,
                }
            },
            3,
            1e-10,
        )
        .unwrap();
        let e1 = discrete_e1(&x2).unwrap();
        for k in 0..3 {
            let want = e1 + long.values[k];
            assert!((ev.values[k] - want).abs() < 1e-8 * want, "{} vs {want}", ev.values[k]);
        }
        assert!(ev.residuals.iter().all(|r| *r <= 1e-10));
    }

    #[test]
    fn flat_hk_ground_state_near_threshold() {
        let a = 1.0;
        let grid = WeightedGrid::tensor(linspace(-20.0, 20.0, 161), linspace(-a, a, 33), true);
        let pair = assemble_hk(&FlatMetric { a }, &grid).unwrap();
        let ev = lowest_eigenpairs(&pair, 2, 1e-9).unwrap();
        let e1 = PI * PI / 4.0;
        assert!(ev.values[0] > e1 && ev.values[0] < e1 + 0.01);
        assert!(ev.vectors[0].iter().all(|&v| v >= -1e-10));
    }

    #[test]
    fn dirichlet_removal_lowers_eigenvalues() {
        let x1 = linspace(-2.0, 2.0, 41);
        let x2 = linspace(-1.0, 1.0, 11);
        let metric = FlatMetric { a: 1.0 };
        let closed = assemble_hk(&metric, &WeightedGrid::tensor(x1.clone(), x2.clone(), true)).unwrap();
        let open = assemble_hk(&metric, &WeightedGrid::tensor(x1, x2, false)).unwrap();
        let c = lowest_eigenpairs(&closed, 3, 1e-10).unwrap();
        let o = lowest_eigenpairs(&open, 3, 1e-10).unwrap();
        for k in 0..3 {
            assert!(o.values[k] <= c.values[k] + 1e-12);
        }
    }

    #[test]
    fn line_grid_misaligned() {
        let g = WeightedGrid::line(linspace(-1.0, 1.0, 10), true);
        assert!(matches!(g.with_dirichlet_at(0.0), Err(LabError::GridMisaligned)));
    }
}
