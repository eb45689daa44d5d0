//! The self-similar operator `L_s` and the harmonic oscillator it tends to.

use super::{assemble, discrete_e1, lowest_eigenpairs, Coefficients, OperatorKind, OperatorPair, WeightedGrid};
use crate::error::{LabError, Result};
use crate::geometry::{linspace, Metric};

/// Discretization controls for `L_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsOptions {
    /// Half-length of the `y1` box.
    pub ly: f64,
    /// Spacing away from the rescaled curvature support.
    pub h_coarse: f64,
    /// Nodes across the rescaled support `|y1| <= R e^{-s/2}`.
    pub fine_nodes: usize,
    /// Width of the fine zone relative to the rescaled support.
    pub fine_factor: f64,
    /// Largest eigenvalue of interest, for the truncation check.
    pub expected_range: f64,
    pub tol: f64,
}

impl Default for LsOptions {
    fn default() -> Self {
        Self {
            ly: 20.0,
            h_coarse: 0.1,
            fine_nodes: 240,
            fine_factor: 1.25,
            expected_range: 1.0,
            tol: 1e-8,
        }
    }
}

/// `y1` nodes: uniform with spacing `h_coarse`, refined across the rescaled
/// support of the curvature. Always symmetric and containing 0.
pub fn self_similar_grid(s: f64, support_radius: f64, opts: &LsOptions) -> Vec<f64> {
    let half = (opts.ly / opts.h_coarse).round().max(1.0) as usize;
    let mut nodes = linspace(-opts.ly, opts.ly, 2 * half + 1);
    let r = support_radius * (-0.5 * s).exp() * opts.fine_factor;
    if r > 0.0 && r.is_finite() && r < opts.ly {
        let nf = opts.fine_nodes.max(2) / 2;
        if r / (nf as f64) < opts.h_coarse {
            nodes.retain(|y| y.abs() > r);
            nodes.extend(linspace(-r, r, 2 * nf + 1));
            nodes.sort_by(f64::total_cmp);
        }
    }
    nodes
}

/// The form
/// `||f_s^-1 d1 v||^2 + e^s ||d2 v||^2 - e^s E1 ||v||^2 - ||v||^2/4
///  - (y1 v, d1 v)/2 + (y1 v, [2 - f_s^-2] y1 v)/16`
/// in `L^2(f_s dy)`, with `f_s(y) = f(e^{s/2} y1, y2)`.
///
/// `e1` is the transverse threshold subtracted in the second line of the
/// form; pass the discrete one from the same transverse nodes to make the
/// flat operator exactly the oscillator.
pub fn assemble_ls<M: Metric + ?Sized>(
    metric: &M,
    s: f64,
    grid: &WeightedGrid,
    e1: f64,
    expected_range: f64,
) -> Result<OperatorPair> {
    if s < 0.0 {
        return Err(LabError::InvalidArgument(format!("s = {s} must be nonnegative")));
    }
    let ly = grid.x1[grid.n1() - 1].min(-grid.x1[0]);
    let boundary = ly * ly / 16.0;
    if boundary < 10.0 * expected_range {
        return Err(LabError::TruncationWarning {
            boundary_value: boundary,
            range: expected_range,
        });
    }
    let es = s.exp();
    let scale = (0.5 * s).exp();
    let (sm, mm) = assemble(grid, |y1, y2| {
        let f = metric.f(scale * y1, y2);
        Coefficients {
            a11: 1.0 / f,
            a22: es * f,
            cross: -0.5 * y1 * f,
            potential: f * (-es * e1 - 0.25 + y1 * y1 * (2.0 - 1.0 / (f * f)) / 16.0),
            mass: f,
        }
    })?;
    Ok(OperatorPair {
        s: sm,
        m: mm,
        kind: OperatorKind::Ls,
        grid: grid.clone(),
    })
}

/// `-d^2/dy^2 + y^2/16` on the given nodes, Dirichlet at the ends and,
/// when requested, at `y = 0`.
pub fn harmonic_oscillator(dirichlet_at_zero: bool, nodes: &[f64]) -> Result<OperatorPair> {
    let mut grid = WeightedGrid::line(nodes.to_vec(), true);
    if dirichlet_at_zero {
        grid = grid.with_dirichlet_at(0.0)?;
    }
    let (s, m) = assemble(&grid, |y, _| Coefficients {
        a11: 1.0,
        potential: y * y / 16.0,
        mass: 1.0,
        ..Default::default()
    })?;
    Ok(OperatorPair {
        s,
        m,
        kind: OperatorKind::Oscillator,
        grid,
    })
}

/// Collapses eigenvalues closer than `tol` (relative) into one level.
pub fn distinct_levels(values: &[f64], tol: f64) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for &v in values {
        match out.last() {
            Some(&p) if (v - p).abs() <= tol * p.abs().max(1.0) => {}
            _ => out.push(v),
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuPoint {
    pub s: f64,
    pub nu: f64,
    pub residual: f64,
}

/// `nu_K(s)`, the lowest eigenvalue of `L_s`, on transverse nodes `x2`.
pub fn nu<M: Metric + ?Sized>(metric: &M, s: f64, x2: &[f64], opts: &LsOptions) -> Result<NuPoint> {
    let e1 = discrete_e1(x2)?;
    nu_with(metric, s, x2, e1, opts)
}

fn nu_with<M: Metric + ?Sized>(
    metric: &M,
    s: f64,
    x2: &[f64],
    e1: f64,
    opts: &LsOptions,
) -> Result<NuPoint> {
    let y1 = self_similar_grid(s, metric.support_radius(), opts);
    let grid = WeightedGrid::tensor(y1, x2.to_vec(), true);
    let pair = assemble_ls(metric, s, &grid, e1, opts.expected_range)?;
    let ev = lowest_eigenpairs(&pair, 1, opts.tol)?;
    Ok(NuPoint {
        s,
        nu: ev.values[0],
        residual: ev.residuals[0],
    })
}

/// `nu_K(s)` over a lattice of `s` values.
pub fn nu_sweep<M: Metric + ?Sized>(
    metric: &M,
    s_values: &[f64],
    x2: &[f64],
    opts: &LsOptions,
) -> Result<Vec<NuPoint>> {
    let e1 = discrete_e1(x2)?;
    let run = |&s: &f64| nu_with(metric, s, x2, e1, opts);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        s_values.par_iter().map(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        s_values.iter().map(run).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FlatMetric;

    #[test]
    fn oscillator_spectrum_and_odd_subsequence() {
        let nodes = linspace(-20.0, 20.0, 2001);
        let h = harmonic_oscillator(false, &nodes).unwrap();
        let ev = lowest_eigenpairs(&h, 4, 1e-10).unwrap();
        for (n, v) in ev.values.iter().enumerate() {
            assert!((v - 0.5 * (n as f64 + 0.5)).abs() < 1e-4, "{v}");
        }
        // the node at 0 splits the line into two identical halves
        let hd = harmonic_oscillator(true, &nodes).unwrap();
        let evd = lowest_eigenpairs(&hd, 4, 1e-10).unwrap();
        let levels = distinct_levels(&evd.values, 1e-6);
        assert_eq!(levels.len(), 2);
        assert!((levels[0] - ev.values[1]).abs() < 1e-9);
        assert!((levels[1] - ev.values[3]).abs() < 1e-9);
        assert!(matches!(
            harmonic_oscillator(true, &linspace(-20.0, 20.0, 2000)),
            Err(LabError::GridMisaligned)
        ));
    }

    #[test]
    fn odd_eigenfunctions_solve_the_dirichlet_problem() {
        let nodes = linspace(-16.0, 16.0, 801);
        let h = harmonic_oscillator(false, &nodes).unwrap();
        let hd = harmonic_oscillator(true, &nodes).unwrap();
        let ev = lowest_eigenpairs(&h, 4, 1e-11).unwrap();
        for k in [1, 3] {
            let full = h.grid.expand(&ev.vectors[k]);
            let mid = (nodes.len() - 1) / 2;
            assert!(full[mid].abs() < 1e-8);
            let v = hd.grid.restrict(&full);
            let sv = hd.s.matvec(&v);
            let mv = hd.m.matvec(&v);
            let r: f64 = sv
                .iter()
                .zip(&mv)
                .map(|(a, b)| (a - ev.values[k] * b).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(r < 1e-7 * crate::linalg::norm2(&mv), "mode {k}: residual {r}");
        }
    }

    #[test]
    fn flat_ls_is_the_oscillator_for_every_s() {
        let a = std::f64::consts::FRAC_PI_2;
        let x2 = linspace(-a, a, 9);
        let opts = LsOptions::default();
        for s in [0.0, 3.0] {
            let p = nu(&FlatMetric { a }, s, &x2, &opts).unwrap();
            assert!((p.nu - 0.25).abs() < 1e-3, "s = {s}: {}", p.nu);
        }
    }

    #[test]
    fn flat_ls_matches_direct_flat_form() {
        let a = 1.0;
        let x2 = linspace(-a, a, 7);
        let y1 = linspace(-20.0, 20.0, 81);
        let grid = WeightedGrid::tensor(y1, x2, true);
        let e1 = discrete_e1(&grid.x2).unwrap();
        let s = 1.3;
        let ls = assemble_ls(&FlatMetric { a }, s, &grid, e1, 1.0).unwrap();
        let es = s.exp();
        let (sd, md) = assemble(&grid, |y1, _| Coefficients {
            a11: 1.0,
            a22: es,
            potential: -es * e1 + y1 * y1 / 16.0,
            mass: 1.0,
            ..Default::default()
        })
        .unwrap();
        let v = grid.interpolate(|y, x| (-(y * y) / 8.0).exp() * (1.0 + 0.2 * y) * (a * a - x * x));
        let lhs = ls.s.quad(&v);
        let rhs = sd.quad(&v);
        assert!((lhs - rhs).abs() < 1e-10 * rhs.abs().max(1.0), "{lhs} vs {rhs}");
        assert!((ls.m.quad(&v) - md.quad(&v)).abs() < 1e-12);
    }

    #[test]
    fn short_box_is_flagged() {
        let grid = WeightedGrid::tensor(linspace(-5.0, 5.0, 21), linspace(-1.0, 1.0, 5), true);
        assert!(matches!(
            assemble_ls(&FlatMetric { a: 1.0 }, 0.0, &grid, 2.4, 1.0),
            Err(LabError::TruncationWarning { .. })
        ));
    }

    #[test]
    fn graded_grid_contains_zero_and_refines() {
        let g = self_similar_grid(8.0, 6.0, &LsOptions::default());
        assert!(g.iter().any(|&y| y == 0.0));
        let h0 = g.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        assert!(h0 < 2e-3);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }
}
