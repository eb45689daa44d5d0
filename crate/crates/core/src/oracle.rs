//! Closed-form flat-strip and half-line quantities.
//!
//! Every series value comes with an explicit bound on the truncated tail.

use std::f64::consts::PI;

use statrs::function::erf::erf;

use crate::error::{LabError, Result};
use crate::region::Region;

/// Smallest time the series oracles accept.
pub const MIN_ORACLE_TIME: f64 = 0.01;

/// Default absolute tolerance for series truncation.
pub const DEFAULT_ABS_TOL: f64 = 1e-8;

/// Transverse Dirichlet eigenvalue `(n pi / 2a)^2`.
pub fn transverse_energy(a: f64, n: usize) -> f64 {
    let k = n as f64 * PI / (2.0 * a);
    k * k
}

/// Normalized Dirichlet mode on `(-a, a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransverseMode {
    pub index: usize,
    pub energy: f64,
    pub half_width: f64,
}

impl TransverseMode {
    pub fn new(a: f64, index: usize) -> Self {
        assert!(index >= 1, "mode index starts at 1");
        Self {
            index,
            energy: transverse_energy(a, index),
            half_width: a,
        }
    }

    fn wavenumber(&self) -> f64 {
        self.index as f64 * PI / (2.0 * self.half_width)
    }

    pub fn eval(&self, x2: f64) -> f64 {
        let a = self.half_width;
        if x2.abs() > a {
            return 0.0;
        }
        (1.0 / a).sqrt() * (self.wavenumber() * (x2 + a)).sin()
    }

    /// `\int_lo^hi J_n(x2) dx2`, clipped to `[-a, a]`.
    pub fn integral(&self, lo: f64, hi: f64) -> f64 {
        let a = self.half_width;
        let (lo, hi) = (lo.max(-a), hi.min(a));
        if hi <= lo {
            return 0.0;
        }
        let k = self.wavenumber();
        (1.0 / a).sqrt() / k * ((k * (lo + a)).cos() - (k * (hi + a)).cos())
    }

    pub fn samples(&self, nodes: &[f64]) -> Vec<f64> {
        nodes.iter().map(|&x| self.eval(x)).collect()
    }
}

pub fn transverse_modes(a: f64, n_max: usize) -> Vec<TransverseMode> {
    (1..=n_max).map(|n| TransverseMode::new(a, n)).collect()
}

/// A truncated series value and its guaranteed absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub tail_bound: f64,
    pub n_terms: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesOptions {
    /// Fixed number of terms; chosen from the tail bound when `None`.
    pub n_terms: Option<usize>,
    pub abs_tol: f64,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self {
            n_terms: None,
            abs_tol: DEFAULT_ABS_TOL,
        }
    }
}

/// `sum_{n > n_terms} exp(-E_n t)` bounded by a geometric majorant.
fn exp_tail(a: f64, t: f64, n_terms: usize) -> f64 {
    let c = transverse_energy(a, 1) * t;
    let n1 = (n_terms + 1) as f64;
    let first = (-c * n1 * n1).exp();
    let ratio = (-c * (2.0 * n1 + 1.0)).exp();
    first / (1.0 - ratio)
}

fn choose_terms(a: f64, t: f64, scale: f64, opts: &SeriesOptions) -> Result<(usize, f64)> {
    if t < MIN_ORACLE_TIME {
        return Err(LabError::DomainError(format!(
            "oracle refuses t = {t} < {MIN_ORACLE_TIME}"
        )));
    }
    let n = match opts.n_terms {
        Some(n) => n,
        None => {
            let mut n = 1;
            while scale * exp_tail(a, t, n) > opts.abs_tol && n < 10_000 {
                n += 1;
            }
            n
        }
    };
    let bound = scale * exp_tail(a, t, n);
    if bound > opts.abs_tol {
        return Err(LabError::TailTooLarge {
            bound,
            tolerance: opts.abs_tol,
        });
    }
    Ok((n, bound))
}

/// Free heat kernel of `d^2/dx^2` on the line.
pub fn heat_kernel_1d(x: f64, y: f64, t: f64) -> f64 {
    let d = x - y;
    (-d * d / (4.0 * t)).exp() / (4.0 * PI * t).sqrt()
}

/// `\int_lo^hi p(x, y, t) dy`.
pub fn heat_kernel_mass(x: f64, lo: f64, hi: f64, t: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let s = (4.0 * t).sqrt();
    0.5 * (erf((hi - x) / s) - erf((lo - x) / s))
}

/// Dirichlet heat kernel of the flat strip of half-width `a`.
pub fn flat_kernel(
    x: [f64; 2],
    y: [f64; 2],
    t: f64,
    a: f64,
    opts: &SeriesOptions,
) -> Result<SeriesValue> {
    let p = heat_kernel_1d(x[0], y[0], t);
    let (n, tail) = choose_terms(a, t, p / a, opts)?;
    let value = p * (1..=n)
        .map(|k| {
            let m = TransverseMode::new(a, k);
            (-m.energy * t).exp() * m.eval(x[1]) * m.eval(y[1])
        })
        .sum::<f64>();
    Ok(SeriesValue {
        value,
        tail_bound: tail,
        n_terms: n,
    })
}

/// Heat kernel on the half-line killed at the origin.
pub fn killed_halfline_kernel(t: f64, x: f64, y: f64) -> f64 {
    let minus = (x - y) * (x - y) / (4.0 * t);
    let plus = (x + y) * (x + y) / (4.0 * t);
    // e^{-minus} - e^{-plus} = e^{-minus} (1 - e^{-(plus - minus)})
    (-minus).exp() * (-(plus - minus)).exp_m1().abs() / (4.0 * PI * t).sqrt()
}

/// `P_{x0}(X_t in B, tau > t)` on the flat strip.
pub fn flat_survival(
    x0: [f64; 2],
    region: Region,
    t: f64,
    a: f64,
    opts: &SeriesOptions,
) -> Result<SeriesValue> {
    let (lo2, hi2) = region.x2_range(a);
    let x1_mass = match region {
        Region::Whole => 1.0,
        Region::Rect { x1, .. } => heat_kernel_mass(x0[0], x1.0, x1.1, t),
    };
    // |J_n(x2)| <= a^{-1/2},  |int_B J_n| <= (hi2 - lo2) a^{-1/2}
    let scale = x1_mass * (hi2 - lo2).max(0.0) / a;
    let (n, tail) = choose_terms(a, t, scale.max(f64::MIN_POSITIVE), opts)?;
    let value = x1_mass
        * (1..=n)
            .map(|k| {
                let m = TransverseMode::new(a, k);
                (-m.energy * t).exp() * m.eval(x0[1]) * m.integral(lo2, hi2)
            })
            .sum::<f64>();
    Ok(SeriesValue {
        value,
        tail_bound: tail,
        n_terms: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const HALF_PI: f64 = std::f64::consts::FRAC_PI_2;

    fn gauss_legendre(f: impl Fn(f64) -> f64, lo: f64, hi: f64, panels: usize) -> f64 {
        let nodes = [
            (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
            (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
            (0.0, 0.568_888_888_888_888_9),
            (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
            (0.906_179_845_938_664, 0.236_926_885_056_189_1),
        ];
        let h = (hi - lo) / panels as f64;
        (0..panels)
            .map(|p| {
                let c = lo + (p as f64 + 0.5) * h;
                nodes
                    .iter()
                    .map(|(x, w)| w * f(c + 0.5 * h * x))
                    .sum::<f64>()
                    * 0.5
                    * h
            })
            .sum()
    }

    #[test]
    fn mode_values() {
        let m = TransverseMode::new(HALF_PI, 1);
        assert_abs_diff_eq!(m.energy, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(m.eval(0.0), 0.797_885, epsilon = 1e-6);
        assert_abs_diff_eq!(transverse_energy(1.0, 2), 9.8696, epsilon = 1e-4);
        assert_eq!(m.eval(HALF_PI).abs() < 1e-15, true);
    }

    #[test]
    fn modes_are_orthonormal_by_quadrature() {
        for a in [0.5, 1.0, HALF_PI] {
            let modes = transverse_modes(a, 4);
            for i in &modes {
                for j in &modes {
                    let v = gauss_legendre(|x| i.eval(x) * j.eval(x), -a, a, 64);
                    let expect = if i.index == j.index { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(v, expect, epsilon = 1e-10);
                }
                let int = gauss_legendre(|x| i.eval(x), -a, a, 64);
                assert_abs_diff_eq!(int, i.integral(-a, a), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn free_kernel_at_origin() {
        assert_abs_diff_eq!(heat_kernel_1d(0.0, 0.0, 1.0), 0.282_095, epsilon = 1e-6);
    }

    #[test]
    fn halfline_kernel_values() {
        assert_abs_diff_eq!(killed_halfline_kernel(1.0, 1.0, 1.0), 0.178_318, epsilon = 1e-6);
        assert!(killed_halfline_kernel(1.0, 1.0, 1e-9) < 1e-9);
        for &(t, x, y) in &[(0.5, 0.3, 2.0), (3.0, 1.0, 1.0), (10.0, 4.0, 0.1)] {
            assert!(killed_halfline_kernel(t, x, y) <= heat_kernel_1d(x, y, t));
        }
    }

    #[test]
    fn halfline_kernel_solves_heat_equation() {
        let h = 1e-3;
        for &(t, x, y) in &[(0.7, 0.8, 1.3), (2.0, 0.4, 2.2), (5.0, 3.0, 1.0)] {
            let dt = (killed_halfline_kernel(t + h, x, y) - killed_halfline_kernel(t - h, x, y))
                / (2.0 * h);
            let dxx = (killed_halfline_kernel(t, x + h, y) - 2.0 * killed_halfline_kernel(t, x, y)
                + killed_halfline_kernel(t, x - h, y))
                / (h * h);
            assert!((dt - dxx).abs() < 1e-4, "residual {}", dt - dxx);
        }
    }

    #[test]
    fn kernel_symmetry_and_tail() {
        let opts = SeriesOptions::default();
        let x = [0.3, -0.4];
        let y = [-1.1, 0.9];
        let k1 = flat_kernel(x, y, 0.5, 1.0, &opts).unwrap();
        let k2 = flat_kernel(y, x, 0.5, 1.0, &opts).unwrap();
        assert_abs_diff_eq!(k1.value, k2.value, epsilon = 1e-15);
        assert!(k1.tail_bound <= 1e-8);
        assert!(flat_kernel(x, y, 0.001, 1.0, &opts).is_err());
        let fixed = SeriesOptions {
            n_terms: Some(1),
            abs_tol: 1e-12,
        };
        assert!(matches!(
            flat_kernel(x, y, 0.05, 1.0, &fixed),
            Err(LabError::TailTooLarge { .. })
        ));
    }

    #[test]
    fn chapman_kolmogorov_by_quadrature() {
        let a = 1.0;
        let opts = SeriesOptions::default();
        let x = [0.2, 0.1];
        let y = [-0.5, -0.3];
        let (t, s) = (0.3, 0.4);
        let direct = flat_kernel(x, y, t + s, a, &opts).unwrap().value;
        // the kernel factorizes, so the strip integral splits into a line
        // integral and a transverse integral of the series
        let inner2 = |z2: f64| {
            let modes = transverse_modes(a, 30);
            let left: Vec<f64> = modes
                .iter()
                .map(|m| (-m.energy * t).exp() * m.eval(x[1]) * m.eval(z2))
                .collect();
            let right: Vec<f64> = modes
                .iter()
                .map(|m| (-m.energy * s).exp() * m.eval(z2) * m.eval(y[1]))
                .collect();
            left.iter().sum::<f64>() * right.iter().sum::<f64>()
        };
        let trans = gauss_legendre(inner2, -a, a, 200);
        let line = gauss_legendre(
            |z1| heat_kernel_1d(x[0], z1, t) * heat_kernel_1d(z1, y[0], s),
            -12.0,
            12.0,
            400,
        );
        assert_abs_diff_eq!(trans * line, direct, epsilon = 1e-6);
    }

    #[test]
    fn kernel_marginal_equals_survival_series() {
        let a = HALF_PI;
        let opts = SeriesOptions::default();
        let x = [0.0, 0.2];
        let t = 0.8;
        let marginal = gauss_legendre(
            |y2| {
                gauss_legendre(
                    |y1| flat_kernel(x, [y1, y2], t, a, &opts).unwrap().value,
                    -15.0,
                    15.0,
                    60,
                )
            },
            -a,
            a,
            24,
        );
        let surv = flat_survival(x, Region::Whole, t, a, &opts).unwrap();
        assert_abs_diff_eq!(marginal, surv.value, epsilon = 1e-7);
    }

    #[test]
    fn survival_long_time_limit() {
        let a = HALF_PI;
        let opts = SeriesOptions::default();
        let m = TransverseMode::new(a, 1);
        let limit = m.eval(0.0) * m.integral(-a, a);
        let t = 12.0;
        let v = flat_survival([0.0, 0.0], Region::Whole, t, a, &opts).unwrap();
        assert_abs_diff_eq!(v.value * (m.energy * t).exp(), limit, epsilon = 1e-6);
    }

    #[test]
    fn bounded_set_survival_decays_like_inverse_sqrt() {
        let a = HALF_PI;
        let opts = SeriesOptions::default();
        let b = Region::rect((-1.0, 1.0), (-a, a));
        let g = |t: f64| flat_survival([0.0, 0.0], b, t, a, &opts).unwrap().value * t.exp();
        let ratio = g(400.0) / g(100.0);
        assert_abs_diff_eq!(ratio, 0.5, epsilon = 2e-3);
    }
}
