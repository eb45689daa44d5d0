//! Curvature profiles and the Jacobi factor `f` of the strip metric
//! `G = diag(f^2, 1)` in Fermi coordinates.
//!
//! `f` solves `d^2 f/dx2^2 + K f = 0` in each column with `f(x1, 0) = 1`
//! and `df/dx2(x1, 0) = 0`. Columns are integrated independently with a
//! fixed-step RK4 scheme and checked against the Taylor envelope
//! `1 -/+ Kbar a^2 / (1 - Kbar a^2)`.

use crate::error::{LabError, Result};

/// Rate of rotation `theta'(x1)` of the segments generating a ruled strip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaDot {
    Constant(f64),
    /// `amplitude * exp(1 - 1 / (1 - (x1/radius)^2))` on `|x1| < radius`.
    Bump { amplitude: f64, radius: f64 },
}

impl ThetaDot {
    pub fn eval(&self, x1: f64) -> f64 {
        match *self {
            ThetaDot::Constant(v) => v,
            ThetaDot::Bump { amplitude, radius } => amplitude * bump(x1 / radius),
        }
    }

    pub fn sup(&self) -> f64 {
        match *self {
            ThetaDot::Constant(v) => v.abs(),
            ThetaDot::Bump { amplitude, .. } => amplitude.abs(),
        }
    }

    /// `theta''(x1)`.
    pub fn derivative(&self, x1: f64) -> f64 {
        match *self {
            ThetaDot::Constant(_) => 0.0,
            ThetaDot::Bump { amplitude, radius } => {
                let r = x1 / radius;
                if r.abs() >= 1.0 {
                    return 0.0;
                }
                let q = 1.0 - r * r;
                amplitude * bump(r) * (-2.0 * r / (q * q)) / radius
            }
        }
    }

    pub fn support_radius(&self) -> f64 {
        match *self {
            ThetaDot::Constant(v) if v == 0.0 => 0.0,
            ThetaDot::Constant(_) => f64::INFINITY,
            ThetaDot::Bump { radius, .. } => radius,
        }
    }
}

/// Standard C-infinity bump, equal to 1 at the origin and 0 for `|r| >= 1`.
pub fn bump(r: f64) -> f64 {
    if r.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - r * r)).exp()
    }
}

/// Smooth cutoff: 1 on `|r| <= 1/2`, 0 on `|r| >= 1`.
pub fn smooth_cutoff(r: f64) -> f64 {
    let psi = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    let r = r.abs();
    let up = psi(1.0 - r);
    let down = psi(r - 0.5);
    if up + down == 0.0 {
        0.0
    } else {
        up / (up + down)
    }
}

/// Curvature values on a tensor table, bilinearly interpolated.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedCurvature {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    /// Row-major, `values[i1 * x2.len() + i2]`.
    pub values: Vec<f64>,
    pub support_radius: f64,
}

impl TabulatedCurvature {
    fn eval(&self, x1: f64, x2: f64) -> f64 {
        if x1.abs() > self.support_radius {
            return 0.0;
        }
        let (i, s) = match locate(&self.x1, x1) {
            Some(v) => v,
            None => return 0.0,
        };
        let (j, t) = match locate(&self.x2, x2) {
            Some(v) => v,
            None => return 0.0,
        };
        let n2 = self.x2.len();
        let v = |a: usize, b: usize| self.values[a * n2 + b];
        let (i1, j1) = ((i + 1).min(self.x1.len() - 1), (j + 1).min(n2 - 1));
        (1.0 - s) * ((1.0 - t) * v(i, j) + t * v(i, j1)) + s * ((1.0 - t) * v(i1, j) + t * v(i1, j1))
    }
}

/// Index of the cell containing `x` and the local coordinate in `[0, 1]`.
fn locate(nodes: &[f64], x: f64) -> Option<(usize, f64)> {
    let n = nodes.len();
    if n == 0 || x < nodes[0] || x > nodes[n - 1] {
        return None;
    }
    if n == 1 {
        return Some((0, 0.0));
    }
    let i = match nodes.binary_search_by(|p| p.total_cmp(&x)) {
        Ok(i) => i.min(n - 2),
        Err(i) => i - 1,
    };
    let h = nodes[i + 1] - nodes[i];
    Some((i, ((x - nodes[i]) / h).clamp(0.0, 1.0)))
}

/// Gauss curvature `K(x1, x2)` of the strip.
#[derive(Debug, Clone, PartialEq)]
pub enum CurvatureProfile {
    Zero,
    /// `amplitude * exp(-((x1-c1)/w1)^2 - ((x2-c2)/w2)^2) * cutoff(x1/radius)`.
    GaussianBump {
        amplitude: f64,
        center: [f64; 2],
        widths: [f64; 2],
        radius: f64,
    },
    /// `value` on `|x1| <= half_length`, zero elsewhere.
    ConstantOnBox { value: f64, half_length: f64 },
    /// Ruled surface: `K = -theta'^2 / f^4`, `f = sqrt(1 + theta'^2 x2^2)`.
    Ruled { theta_dot: ThetaDot },
    Tabulated(TabulatedCurvature),
}

impl CurvatureProfile {
    pub fn kind_name(&self) -> &'static str {
        match self {
            CurvatureProfile::Zero => "zero",
            CurvatureProfile::GaussianBump { .. } => "gaussian-bump",
            CurvatureProfile::ConstantOnBox { .. } => "constant-on-box",
            CurvatureProfile::Ruled { .. } => "ruled",
            CurvatureProfile::Tabulated(_) => "custom-tabulated",
        }
    }

    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        match self {
            CurvatureProfile::Zero => 0.0,
            CurvatureProfile::GaussianBump {
                amplitude,
                center,
                widths,
                radius,
            } => {
                let cut = smooth_cutoff(x1 / radius);
                if cut == 0.0 {
                    return 0.0;
                }
                let u = (x1 - center[0]) / widths[0];
                let v = (x2 - center[1]) / widths[1];
                amplitude * (-u * u - v * v).exp() * cut
            }
            CurvatureProfile::ConstantOnBox { value, half_length } => {
                if x1.abs() <= *half_length {
                    *value
                } else {
                    0.0
                }
            }
            CurvatureProfile::Ruled { theta_dot } => ruled_point(theta_dot.eval(x1), x2).curvature,
            CurvatureProfile::Tabulated(t) => t.eval(x1, x2),
        }
    }

    /// Radius `R` with `K = 0` whenever `|x1| > R`.
    pub fn support_radius(&self) -> f64 {
        match self {
            CurvatureProfile::Zero => 0.0,
            CurvatureProfile::GaussianBump { radius, .. } => *radius,
            CurvatureProfile::ConstantOnBox { half_length, .. } => *half_length,
            CurvatureProfile::Ruled { theta_dot } => theta_dot.support_radius(),
            CurvatureProfile::Tabulated(t) => t.support_radius,
        }
    }

    /// Upper bound for `|K|` over the whole strip.
    pub fn sup_norm(&self) -> f64 {
        match self {
            CurvatureProfile::Zero => 0.0,
            CurvatureProfile::GaussianBump { amplitude, .. } => amplitude.abs(),
            CurvatureProfile::ConstantOnBox { value, .. } => value.abs(),
            // |K| = theta'^2 / f^4 is largest on the axis
            CurvatureProfile::Ruled { theta_dot } => theta_dot.sup().powi(2),
            CurvatureProfile::Tabulated(t) => t.values.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    /// `k(x1) = lim_{a -> 0} ess inf_{|x2| < a} K(x1, x2)`.
    pub fn axis_infimum(&self, x1: f64) -> f64 {
        let h = 1e-9;
        self.eval(x1, 0.0).min(self.eval(x1, h)).min(self.eval(x1, -h))
    }

    /// `Kbar(x1) = sup_{|x2| < a} |K(x1, x2)|`, sampled on a fine column.
    pub fn column_sup(&self, x1: f64, a: f64) -> f64 {
        match self {
            CurvatureProfile::Zero => 0.0,
            CurvatureProfile::ConstantOnBox { .. } => self.eval(x1, 0.0).abs(),
            CurvatureProfile::Ruled { theta_dot } => theta_dot.eval(x1).powi(2),
            _ => {
                let n = 1024;
                (0..=n)
                    .map(|k| self.eval(x1, -a + 2.0 * a * k as f64 / n as f64).abs())
                    .fold(0.0, f64::max)
            }
        }
    }
}

/// Strip half-width, longitudinal truncation and grid sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StripGeometry {
    pub a: f64,
    pub l: f64,
    pub n1: usize,
    pub n2: usize,
}

impl StripGeometry {
    /// Validates `sup_norm * a^2 < 1/2`, `L > R` and the grid sizes.
    pub fn new(a: f64, l: f64, n1: usize, n2: usize, profile: &CurvatureProfile) -> Result<Self> {
        if !(a > 0.0) || !(l > 0.0) {
            return Err(LabError::InvalidGeometry(format!(
                "half-width {a} and truncation {l} must be positive"
            )));
        }
        let xi = profile.sup_norm() * a * a;
        if !(xi < 0.5) {
            return Err(LabError::InvalidGeometry(format!(
                "sup|K| a^2 = {xi} violates the bound 1/2"
            )));
        }
        let r = profile.support_radius();
        if !(l > r) {
            return Err(LabError::InvalidGeometry(format!(
                "truncation L = {l} must exceed the support radius R = {r}"
            )));
        }
        if n1 < 3 {
            return Err(LabError::InvalidGeometry("need at least 3 columns".into()));
        }
        if n2 < 5 || n2 % 2 == 0 {
            return Err(LabError::InvalidGeometry(format!(
                "transverse node count {n2} must be odd and >= 5 so that x2 = 0 is a node"
            )));
        }
        Ok(Self { a, l, n1, n2 })
    }

    pub fn x1_nodes(&self) -> Vec<f64> {
        linspace(-self.l, self.l, self.n1)
    }

    pub fn x2_nodes(&self) -> Vec<f64> {
        linspace(-self.a, self.a, self.n2)
    }

    pub fn h2(&self) -> f64 {
        2.0 * self.a / (self.n2 - 1) as f64
    }

    /// Lowest transverse Dirichlet eigenvalue `(pi / 2a)^2`.
    pub fn e1(&self) -> f64 {
        crate::oracle::transverse_energy(self.a, 1)
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let h = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + h * i as f64 })
        .collect()
}

/// Samples of `f` and `df/dx2` on the `(x1, x2)` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    pub a: f64,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    /// `f[i1 * n2 + i2]`
    pub f: Vec<f64>,
    pub d2f: Vec<f64>,
    /// Per-column Taylor bounds `(lower, upper)`.
    pub envelope: Vec<(f64, f64)>,
    pub support_radius: f64,
}

impl MetricField {
    pub fn flat(geom: &StripGeometry) -> Self {
        let (n1, n2) = (geom.n1, geom.n2);
        Self {
            a: geom.a,
            x1: geom.x1_nodes(),
            x2: geom.x2_nodes(),
            f: vec![1.0; n1 * n2],
            d2f: vec![0.0; n1 * n2],
            envelope: vec![(1.0, 1.0); n1],
            support_radius: 0.0,
        }
    }

    pub fn n1(&self) -> usize {
        self.x1.len()
    }

    pub fn n2(&self) -> usize {
        self.x2.len()
    }

    #[inline]
    pub fn at(&self, i1: usize, i2: usize) -> f64 {
        self.f[i1 * self.n2() + i2]
    }

    #[inline]
    pub fn d2_at(&self, i1: usize, i2: usize) -> f64 {
        self.d2f[i1 * self.n2() + i2]
    }

    pub fn is_flat(&self) -> bool {
        self.f.iter().all(|&v| v == 1.0)
    }

    /// `df/dx1` by central differences (one-sided at the ends).
    pub fn d1_at(&self, i1: usize, i2: usize) -> f64 {
        let n1 = self.n1();
        let (lo, hi) = (i1.saturating_sub(1), (i1 + 1).min(n1 - 1));
        (self.at(hi, i2) - self.at(lo, i2)) / (self.x1[hi] - self.x1[lo])
    }

    /// `(f, df/dx2)` at an arbitrary point: linear in `x1`, cubic Hermite in `x2`.
    ///
    /// Outside the sampled columns, and beyond the support radius, the
    /// metric is flat.
    pub fn eval(&self, x1: f64, x2: f64) -> (f64, f64) {
        if x1.abs() > self.support_radius {
            return (1.0, 0.0);
        }
        let (i, s) = match locate(&self.x1, x1) {
            Some(v) => v,
            None => return (1.0, 0.0),
        };
        let x2 = x2.clamp(-self.a, self.a);
        let (j, t) = locate(&self.x2, x2).expect("x2 clamped into range");
        let n2 = self.n2();
        let j1 = (j + 1).min(n2 - 1);
        let h = self.x2[j1] - self.x2[j];
        let col = |c: usize| {
            let (f0, f1) = (self.at(c, j), self.at(c, j1));
            let (g0, g1) = (self.d2_at(c, j), self.d2_at(c, j1));
            hermite(f0, f1, g0 * h, g1 * h, t, h)
        };
        let i1 = (i + 1).min(self.n1() - 1);
        let (fa, ga) = col(i);
        if s == 0.0 || i1 == i {
            return (fa, ga);
        }
        let (fb, gb) = col(i1);
        ((1.0 - s) * fa + s * fb, (1.0 - s) * ga + s * gb)
    }

    /// CSV rows `(x1, x2, f, df/dx2, K, V)`.
    pub fn rows(&self, profile: &CurvatureProfile) -> Vec<[f64; 6]> {
        let v = effective_potential(self, profile);
        let mut out = Vec::with_capacity(self.f.len());
        for (i1, &x1) in self.x1.iter().enumerate() {
            for (i2, &x2) in self.x2.iter().enumerate() {
                let k = i1 * self.n2() + i2;
                out.push([x1, x2, self.f[k], self.d2f[k], profile.eval(x1, x2), v[k]]);
            }
        }
        out
    }
}

/// Pointwise access to the Jacobi factor, shared by assembly and simulation.
pub trait Metric: Sync {
    fn half_width(&self) -> f64;
    /// `f = 1` whenever `|x1|` exceeds this radius.
    fn support_radius(&self) -> f64;
    fn f(&self, x1: f64, x2: f64) -> f64;
    /// `df/dx2`.
    fn d2f(&self, x1: f64, x2: f64) -> f64;
    /// `df/dx1`.
    fn d1f(&self, x1: f64, x2: f64) -> f64 {
        let h = 1e-5;
        (self.f(x1 + h, x2) - self.f(x1 - h, x2)) / (2.0 * h)
    }
    fn is_flat(&self) -> bool {
        self.support_radius() == 0.0
    }
}

impl Metric for MetricField {
    fn half_width(&self) -> f64 {
        self.a
    }

    fn support_radius(&self) -> f64 {
        if MetricField::is_flat(self) {
            0.0
        } else {
            self.support_radius
        }
    }

    fn f(&self, x1: f64, x2: f64) -> f64 {
        self.eval(x1, x2).0
    }

    fn d2f(&self, x1: f64, x2: f64) -> f64 {
        self.eval(x1, x2).1
    }

    /// Slope of the linear interpolant between neighbouring columns.
    fn d1f(&self, x1: f64, x2: f64) -> f64 {
        if x1.abs() > self.support_radius {
            return 0.0;
        }
        let Some((i, _)) = locate(&self.x1, x1) else {
            return 0.0;
        };
        let i1 = (i + 1).min(self.n1() - 1);
        if i1 == i {
            return 0.0;
        }
        let h = 1e-9;
        let (lo, hi) = (self.x1[i] + h, self.x1[i1] - h);
        (self.eval(hi, x2).0 - self.eval(lo, x2).0) / (hi - lo)
    }
}

/// Flat strip of half-width `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatMetric {
    pub a: f64,
}

impl Metric for FlatMetric {
    fn half_width(&self) -> f64 {
        self.a
    }
    fn support_radius(&self) -> f64 {
        0.0
    }
    fn f(&self, _: f64, _: f64) -> f64 {
        1.0
    }
    fn d2f(&self, _: f64, _: f64) -> f64 {
        0.0
    }
    fn d1f(&self, _: f64, _: f64) -> f64 {
        0.0
    }
}

/// Ruled strip evaluated from closed forms at any point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuledMetric {
    pub theta_dot: ThetaDot,
    pub a: f64,
}

impl Metric for RuledMetric {
    fn half_width(&self) -> f64 {
        self.a
    }
    fn support_radius(&self) -> f64 {
        self.theta_dot.support_radius()
    }
    fn f(&self, x1: f64, x2: f64) -> f64 {
        let w = self.theta_dot.eval(x1);
        (1.0 + w * w * x2 * x2).sqrt()
    }
    fn d2f(&self, x1: f64, x2: f64) -> f64 {
        let w = self.theta_dot.eval(x1);
        w * w * x2 / (1.0 + w * w * x2 * x2).sqrt()
    }
    fn d1f(&self, x1: f64, x2: f64) -> f64 {
        let w = self.theta_dot.eval(x1);
        let wp = self.theta_dot.derivative(x1);
        w * wp * x2 * x2 / (1.0 + w * w * x2 * x2).sqrt()
    }
}

/// Cubic Hermite value and derivative; slopes are pre-scaled by `h`.
fn hermite(f0: f64, f1: f64, m0: f64, m1: f64, t: f64, h: f64) -> (f64, f64) {
    let t2 = t * t;
    let t3 = t2 * t;
    let v = (2.0 * t3 - 3.0 * t2 + 1.0) * f0
        + (t3 - 2.0 * t2 + t) * m0
        + (-2.0 * t3 + 3.0 * t2) * f1
        + (t3 - t2) * m1;
    let d = (6.0 * t2 - 6.0 * t) * f0
        + (3.0 * t2 - 4.0 * t + 1.0) * m0
        + (-6.0 * t2 + 6.0 * t) * f1
        + (3.0 * t2 - 2.0 * t) * m1;
    (v, d / h)
}

/// Taylor bounds `1 -/+ Kbar a^2 / (1 - Kbar a^2)` for one column.
pub fn taylor_bounds(kbar: f64, a: f64) -> Result<(f64, f64)> {
    let q = kbar * a * a;
    if !(q < 1.0) {
        return Err(LabError::DomainError(format!(
            "Kbar a^2 = {q} must be below 1"
        )));
    }
    let d = q / (1.0 - q);
    Ok((1.0 - d, 1.0 + d))
}

/// Per-column Taylor envelope at the given columns.
pub fn taylor_envelope(profile: &CurvatureProfile, a: f64, x1: &[f64]) -> Result<Vec<(f64, f64)>> {
    x1.iter()
        .map(|&x| taylor_bounds(profile.column_sup(x, a), a))
        .collect()
}

/// RK4 sub-steps per transverse grid interval.
pub const JACOBI_SUBSTEPS: usize = 4;

struct Column {
    f: Vec<f64>,
    g: Vec<f64>,
    kbar: f64,
}

fn integrate_column(profile: &CurvatureProfile, x1: f64, x2: &[f64]) -> Column {
    let n2 = x2.len();
    let mid = (n2 - 1) / 2;
    let mut f = vec![0.0; n2];
    let mut g = vec![0.0; n2];
    f[mid] = 1.0;
    g[mid] = 0.0;
    let mut kbar = profile.eval(x1, 0.0).abs();
    for dir in [1isize, -1] {
        let (mut y, mut yp) = (1.0, 0.0);
        let mut j = mid as isize;
        while (dir > 0 && (j as usize) < n2 - 1) || (dir < 0 && j > 0) {
            let jn = (j + dir) as usize;
            let (x0, xe) = (x2[j as usize], x2[jn]);
            let h = (xe - x0) / JACOBI_SUBSTEPS as f64;
            for s in 0..JACOBI_SUBSTEPS {
                let xs = x0 + h * s as f64;
                let k0 = profile.eval(x1, xs);
                let kh = profile.eval(x1, xs + 0.5 * h);
                let k1 = profile.eval(x1, xs + h);
                kbar = kbar.max(k0.abs()).max(kh.abs()).max(k1.abs());
                // y'' = -K y as a first-order system
                let (a1, b1) = (yp, -k0 * y);
                let (a2, b2) = (yp + 0.5 * h * b1, -kh * (y + 0.5 * h * a1));
                let (a3, b3) = (yp + 0.5 * h * b2, -kh * (y + 0.5 * h * a2));
                let (a4, b4) = (yp + h * b3, -k1 * (y + h * a3));
                y += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
                yp += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
            }
            f[jn] = y;
            g[jn] = yp;
            j += dir;
        }
    }
    Column { f, g, kbar }
}

/// Integrates the Jacobi equation column by column and certifies the result.
pub fn solve_jacobi(profile: &CurvatureProfile, geom: &StripGeometry) -> Result<MetricField> {
    let x1 = geom.x1_nodes();
    let x2 = geom.x2_nodes();
    let (n1, n2) = (geom.n1, geom.n2);
    let r = profile.support_radius();

    let integrate = |&x: &f64| {
        if x.abs() > r {
            Column {
                f: vec![1.0; n2],
                g: vec![0.0; n2],
                kbar: 0.0,
            }
        } else {
            integrate_column(profile, x, &x2)
        }
    };
    #[cfg(feature = "parallel")]
    let columns: Vec<Column> = {
        use rayon::prelude::*;
        x1.par_iter().map(integrate).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let columns: Vec<Column> = x1.iter().map(integrate).collect();

    let h_int = geom.h2() / JACOBI_SUBSTEPS as f64;
    let slack = 10.0 * h_int * h_int * profile.sup_norm();
    let mut f = Vec::with_capacity(n1 * n2);
    let mut d2f = Vec::with_capacity(n1 * n2);
    let mut envelope = Vec::with_capacity(n1);
    for (i1, col) in columns.into_iter().enumerate() {
        let (lo, hi) = taylor_bounds(col.kbar, geom.a)?;
        for (i2, (&fv, &gv)) in col.f.iter().zip(&col.g).enumerate() {
            if !(fv > 0.0) {
                return Err(LabError::NonPositiveMetric {
                    x1: x1[i1],
                    x2: x2[i2],
                    value: fv,
                });
            }
            if fv < lo - slack || fv > hi + slack {
                return Err(LabError::EnvelopeViolation {
                    column: i1,
                    x2: x2[i2],
                    value: fv,
                    lower: lo,
                    upper: hi,
                });
            }
            f.push(fv);
            d2f.push(gv);
        }
        envelope.push((lo, hi));
    }
    Ok(MetricField {
        a: geom.a,
        x1,
        x2,
        f,
        d2f,
        envelope,
        support_radius: r.min(geom.l),
    })
}

/// Closed-form quantities of a ruled strip at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuledPoint {
    pub f: f64,
    pub d2f: f64,
    pub curvature: f64,
    pub potential: f64,
}

/// `f = sqrt(1 + w^2 x2^2)`, `K = -w^2 / f^4`, `V = w^2 (2 - w^2 x2^2) / (4 f^4)`.
pub fn ruled_point(theta_dot: f64, x2: f64) -> RuledPoint {
    let w2 = theta_dot * theta_dot;
    let f2 = 1.0 + w2 * x2 * x2;
    let f = f2.sqrt();
    let f4 = f2 * f2;
    RuledPoint {
        f,
        d2f: w2 * x2 / f,
        curvature: -w2 / f4,
        potential: w2 * (2.0 - w2 * x2 * x2) / (4.0 * f4),
    }
}

/// Metric and curvature of a ruled strip, without ODE integration.
pub fn ruled_strip(
    theta_dot: ThetaDot,
    geom: &StripGeometry,
) -> Result<(MetricField, CurvatureProfile)> {
    let profile = CurvatureProfile::Ruled { theta_dot };
    let x1 = geom.x1_nodes();
    let x2 = geom.x2_nodes();
    let mut f = Vec::with_capacity(x1.len() * x2.len());
    let mut d2f = Vec::with_capacity(x1.len() * x2.len());
    let mut envelope = Vec::with_capacity(x1.len());
    for &s in &x1 {
        let w = theta_dot.eval(s);
        for &t in &x2 {
            let p = ruled_point(w, t);
            f.push(p.f);
            d2f.push(p.d2f);
        }
        envelope.push(taylor_bounds(w * w, geom.a)?);
    }
    let field = MetricField {
        a: geom.a,
        x1,
        x2,
        f,
        d2f,
        envelope,
        support_radius: theta_dot.support_radius().min(geom.l),
    };
    Ok((field, profile))
}

/// `V = -K/2 + (df/dx2 / f)^2 / 4` at every grid node.
pub fn effective_potential(metric: &MetricField, profile: &CurvatureProfile) -> Vec<f64> {
    let n2 = metric.n2();
    let mut v = Vec::with_capacity(metric.f.len());
    for (i1, &x1) in metric.x1.iter().enumerate() {
        for (i2, &x2) in metric.x2.iter().enumerate() {
            let k = i1 * n2 + i2;
            let q = metric.d2f[k] / metric.f[k];
            v.push(-0.5 * profile.eval(x1, x2) + 0.25 * q * q);
        }
    }
    v
}

/// Largest residual of `f'' + K f` at interior nodes, with `f''` taken as a
/// fourth-order centered difference of the stored `df/dx2`.
pub fn jacobi_residual(metric: &MetricField, profile: &CurvatureProfile) -> f64 {
    let n2 = metric.n2();
    let h = metric.x2[1] - metric.x2[0];
    let mut worst: f64 = 0.0;
    for (i1, &x1) in metric.x1.iter().enumerate() {
        for i2 in 2..n2 - 2 {
            let g = |j: usize| metric.d2_at(i1, j);
            let fpp = (g(i2 - 2) - 8.0 * g(i2 - 1) + 8.0 * g(i2 + 1) - g(i2 + 2)) / (12.0 * h);
            let r = fpp + profile.eval(x1, metric.x2[i2]) * metric.at(i1, i2);
            worst = worst.max(r.abs());
        }
    }
    worst
}
