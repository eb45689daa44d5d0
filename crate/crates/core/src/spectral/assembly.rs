use super::{element_nodes, WeightedGrid};
use crate::error::{LabError, Result};
use crate::linalg::SymBanded;

/// Pointwise coefficients of a symmetric form
/// `int a11 |d1 v|^2 + a22 |d2 v|^2 + cross v d1 v + potential v^2`
/// with mass density `mass`.
///
/// `cross` enters through the symmetric part `cross (u d1 v + v d1 u) / 2`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Coefficients {
    pub a11: f64,
    pub a22: f64,
    pub cross: f64,
    pub potential: f64,
    pub mass: f64,
}

const GAUSS3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_31, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

/// Element-by-element assembly with 3-point Gauss rules per direction.
///
/// Returns `(S, M)` on the unknowns of `grid`.
pub fn assemble(
    grid: &WeightedGrid,
    coef: impl Fn(f64, f64) -> Coefficients,
) -> Result<(SymBanded, SymBanded)> {
    let (s, m) = assemble_unchecked(grid, coef);
    let lumped = m.matvec(&vec![1.0; m.dim()]);
    for (k, &w) in lumped.iter().enumerate() {
        if !(w > 0.0) {
            return Err(LabError::SingularMass {
                node: grid.free_nodes()[k],
                mass: w,
            });
        }
    }
    Ok((s, m))
}

/// Assembly without the mass positivity check, for weight and potential
/// matrices whose density may vanish or change sign.
pub(crate) fn assemble_unchecked(
    grid: &WeightedGrid,
    coef: impl Fn(f64, f64) -> Coefficients,
) -> (SymBanded, SymBanded) {
    let n = grid.n_free();
    let bw = grid.bandwidth();
    let mut s = SymBanded::zeros(n, bw);
    let mut m = SymBanded::zeros(n, bw);
    let line = grid.is_line();
    let n2 = grid.n2();

    let mut ks = [[0.0; 4]; 4];
    let mut km = [[0.0; 4]; 4];
    for i1 in 0..grid.n1() - 1 {
        let (xa, xb) = (grid.x1[i1], grid.x1[i1 + 1]);
        let h1 = xb - xa;
        let cells2 = if line { 1 } else { n2 - 1 };
        for j in 0..cells2 {
            let nodes = element_nodes(i1, j, n2, line);
            let free: Vec<Option<usize>> = nodes.iter().map(|&g| grid.free_index(g)).collect();
            if free.iter().all(Option::is_none) {
                continue;
            }
            let nloc = nodes.len();
            for r in ks.iter_mut().chain(km.iter_mut()) {
                *r = [0.0; 4];
            }
            if line {
                for &(gx, wx) in &GAUSS3 {
                    let x = xa + gx * h1;
                    let c = coef(x, 0.0);
                    let w = wx * h1;
                    let phi = [1.0 - gx, gx];
                    let dphi = [-1.0 / h1, 1.0 / h1];
                    for a in 0..2 {
                        for b in 0..2 {
                            ks[a][b] += w
                                * (c.a11 * dphi[a] * dphi[b]
                                    + 0.5 * c.cross * (phi[a] * dphi[b] + phi[b] * dphi[a])
                                    + c.potential * phi[a] * phi[b]);
                            km[a][b] += w * c.mass * phi[a] * phi[b];
                        }
                    }
                }
            } else {
                let (ya, yb) = (grid.x2[j], grid.x2[j + 1]);
                let h2 = yb - ya;
                for &(gx, wx) in &GAUSS3 {
                    for &(gy, wy) in &GAUSS3 {
                        let (x, y) = (xa + gx * h1, ya + gy * h2);
                        let c = coef(x, y);
                        let w = wx * wy * h1 * h2;
                        let phi = [
                            (1.0 - gx) * (1.0 - gy),
                            gx * (1.0 - gy),
                            (1.0 - gx) * gy,
                            gx * gy,
                        ];
                        let d1 = [
                            -(1.0 - gy) / h1,
                            (1.0 - gy) / h1,
                            -gy / h1,
                            gy / h1,
                        ];
                        let d2 = [
                            -(1.0 - gx) / h2,
                            -gx / h2,
                            (1.0 - gx) / h2,
                            gx / h2,
                        ];
                        for a in 0..4 {
                            for b in 0..=a {
                                let v = c.a11 * d1[a] * d1[b]
                                    + c.a22 * d2[a] * d2[b]
                                    + 0.5 * c.cross * (phi[a] * d1[b] + phi[b] * d1[a])
                                    + c.potential * phi[a] * phi[b];
                                ks[a][b] += w * v;
                                km[a][b] += w * c.mass * phi[a] * phi[b];
                            }
                        }
                    }
                }
                for a in 0..4 {
                    for b in 0..a {
                        ks[b][a] = ks[a][b];
                        km[b][a] = km[a][b];
                    }
                }
            }
            for a in 0..nloc {
                let Some(fa) = free[a] else { continue };
                for b in 0..=a {
                    let Some(fb) = free[b] else { continue };
                    s.add(fa, fb, ks[a][b]);
                    m.add(fa, fb, km[a][b]);
                }
            }
        }
    }
    (s, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::linspace;

    #[test]
    fn mass_integrates_density() {
        let g = WeightedGrid::tensor(linspace(0.0, 2.0, 9), linspace(-1.0, 1.0, 7), false);
        let (_, m) = assemble(&g, |x, y| Coefficients {
            mass: 1.0 + x * y * y,
            ..Default::default()
        })
        .unwrap();
        // with the wall nodes masked the row sums integrate against the
        // interior hat functions only, so test the full quadratic form on
        // the interpolant of a smooth function instead
        let v = g.interpolate(|_, y| (std::f64::consts::FRAC_PI_2 * y).cos());
        let q = m.quad(&v);
        let exact = {
            // int_0^2 int_-1^1 (1 + x y^2) cos^2(pi y / 2) dy dx
            let iy0 = 1.0;
            let iy2 = 1.0 / 3.0 - 2.0 / (std::f64::consts::PI * std::f64::consts::PI);
            2.0 * iy0 + 2.0 * iy2
        };
        assert!((q - exact).abs() < 5e-2 * exact);
    }

    #[test]
    fn symmetric_cross_term_integrates_by_parts() {
        // -1/2 int y v v' = 1/4 int v^2 for v vanishing at the ends
        let g = WeightedGrid::line(linspace(-3.0, 3.0, 61), true);
        let (s, m) = assemble(&g, |y, _| Coefficients {
            cross: -0.5 * y,
            mass: 1.0,
            ..Default::default()
        })
        .unwrap();
        let v = g.interpolate(|y, _| (-(y * y)).exp() * (1.0 + 0.3 * y));
        assert!((s.quad(&v) - 0.25 * m.quad(&v)).abs() < 1e-12);
    }

    #[test]
    fn negative_mass_is_rejected() {
        let g = WeightedGrid::line(linspace(0.0, 1.0, 5), true);
        let r = assemble(&g, |_, _| Coefficients {
            a11: 1.0,
            mass: -1.0,
            ..Default::default()
        });
        assert!(matches!(r, Err(LabError::SingularMass { .. })));
    }
}
