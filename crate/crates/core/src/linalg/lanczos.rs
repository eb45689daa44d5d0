//! Shift-invert Lanczos for the lowest eigenpairs of `S v = lambda M v`.
//!
//! The iteration runs on `(S - sigma M)^{-1} M`, which is self-adjoint in the
//! `M` inner product. Converged pairs are locked and every later Krylov
//! basis is kept `M`-orthogonal to them, so repeated eigenvalues are found
//! one copy per restart.
//!
//! Convergence is judged by the normwise backward error
//! `||S v - lambda M v|| / ((||S|| + |lambda| ||M||) ||v||)`, which stays
//! meaningful when `S` is very stiff compared with the eigenvalues sought.

use nalgebra::{DMatrix, SymmetricEigen};

use super::banded::{axpy, dot, norm2, SymBanded};
use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    pub shift: f64,
    pub tol: f64,
    pub krylov_dim: usize,
    pub max_restarts: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            shift: -1.0,
            tol: 1e-8,
            krylov_dim: 40,
            max_restarts: 60,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

/// Deterministic, non-symmetric start vector (SplitMix64 stream).
fn start_vector(n: usize) -> Vec<f64> {
    let mut state: u64 = 0x9e37_79b9_7f4a_7c15;
    (0..n)
        .map(|_| {
            state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
            z ^= z >> 31;
            0.5 + (z >> 11) as f64 / (1u64 << 53) as f64
        })
        .collect()
}

/// M-orthogonalize `w` against `basis` (with stored `M q`), two passes.
fn m_orthogonalize(w: &mut [f64], basis: &[Vec<f64>], m_basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for (q, mq) in basis.iter().zip(m_basis) {
            let c = dot(mq, w);
            axpy(-c, q, w);
        }
    }
}

pub fn lowest_generalized(
    s: &SymBanded,
    m: &SymBanded,
    k: usize,
    opts: &LanczosOptions,
) -> Result<Eigenpairs> {
    let n = s.dim();
    assert_eq!(m.dim(), n, "stiffness and mass dimensions differ");
    if k == 0 || k > n {
        return Err(LabError::InvalidArgument(format!(
            "requested {k} eigenpairs of a {n}-dimensional problem"
        )));
    }
    let shifted = s.combine(1.0, m, -opts.shift);
    let chol = shifted.cholesky().map_err(|e| match e {
        LabError::ShiftInsideSpectrum { pivot, value, .. } => LabError::ShiftInsideSpectrum {
            shift: opts.shift,
            pivot,
            value,
        },
        other => other,
    })?;

    let s_norm = s.norm_inf();
    let m_norm = m.norm_inf();
    let mut locked: Vec<Vec<f64>> = Vec::new();
    let mut locked_m: Vec<Vec<f64>> = Vec::new();
    let mut locked_vals: Vec<f64> = Vec::new();
    let mut locked_res: Vec<f64> = Vec::new();

    let mut start = start_vector(n);
    let mut iterations = 0;
    let mut best_residual = f64::INFINITY;

    for _restart in 0..opts.max_restarts {
        let avail = n - locked.len();
        let mdim = opts.krylov_dim.max(2 * k + 10).min(avail);

        let mut q0 = start.clone();
        m_orthogonalize(&mut q0, &locked, &locked_m);
        let mut mq0 = m.matvec(&q0);
        let nrm = dot(&q0, &mq0).sqrt();
        if !(nrm > 0.0) || !nrm.is_finite() {
            q0 = start_vector(n).iter().rev().copied().collect();
            m_orthogonalize(&mut q0, &locked, &locked_m);
            mq0 = m.matvec(&q0);
        }
        let nrm = dot(&q0, &mq0).sqrt();
        q0.iter_mut().for_each(|v| *v /= nrm);
        mq0.iter_mut().for_each(|v| *v /= nrm);

        let mut basis = vec![q0];
        let mut m_basis = vec![mq0];
        let mut alpha = Vec::with_capacity(mdim);
        let mut beta: Vec<f64> = Vec::with_capacity(mdim);

        for j in 0..mdim {
            iterations += 1;
            let mut w = chol.solve(&m_basis[j]);
            let a = dot(&m_basis[j], &w);
            alpha.push(a);
            m_orthogonalize(&mut w, &locked, &locked_m);
            m_orthogonalize(&mut w, &basis, &m_basis);
            let mw = m.matvec(&w);
            let b = dot(&w, &mw).max(0.0).sqrt();
            if j + 1 == mdim {
                break;
            }
            if b <= 1e-13 * a.abs().max(1e-300) {
                break;
            }
            beta.push(b);
            basis.push(w.iter().map(|v| v / b).collect());
            m_basis.push(mw.iter().map(|v| v / b).collect());
        }

        let dim = alpha.len();
        let mut t = DMatrix::<f64>::zeros(dim, dim);
        for i in 0..dim {
            t[(i, i)] = alpha[i];
            if i + 1 < dim {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..dim).collect();
        // largest theta <=> smallest lambda
        order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));

        let wanted = (k - locked.len()).min(dim);
        let mut ritz: Vec<(f64, Vec<f64>, f64)> = Vec::with_capacity(wanted);
        for &idx in order.iter().take(wanted) {
            let theta = eig.eigenvalues[idx];
            if theta <= 0.0 {
                break;
            }
            let lambda = opts.shift + 1.0 / theta;
            let mut v = vec![0.0; n];
            for (c, q) in basis.iter().take(dim).enumerate() {
                axpy(eig.eigenvectors[(c, idx)], q, &mut v);
            }
            let mv = m.matvec(&v);
            let vn = dot(&v, &mv).sqrt();
            v.iter_mut().for_each(|x| *x /= vn);
            let mv: Vec<f64> = mv.iter().map(|x| x / vn).collect();
            let sv = s.matvec(&v);
            let r: Vec<f64> = sv.iter().zip(&mv).map(|(a, b)| a - lambda * b).collect();
            let rel = norm2(&r) / ((s_norm + lambda.abs() * m_norm) * norm2(&v));
            ritz.push((lambda, v, rel));
        }

        let mut newly_locked = 0;
        for (lambda, v, rel) in &ritz {
            best_residual = best_residual.min(*rel);
            if *rel <= opts.tol {
                let mv = m.matvec(v);
                locked_vals.push(*lambda);
                locked.push(v.clone());
                locked_m.push(mv);
                locked_res.push(*rel);
                newly_locked += 1;
            } else {
                break;
            }
        }
        if locked.len() >= k {
            break;
        }
        // restart from the unconverged wanted Ritz vectors
        start = vec![0.0; n];
        for (i, (_, v, _)) in ritz.iter().enumerate().skip(newly_locked) {
            axpy(1.0 / (1.0 + i as f64), v, &mut start);
        }
        if norm2(&start) == 0.0 {
            start = start_vector(n);
        }
    }

    if locked.len() < k {
        return Err(LabError::NoConvergence {
            iterations,
            best_residual,
        });
    }

    let mut idx: Vec<usize> = (0..locked.len()).collect();
    idx.sort_by(|&a, &b| locked_vals[a].total_cmp(&locked_vals[b]));
    idx.truncate(k);
    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    for i in idx {
        let mut v = locked[i].clone();
        normalize_sign(&mut v);
        values.push(locked_vals[i]);
        vectors.push(v);
        residuals.push(locked_res[i]);
    }
    Ok(Eigenpairs {
        values,
        vectors,
        residuals,
        iterations,
    })
}

/// Flips `v` so that its first non-negligible component is positive.
///
/// A ground state has one sign, so this makes it nonnegative.
pub fn normalize_sign(v: &mut [f64]) {
    let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-8 * vmax) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dirichlet_1d(n: usize, h: f64) -> (SymBanded, SymBanded) {
        let mut s = SymBanded::zeros(n, 1);
        let mut m = SymBanded::zeros(n, 1);
        for i in 0..n {
            s.add(i, i, 2.0 / h);
            m.add(i, i, 4.0 * h / 6.0);
            if i > 0 {
                s.add(i, i - 1, -1.0 / h);
                m.add(i, i - 1, h / 6.0);
            }
        }
        (s, m)
    }

    #[test]
    fn matches_closed_form_fem_eigenvalues() {
        // P1 FEM on (0, pi) with N elements has exact discrete eigenvalues
        // 6/h^2 (1 - cos(k h)) / (2 + cos(k h)).
        let n_el = 64;
        let h = std::f64::consts::PI / n_el as f64;
        let (s, m) = dirichlet_1d(n_el - 1, h);
        let res = lowest_generalized(&s, &m, 4, &LanczosOptions::default()).unwrap();
        for (k, val) in res.values.iter().enumerate() {
            let c = ((k + 1) as f64 * h).cos();
            let exact = 6.0 / (h * h) * (1.0 - c) / (2.0 + c);
            assert!((val - exact).abs() < 1e-9 * exact, "{val} vs {exact}");
        }
        assert!(res.vectors[0].iter().all(|x| *x >= -1e-12));
    }

    #[test]
    fn repeated_eigenvalues_are_all_found() {
        // block-diagonal copy of the same 1D problem
        let n = 20;
        let h = 1.0 / (n + 1) as f64;
        let (s1, m1) = dirichlet_1d(n, h);
        let mut s = SymBanded::zeros(2 * n, 1);
        let mut m = SymBanded::zeros(2 * n, 1);
        for off in [0, n] {
            for i in 0..n {
                for j in i.saturating_sub(1)..=i {
                    s.add(off + i, off + j, s1.get(i, j));
                    m.add(off + i, off + j, m1.get(i, j));
                }
            }
        }
        let res = lowest_generalized(&s, &m, 4, &LanczosOptions::default()).unwrap();
        assert!((res.values[0] - res.values[1]).abs() < 1e-8 * res.values[0]);
        assert!((res.values[2] - res.values[3]).abs() < 1e-8 * res.values[2]);
        assert!(res.values[2] > res.values[1] * 3.0);
    }

    #[test]
    fn shift_above_spectrum_is_reported() {
        let (s, m) = dirichlet_1d(30, 1.0 / 31.0);
        let opts = LanczosOptions {
            shift: 50.0,
            ..Default::default()
        };
        assert!(matches!(
            lowest_generalized(&s, &m, 1, &opts),
            Err(LabError::ShiftInsideSpectrum { .. })
        ));
    }
}
