//! Symmetric banded matrices and their Cholesky factors.
//!
//! Storage keeps the lower band only: entry `(i, j)` with `i - bw <= j <= i`
//! lives at `data[i * (bw + 1) + (i - j)]`.

use crate::error::{LabError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SymBanded {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl SymBanded {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, 0);
        for i in 0..n {
            m.add(i, i, 1.0);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw || i >= self.n {
            None
        } else {
            Some(i * (self.bw + 1) + (i - j))
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |k| self.data[k])
    }

    /// Adds `v` to entries `(i, j)` and `(j, i)` (once on the diagonal).
    ///
    /// Panics if the entry falls outside the band.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside band {}", self.bw));
        self.data[k] += v;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        y.fill(0.0);
        let w = self.bw + 1;
        for i in 0..self.n {
            let row = &self.data[i * w..(i + 1) * w];
            let mut acc = row[0] * x[i];
            let jmin = i.saturating_sub(self.bw);
            for j in jmin..i {
                let v = row[i - j];
                acc += v * x[j];
                y[j] += v * x[i];
            }
            y[i] += acc;
        }
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        let mut rows = vec![0.0f64; self.n];
        for i in 0..self.n {
            for d in 0..=self.bw.min(i) {
                let v = self.get(i, i - d).abs();
                rows[i] += v;
                if d > 0 {
                    rows[i - d] += v;
                }
            }
        }
        rows.into_iter().fold(0.0, f64::max)
    }

    /// Quadratic form `x^T A x`.
    pub fn quad(&self, x: &[f64]) -> f64 {
        let ax = self.matvec(x);
        dot(x, &ax)
    }

    /// `alpha * self + beta * other`, widening the band if needed.
    pub fn combine(&self, alpha: f64, other: &SymBanded, beta: f64) -> SymBanded {
        assert_eq!(self.n, other.n);
        let bw = self.bw.max(other.bw);
        let mut out = SymBanded::zeros(self.n, bw);
        for i in 0..self.n {
            for d in 0..=bw.min(i) {
                let j = i - d;
                let v = alpha * self.get(i, j) + beta * other.get(i, j);
                if v != 0.0 {
                    out.add(i, j, v);
                }
            }
        }
        out
    }

    /// Dense copy, for tests and small problems.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.get(i, j);
            }
        }
        d
    }

    /// Nonzero lower-triangle entries as `(row, col, value)`.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for d in (0..=self.bw.min(i)).rev() {
                let v = self.get(i, i - d);
                if v != 0.0 {
                    out.push((i, i - d, v));
                }
            }
        }
        out
    }

    /// Banded Cholesky factorization `A = L L^T`.
    pub fn cholesky(&self) -> Result<BandedCholesky> {
        let n = self.n;
        let bw = self.bw;
        let w = bw + 1;
        let mut l = self.data.clone();
        for i in 0..n {
            let jmin = i.saturating_sub(bw);
            for j in jmin..=i {
                // l[i][j] -= sum_k l[i][k] l[j][k], k in [max(i,j)-bw, j)
                let kmin = i.saturating_sub(bw);
                let mut s = l[i * w + (i - j)];
                for k in kmin..j {
                    s -= l[i * w + (i - k)] * l[j * w + (j - k)];
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(LabError::ShiftInsideSpectrum {
                            shift: f64::NAN,
                            pivot: i,
                            value: s,
                        });
                    }
                    l[i * w] = s.sqrt();
                } else {
                    l[i * w + (i - j)] = s / l[j * w];
                }
            }
        }
        Ok(BandedCholesky { n, bw, l })
    }
}

/// Lower-triangular banded Cholesky factor.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandedCholesky {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let w = self.bw + 1;
        // forward: L y = b
        for i in 0..self.n {
            let mut s = b[i];
            let jmin = i.saturating_sub(self.bw);
            for j in jmin..i {
                s -= self.l[i * w + (i - j)] * b[j];
            }
            b[i] = s / self.l[i * w];
        }
        // backward: L^T x = y
        for i in (0..self.n).rev() {
            let s = b[i] / self.l[i * w];
            b[i] = s;
            let jmin = i.saturating_sub(self.bw);
            for j in jmin..i {
                b[j] -= self.l[i * w + (i - j)] * s;
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
