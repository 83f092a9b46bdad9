//! Small dense complex matrices and a Hermitian eigensolver.
//!
//! The eigensolver reduces a Hermitian matrix to real symmetric tridiagonal
//! form with Householder reflections, removes the complex phases of the
//! off-diagonal with a diagonal unitary, and finishes with implicit QL
//! iterations (Wilkinson shifts), accumulating the rotations into the complex
//! eigenvector matrix.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Row-major dense complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    /// Builds a matrix whose `j`-th column is `columns[j]`.
    pub fn from_columns(rows: usize, columns: &[Vec<Complex64>]) -> Self {
        let mut m = Self::zeros(rows, columns.len());
        for (j, c) in columns.iter().enumerate() {
            assert_eq!(c.len(), rows);
            for (i, v) in c.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let brow = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn scaled(&self, s: Complex64) -> CMatrix {
        CMatrix {
            data: self.data.iter().map(|v| v * s).collect(),
            ..self.clone()
        }
    }

    pub fn add(&self, other: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CMatrix {
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
            ..self.clone()
        }
    }

    pub fn sub(&self, other: &CMatrix) -> CMatrix {
        self.add(&other.scaled(-ONE))
    }

    /// `[A, B] = AB - BA`.
    pub fn commutator(&self, other: &CMatrix) -> CMatrix {
        self.matmul(other).sub(&other.matmul(self))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest deviation from Hermiticity, `max |A_ij - conj(A_ji)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..=i {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Column `k` is the unit eigenvector for `values[k]`.
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn vector(&self, k: usize) -> Vec<Complex64> {
        self.vectors.column(k)
    }
}

/// Full eigen-decomposition of a Hermitian matrix.
pub fn hermitian_eigen(a: &CMatrix) -> Result<HermitianEigen> {
    let n = a.rows();
    if n != a.cols() {
        return Err(Error::InvalidArgument("matrix is not square".into()));
    }
    let scale = a.as_slice().iter().map(|v| v.norm()).fold(0.0, f64::max).max(1.0);
    if a.hermiticity_defect() > 1e-10 * scale {
        return Err(Error::InvalidArgument("matrix is not Hermitian".into()));
    }
    if n == 0 {
        return Ok(HermitianEigen {
            values: vec![],
            vectors: CMatrix::zeros(0, 0),
        });
    }
    let (diag, off, mut q) = tridiagonalize(a);
    let mut d = diag;
    let mut e = off;
    tql_implicit(&mut d, &mut e, &mut q)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let values = order.iter().map(|&i| d[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        for r in 0..n {
            vectors[(r, new)] = q[(r, old)];
        }
    }
    Ok(HermitianEigen { values, vectors })
}

/// Returns `(d, e, Z)` with `A = Z T Z†`, `T` real symmetric tridiagonal with
/// diagonal `d` and sub-diagonal `e[k] = T[k+1, k]` (`e[n-1] = 0`).
fn tridiagonalize(a: &CMatrix) -> (Vec<f64>, Vec<f64>, CMatrix) {
    let n = a.rows();
    let mut m = a.clone();
    let mut q = CMatrix::identity(n);

    for k in 0..n.saturating_sub(2) {
        let len = n - k - 1;
        let x: Vec<Complex64> = (0..len).map(|i| m[(k + 1 + i, k)]).collect();
        let xnorm = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            continue;
        }
        let ph = if x[0].norm() > 0.0 { x[0] / x[0].norm() } else { ONE };
        let alpha = -ph * xnorm;
        let mut v = x.clone();
        v[0] -= alpha;
        let vnorm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for c in v.iter_mut() {
            *c /= vnorm;
        }

        // Trailing block update: A' = A - 2 v w† - 2 w v†, w = p - (v†p) v, p = A v.
        let p: Vec<Complex64> = (0..len)
            .map(|i| (0..len).map(|j| m[(k + 1 + i, k + 1 + j)] * v[j]).sum())
            .collect();
        let kappa: Complex64 = v.iter().zip(&p).map(|(vi, pi)| vi.conj() * pi).sum();
        let w: Vec<Complex64> = p.iter().zip(&v).map(|(pi, vi)| pi - kappa * vi).collect();
        for i in 0..len {
            for j in 0..len {
                let upd = v[i] * w[j].conj() + w[i] * v[j].conj();
                m[(k + 1 + i, k + 1 + j)] -= upd * 2.0;
            }
        }
        m[(k + 1, k)] = alpha;
        m[(k, k + 1)] = alpha.conj();
        for i in 1..len {
            m[(k + 1 + i, k)] = ZERO;
            m[(k, k + 1 + i)] = ZERO;
        }

        // Q <- Q (I - 2 v v†) on columns k+1..n.
        for r in 0..n {
            let qv: Complex64 = (0..len).map(|j| q[(r, k + 1 + j)] * v[j]).sum();
            for j in 0..len {
                q[(r, k + 1 + j)] -= qv * v[j].conj() * 2.0;
            }
        }
    }

    // Diagonal unitary D making the sub-diagonal real and non-negative.
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    let mut phase = ONE;
    let mut phases = vec![ONE; n];
    for k in 0..n {
        d[k] = m[(k, k)].re;
        if k + 1 < n {
            let t = m[(k + 1, k)];
            let r = t.norm();
            e[k] = r;
            if r > 0.0 {
                phase *= t / r;
            }
            phases[k + 1] = phase;
        }
    }
    for r in 0..n {
        for c in 0..n {
            q[(r, c)] *= phases[c];
        }
    }
    (d, e, q)
}

/// Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix;
/// rotations are accumulated into the columns of `z`.
fn tql_implicit(d: &mut [f64], e: &mut [f64], z: &mut CMatrix) -> Result<()> {
    let n = d.len();
    let rows = z.rows();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 100 {
                return Err(Error::NoConvergence);
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..rows {
                    let zf = z[(k, i + 1)];
                    let zi = z[(k, i)];
                    z[(k, i + 1)] = zi * s + zf * c;
                    z[(k, i)] = zi * c - zf * s;
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}
