//! Small dense kernels: symmetric eigenvalues by cyclic Jacobi, singular
//! values through the smaller Gram matrix, cosine similarity and softmax.

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("matrix dimensions must be positive"));
        }
        if data.len() != rows * cols {
            return Err(Error::Shape {
                context: "matrix data",
                expected: rows * cols,
                actual: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0);
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::invalid("ragged rows"));
        }
        Self::new(r, c, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn scaled(&self, c: f64) -> Self {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    /// Gram matrix on the smaller side: `AᵀA` when `cols <= rows`, else `AAᵀ`.
    pub fn small_gram(&self) -> DenseMatrix {
        let (m, n) = (self.rows, self.cols);
        if n <= m {
            let mut g = DenseMatrix::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let s: f64 = (0..m).map(|r| self.get(r, i) * self.get(r, j)).sum();
                    g.set(i, j, s);
                    g.set(j, i, s);
                }
            }
            g
        } else {
            let mut g = DenseMatrix::zeros(m, m);
            for i in 0..m {
                let ri = &self.data[i * n..(i + 1) * n];
                for j in i..m {
                    let rj = &self.data[j * n..(j + 1) * n];
                    let s: f64 = ri.iter().zip(rj).map(|(a, b)| a * b).sum();
                    g.set(i, j, s);
                    g.set(j, i, s);
                }
            }
            g
        }
    }
}

const MAX_SWEEPS: usize = 64;

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted
/// descending. `tol` defaults to `1e-12 * max|A|` and bounds every
/// off-diagonal magnitude at exit.
pub fn jacobi_eigh(a: &DenseMatrix, tol: Option<f64>) -> Result<Vec<f64>> {
    let n = a.rows;
    if a.cols != n {
        return Err(Error::Shape {
            context: "jacobi_eigh (square)",
            expected: n,
            actual: a.cols,
        });
    }
    if a.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("jacobi_eigh input"));
    }
    let scale = a.max_abs();
    let sym_tol = 1e-12 * scale.max(1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (a.get(i, j) - a.get(j, i)).abs();
            if d > sym_tol {
                return Err(Error::NotSymmetric(d));
            }
        }
    }
    if scale == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let tol = tol.unwrap_or(1e-12 * scale);

    let mut m = a.data.clone();
    // Symmetrise so rounding in the input cannot bias the rotations.
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[i * n + j] + m[j * n + i]);
            m[i * n + j] = v;
            m[j * n + i] = v;
        }
    }

    for _ in 0..MAX_SWEEPS {
        let off = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .fold(0.0_f64, |acc, (i, j)| acc.max(m[i * n + j].abs()));
        if off < tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq.abs() < tol {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
            }
        }
    }

    let mut eig: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    eig.sort_by(|x, y| y.total_cmp(x));
    Ok(eig)
}

/// The `min(m, n)` singular values of `a`, descending.
pub fn singular_values(a: &DenseMatrix) -> Result<Vec<f64>> {
    if a.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("singular_values input"));
    }
    let gram = a.small_gram();
    let eig = jacobi_eigh(&gram, None)?;
    Ok(eig.into_iter().map(|l| l.max(0.0).sqrt()).collect())
}

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

/// `u·v / (‖u‖‖v‖)`, clamped to `[-1, 1]`.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Shape {
            context: "cosine_similarity",
            expected: u.len(),
            actual: v.len(),
        });
    }
    let nu = norm(u);
    let nv = norm(v);
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroNorm("cosine_similarity"));
    }
    if !(nu.is_finite() && nv.is_finite()) {
        return Err(Error::NonFinite("cosine_similarity"));
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// `1 - cosine_similarity`.
pub fn cosine_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    cosine_similarity(u, v).map(|s| 1.0 - s)
}

/// Max-shifted softmax of `scores / temperature`.
pub fn softmax(scores: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::invalid("softmax of empty input"));
    }
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::invalid("softmax temperature must be positive"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("softmax scores"));
    }
    let max = scores.iter().fold(f64::NEG_INFINITY, |m, &s| m.max(s)) / temperature;
    let exps: Vec<f64> = scores
        .iter()
        .map(|s| (s / temperature - max).exp())
        .collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Values closer than this to the extreme count as tied. Cosine scores of
/// mathematically equal candidates differ by a few ulps after scaling.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Index of the largest value; ties (within [`TIE_TOLERANCE`]) resolve to
/// the lowest index. NaNs are skipped.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let best = values.iter().copied().filter(|v| !v.is_nan()).reduce(f64::max)?;
    values.iter().position(|&v| v >= best - TIE_TOLERANCE)
}

/// Index of the smallest value; ties (within [`TIE_TOLERANCE`]) resolve to
/// the lowest index. NaNs are skipped.
pub fn argmin(values: &[f64]) -> Option<usize> {
    let best = values.iter().copied().filter(|v| !v.is_nan()).reduce(f64::min)?;
    values.iter().position(|&v| v <= best + TIE_TOLERANCE)
}
