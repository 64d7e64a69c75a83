//! Small dense kernels: row-major matrices, Gram matrices, a cyclic Jacobi
//! eigensolver, pseudo-inverse solves and tangent projectors.
//!
//! Sizes here are tiny (a handful of constraints, at most a few hundred
//! ambient dimensions), so everything is plain `Vec<f64>` storage with no
//! blocking or BLAS.

use crate::{Error, Result};

/// Default relative eigenvalue cutoff for pseudo-inverse solves.
pub const DEFAULT_PINV_TOL: f64 = 1e-10;

/// Maximum number of cyclic Jacobi sweeps before giving up.
pub const MAX_JACOBI_SWEEPS: usize = 100;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data.
    ///
    /// Panics if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Self { rows, cols, data }
    }

    /// Builds a matrix from a list of equally long rows. `cols` is needed
    /// so that an empty row list still has a well-defined shape.
    pub fn from_rows(cols: usize, rows: &[Vec<f64>]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
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

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// `self · v`
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols, "mul_vec shape mismatch");
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `selfᵀ · v`
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows, "tr_mul_vec shape mismatch");
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi != 0.0 {
                axpy(vi, self.row(i), &mut out);
            }
        }
        out
    }

    /// `self · other`
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a != 0.0 {
                    let (src, dst) = (other.row(k), i * other.cols);
                    for (o, &b) in out.data[dst..dst + other.cols].iter_mut().zip(src) {
                        *o += a * b;
                    }
                }
            }
        }
        out
    }

    /// Largest absolute entry; 0 for an empty matrix.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Entry-wise `self - other`.
    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `y += alpha · x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Gram matrix `jac · jacᵀ`. The upper triangle is computed and mirrored so
/// the result is exactly symmetric.
pub fn gram(jac: &Matrix) -> Matrix {
    let m = jac.rows();
    let mut g = Matrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = dot(jac.row(i), jac.row(j));
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// Eigendecomposition `A = V · diag(λ) · Vᵀ` of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Eigenvalues, unordered.
    pub values: Vec<f64>,
    /// Eigenvectors stored as columns.
    pub vectors: Matrix,
}

/// Cyclic Jacobi eigensolver for a symmetric matrix.
///
/// Converges when the off-diagonal Frobenius norm drops below `1e-15` of the
/// total norm; fails after [`MAX_JACOBI_SWEEPS`] sweeps.
pub fn sym_eigen(a: &Matrix) -> Result<SymEigen> {
    let n = a.rows();
    assert_eq!(n, a.cols(), "sym_eigen needs a square matrix");
    if !a.is_finite() {
        return Err(Error::NonFinite("matrix passed to eigensolver".into()));
    }
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    let total: f64 = m.data().iter().map(|x| x * x).sum::<f64>().sqrt();
    if n <= 1 || total == 0.0 {
        return Ok(SymEigen {
            values: (0..n).map(|i| m[(i, i)]).collect(),
            vectors: v,
        });
    }
    let threshold = 1e-15 * total;
    for _ in 0..MAX_JACOBI_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += 2.0 * m[(p, q)] * m[(p, q)];
            }
        }
        if off.sqrt() <= threshold {
            return Ok(SymEigen {
                values: (0..n).map(|i| m[(i, i)]).collect(),
                vectors: v,
            });
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    Err(Error::SolverFailure {
        sweeps: MAX_JACOBI_SWEEPS,
    })
}

/// Moore–Penrose pseudo-inverse of a symmetric matrix, kept in factored
/// form so it can be applied to many right-hand sides.
#[derive(Debug, Clone)]
pub struct SymPinv {
    vectors: Matrix,
    inv_values: Vec<f64>,
    rank: usize,
}

impl SymPinv {
    /// Factors `g`. Eigenvalues with `|λ| < rel_tol · max|λ|` are treated as
    /// zero.
    pub fn new(g: &Matrix, rel_tol: f64) -> Result<Self> {
        let eig = sym_eigen(g)?;
        let max = eig.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let cutoff = rel_tol * max;
        let mut rank = 0;
        let inv_values = eig
            .values
            .iter()
            .map(|&l| {
                if max > 0.0 && l.abs() >= cutoff {
                    rank += 1;
                    1.0 / l
                } else {
                    0.0
                }
            })
            .collect();
        Ok(Self {
            vectors: eig.vectors,
            inv_values,
            rank,
        })
    }

    pub fn dim(&self) -> usize {
        self.inv_values.len()
    }

    /// Numerical rank under the cutoff used at construction.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `G⁺ · b`
    pub fn apply(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n, "pseudo-inverse rhs length mismatch");
        let mut coeffs = self.vectors.tr_mul_vec(b);
        for (c, &inv) in coeffs.iter_mut().zip(&self.inv_values) {
            *c *= inv;
        }
        self.vectors.mul_vec(&coeffs)
    }
}

/// Solves `G x = b` in the least-squares minimum-norm sense via `G⁺ b`.
pub fn solve_sym_pseudo(g: &Matrix, b: &[f64], rel_tol: f64) -> Result<Vec<f64>> {
    Ok(SymPinv::new(g, rel_tol)?.apply(b))
}

/// Orthogonal projector `I − jacᵀ G⁺ jac` onto the null space of `jac`,
/// given a pseudo-inverse of `G = jac·jacᵀ`.
pub fn projector_with(jac: &Matrix, pinv: &SymPinv) -> Matrix {
    let d = jac.cols();
    let m = jac.rows();
    let mut proj = Matrix::identity(d);
    if m == 0 {
        return proj;
    }
    // w = G⁺ · jac, column by column
    let mut w = Matrix::zeros(m, d);
    let mut col = vec![0.0; m];
    for j in 0..d {
        for (i, c) in col.iter_mut().enumerate() {
            *c = jac[(i, j)];
        }
        let wc = pinv.apply(&col);
        for (i, v) in wc.into_iter().enumerate() {
            w[(i, j)] = v;
        }
    }
    // Π = I − jacᵀ w, upper triangle then mirror
    for a in 0..d {
        for b in a..d {
            let mut s = 0.0;
            for i in 0..m {
                s += jac[(i, a)] * w[(i, b)];
            }
            let v = if a == b { 1.0 - s } else { -s };
            proj[(a, b)] = v;
            proj[(b, a)] = v;
        }
    }
    proj
}

/// Tangent projector `Π = I − jacᵀ G⁺ jac`. Identity when `jac` has no rows.
pub fn projector(jac: &Matrix, rel_tol: f64) -> Result<Matrix> {
    if jac.rows() == 0 {
        return Ok(Matrix::identity(jac.cols()));
    }
    let pinv = SymPinv::new(&gram(jac), rel_tol)?;
    Ok(projector_with(jac, &pinv))
}

/// Dense solve of a general square system by Gaussian elimination with
/// partial pivoting. Returns `None` when a pivot underflows (singular or
/// numerically singular matrix).
pub fn solve_dense(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.rows();
    assert_eq!(n, a.cols(), "solve_dense needs a square matrix");
    assert_eq!(b.len(), n);
    let mut m = a.clone();
    let mut x = b.to_vec();
    let scale = m.max_abs();
    if scale == 0.0 || !scale.is_finite() {
        return if n == 0 { Some(x) } else { None };
    }
    for k in 0..n {
        let (piv, pval) = (k..n)
            .map(|i| (i, m[(i, k)].abs()))
            .fold(
                (k, -1.0),
                |best, cur| if cur.1 > best.1 { cur } else { best },
            );
        if pval <= 1e-14 * scale {
            return None;
        }
        if piv != k {
            for j in 0..n {
                let tmp = m[(k, j)];
                m[(k, j)] = m[(piv, j)];
                m[(piv, j)] = tmp;
            }
            x.swap(k, piv);
        }
        for i in k + 1..n {
            let f = m[(i, k)] / m[(k, k)];
            if f != 0.0 {
                for j in k..n {
                    m[(i, j)] -= f * m[(k, j)];
                }
                x[i] -= f * x[k];
            }
        }
    }
    for k in (0..n).rev() {
        let mut s = x[k];
        for j in k + 1..n {
            s -= m[(k, j)] * x[j];
        }
        x[k] = s / m[(k, k)];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}
