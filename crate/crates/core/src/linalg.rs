//! Dense linear algebra for small problems: column-major matrices, Householder
//! least squares, orthogonal-complement projection and a Jacobi eigensolver
//! for symmetric matrices.

use std::ops::Deref;

use crate::error::{Error, Result};

/// Relative rank tolerance on the diagonal of the triangular QR factor.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Absolute asymmetry accepted by [`sym_eigen`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Real matrix stored column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from column-major data.
    ///
    /// Zero columns are allowed: an empty column selection is a valid
    /// operand for projection.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                operation: "DenseMatrix::new",
                expected: rows * cols,
                found: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("DenseMatrix::new"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_row_major(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                operation: "DenseMatrix::from_row_major",
                expected: rows * cols,
                found: values.len(),
            });
        }
        let mut data = vec![0.0; rows * cols];
        for i in 0..rows {
            for j in 0..cols {
                data[j * rows + i] = values[i * cols + j];
            }
        }
        Self::new(rows, cols, data)
    }

    /// Builds a matrix from a list of rows of equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        for row in rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    operation: "DenseMatrix::from_rows",
                    expected: cols,
                    found: row.len(),
                });
            }
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_row_major(rows.len(), cols, &flat)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut data = vec![0.0; n * n];
        for (i, d) in diag.iter().enumerate() {
            data[i * n + i] = *d;
        }
        Self::new(n, n, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    pub(crate) fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[j * self.rows + i] = value;
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn as_col_major(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self { rows: self.cols, cols: self.rows, data: vec![0.0; self.data.len()] };
        for j in 0..self.cols {
            for i in 0..self.rows {
                t.data[i * self.cols + j] = self.get(i, j);
            }
        }
        t
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                operation: "matmul",
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let dst = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for (k, &b) in other.column(j).iter().enumerate() {
                if b != 0.0 {
                    for (d, a) in dst.iter_mut().zip(self.column(k)) {
                        *d += a * b;
                    }
                }
            }
        }
        Ok(out)
    }

    /// `A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Result<Vector> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                operation: "mul_vec",
                expected: self.cols,
                found: x.len(),
            });
        }
        let mut out = vec![0.0; self.rows];
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                for (o, a) in out.iter_mut().zip(self.column(j)) {
                    *o += a * xj;
                }
            }
        }
        Ok(Vector(out))
    }

    /// `A^T u`, i.e. the inner product of `u` with every column.
    pub fn tr_mul_vec(&self, u: &[f64]) -> Result<Vector> {
        if u.len() != self.rows {
            return Err(Error::DimensionMismatch {
                operation: "tr_mul_vec",
                expected: self.rows,
                found: u.len(),
            });
        }
        Ok(Vector((0..self.cols).map(|j| dot(self.column(j), u)).collect()))
    }

    /// `A^T A`.
    pub fn gram(&self) -> Self {
        let n = self.cols;
        let mut g = Self::zeros(n, n);
        for j in 0..n {
            for i in 0..=j {
                let v = dot(self.column(i), self.column(j));
                g.data[j * n + i] = v;
                g.data[i * n + j] = v;
            }
        }
        g
    }

    /// Matrix made of the columns listed in `indices`, in the given order.
    pub fn columns_submatrix(&self, indices: &[usize]) -> Result<Self> {
        check_index_set(indices, self.cols)?;
        let mut data = Vec::with_capacity(indices.len() * self.rows);
        for &j in indices {
            data.extend_from_slice(self.column(j));
        }
        Ok(Self { rows: self.rows, cols: indices.len(), data })
    }

    /// Square submatrix on rows and columns `indices`; the caller guarantees
    /// the indices are valid.
    pub(crate) fn principal_submatrix(&self, indices: &[usize]) -> Self {
        let k = indices.len();
        let mut data = Vec::with_capacity(k * k);
        for &j in indices {
            for &i in indices {
                data.push(self.get(i, j));
            }
        }
        Self { rows: k, cols: k, data }
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Checks that every index is below `len` and that none repeats.
pub(crate) fn check_index_set(indices: &[usize], len: usize) -> Result<()> {
    let mut seen = vec![false; len];
    for &i in indices {
        if i >= len {
            return Err(Error::IndexOutOfRange { index: i, len });
        }
        if seen[i] {
            return Err(Error::DuplicateIndex(i));
        }
        seen[i] = true;
    }
    Ok(())
}

/// Real vector with finite entries.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Vector::new"));
        }
        Ok(Self(values))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norms(&self) -> Norms {
        norms(&self.0)
    }
}

impl Deref for Vector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

pub fn norms(u: &[f64]) -> Norms {
    let mut l1 = 0.0;
    let mut sq = 0.0;
    let mut linf: f64 = 0.0;
    for &v in u {
        let a = v.abs();
        l1 += a;
        sq += a * a;
        linf = linf.max(a);
    }
    Norms { l1, l2: sq.sqrt(), linf }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn l2(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

pub(crate) fn linf(u: &[f64]) -> f64 {
    u.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
}

/// Householder QR factorization `A = Q R` of an `m x k` matrix with `m >= k`.
///
/// Reflectors are kept in the strict lower triangle, `R` in the upper one.
#[derive(Debug, Clone)]
pub struct HouseholderQr {
    factors: DenseMatrix,
    tau: Vec<f64>,
}

impl HouseholderQr {
    #[allow(clippy::needless_range_loop)]
    pub fn new(a: &DenseMatrix) -> Self {
        let m = a.rows;
        let k = a.cols.min(m);
        let mut f = a.clone();
        let mut tau = vec![0.0; k];
        for j in 0..k {
            let col = &f.data[j * m + j..(j + 1) * m];
            let alpha = col[0];
            let norm = l2(col);
            if norm == 0.0 {
                continue;
            }
            let beta = if alpha >= 0.0 { -norm } else { norm };
            let scale = 1.0 / (alpha - beta);
            tau[j] = (beta - alpha) / beta;
            f.data[j * m + j] = beta;
            for v in &mut f.data[j * m + j + 1..(j + 1) * m] {
                *v *= scale;
            }
            // apply H_j to the trailing columns
            for c in j + 1..a.cols {
                let mut w = f.data[c * m + j];
                for i in j + 1..m {
                    w += f.data[j * m + i] * f.data[c * m + i];
                }
                w *= tau[j];
                f.data[c * m + j] -= w;
                for i in j + 1..m {
                    f.data[c * m + i] -= w * f.data[j * m + i];
                }
            }
        }
        Self { factors: f, tau }
    }

    fn rows(&self) -> usize {
        self.factors.rows
    }

    /// Diagonal of `R`.
    pub fn r_diagonal(&self) -> Vec<f64> {
        (0..self.tau.len()).map(|j| self.factors.get(j, j)).collect()
    }

    /// Fails when `A` does not have full column rank within [`RANK_TOLERANCE`].
    pub fn check_full_rank(&self, operation: &'static str) -> Result<()> {
        if self.factors.cols > self.factors.rows {
            return Err(Error::RankDeficient { operation });
        }
        let diag = self.r_diagonal();
        let largest = diag.iter().fold(0.0, |m: f64, d| m.max(d.abs()));
        let smallest = diag.iter().fold(f64::INFINITY, |m: f64, d| m.min(d.abs()));
        if !diag.is_empty() && (largest == 0.0 || smallest <= RANK_TOLERANCE * largest) {
            return Err(Error::RankDeficient { operation });
        }
        Ok(())
    }

    /// Overwrites `y` with `Q^T y`.
    pub fn apply_qt(&self, y: &mut [f64]) {
        for j in 0..self.tau.len() {
            self.apply_reflector(j, y);
        }
    }

    /// Overwrites `y` with `Q y`.
    pub fn apply_q(&self, y: &mut [f64]) {
        for j in (0..self.tau.len()).rev() {
            self.apply_reflector(j, y);
        }
    }

    fn apply_reflector(&self, j: usize, y: &mut [f64]) {
        let m = self.rows();
        let t = self.tau[j];
        if t == 0.0 {
            return;
        }
        let v = &self.factors.data[j * m + j + 1..(j + 1) * m];
        let mut w = y[j] + dot(v, &y[j + 1..]);
        w *= t;
        y[j] -= w;
        for (yi, vi) in y[j + 1..].iter_mut().zip(v) {
            *yi -= w * vi;
        }
    }

    /// The full `m x m` orthogonal factor.
    pub fn q_full(&self) -> DenseMatrix {
        let m = self.rows();
        let mut q = DenseMatrix::identity(m);
        for c in 0..m {
            let col = &mut q.data[c * m..(c + 1) * m];
            self.apply_q(col);
        }
        q
    }

    /// Solves the least-squares problem for a factorization of full column rank.
    #[allow(clippy::needless_range_loop)]
    fn solve(&self, y: &[f64]) -> Vec<f64> {
        let k = self.factors.cols;
        let mut c = y.to_vec();
        self.apply_qt(&mut c);
        let mut x = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = c[i];
            for j in i + 1..k {
                s -= self.factors.get(i, j) * x[j];
            }
            x[i] = s / self.factors.get(i, i);
        }
        x
    }
}

/// Minimizer of `||y - A x||_2` for `A` of full column rank.
pub fn least_squares(a: &DenseMatrix, y: &[f64]) -> Result<Vector> {
    if a.rows != y.len() {
        return Err(Error::DimensionMismatch {
            operation: "least_squares",
            expected: a.rows,
            found: y.len(),
        });
    }
    let qr = HouseholderQr::new(a);
    qr.check_full_rank("least_squares")?;
    Ok(Vector(qr.solve(y)))
}

/// `P⊥ u`: the component of `u` orthogonal to the column space of `a`.
///
/// An operand with no columns projects onto the whole space, so `u` comes
/// back unchanged.
pub fn project_complement(a: &DenseMatrix, u: &[f64]) -> Result<Vector> {
    if a.rows != u.len() {
        return Err(Error::DimensionMismatch {
            operation: "project_complement",
            expected: a.rows,
            found: u.len(),
        });
    }
    if a.cols == 0 {
        return Ok(Vector(u.to_vec()));
    }
    let qr = HouseholderQr::new(a);
    qr.check_full_rank("project_complement")?;
    let mut c = u.to_vec();
    qr.apply_qt(&mut c);
    for v in &mut c[..a.cols] {
        *v = 0.0;
    }
    qr.apply_q(&mut c);
    Ok(Vector(c))
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    /// Eigenvectors stored as columns, matching `values`.
    pub vectors: DenseMatrix,
}

/// Cyclic Jacobi eigensolver.
pub fn sym_eigen(m: &DenseMatrix) -> Result<SymEigen> {
    let n = m.cols;
    if m.rows != n {
        return Err(Error::NotSquare { rows: m.rows, cols: m.cols });
    }
    let mut asym: f64 = 0.0;
    for j in 0..n {
        for i in 0..j {
            asym = asym.max((m.get(i, j) - m.get(j, i)).abs());
        }
    }
    if asym > SYMMETRY_TOLERANCE {
        return Err(Error::NotSymmetric(asym));
    }
    let mut a = m.clone();
    for j in 0..n {
        for i in 0..j {
            let s = 0.5 * (m.get(i, j) + m.get(j, i));
            a.set(i, j, s);
            a.set(j, i, s);
        }
    }
    let mut v = DenseMatrix::identity(n);

    let frob: f64 = a.data.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for j in 0..n {
            for i in 0..j {
                off += a.get(i, j) * a.get(i, j);
            }
        }
        if off.sqrt() <= 1e-17 * frob || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                a.set(p, q, 0.0);
                a.set(q, p, 0.0);
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(i, i).total_cmp(&a.get(j, j)));
    let values = order.iter().map(|&i| a.get(i, i)).collect();
    let vectors = v.columns_submatrix(&order)?;
    Ok(SymEigen { values, vectors })
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn sym_eigen_extremes(m: &DenseMatrix) -> Result<(f64, f64)> {
    let eig = sym_eigen(m)?;
    match (eig.values.first(), eig.values.last()) {
        (Some(&lo), Some(&hi)) => Ok((lo, hi)),
        _ => Err(Error::InvalidArgument("empty matrix has no eigenvalues".into())),
    }
}
