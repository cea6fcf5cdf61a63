use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use num_complex::Complex64;
use num_traits::{One, Zero};
use std::ops::{AddAssign, Mul};

use super::LinalgError;

/// Scalar types stored in [`CsrMatrix`].
pub trait Scalar:
    Copy
    + Zero
    + One
    + AddAssign
    + Mul<Output = Self>
    + PartialEq
    + Send
    + Sync
    + std::fmt::Debug
    + 'static
{
    fn modulus(self) -> f64;
}

impl Scalar for f64 {
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    fn modulus(self) -> f64 {
        self.norm()
    }
}

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed in
    /// input order, so the result is bit-stable for a fixed triplet order.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&i| (triplets[i].0, triplets[i].1));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for &i in &order {
            let (r, c, v) = triplets[i];
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        let t: Vec<_> = (0..n).map(|i| (i, i, T::one())).collect();
        Self::from_triplets(n, n, &t)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates over `(col, value)` pairs in row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => T::zero(),
        }
    }

    pub fn triplets(&self) -> Vec<(usize, usize, T)> {
        let mut out = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                out.push((r, c, v));
            }
        }
        out
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = T::zero();
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            *yr = acc;
        }
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<_> = self
            .triplets()
            .into_iter()
            .map(|(r, c, v)| (c, r, v))
            .collect();
        Self::from_triplets(self.ncols, self.nrows, &t)
    }

    /// Returns `self + alpha * other`.
    pub fn add_scaled(&self, other: &Self, alpha: T) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t = self.triplets();
        t.extend(
            other
                .triplets()
                .into_iter()
                .map(|(r, c, v)| (r, c, alpha * v)),
        );
        Self::from_triplets(self.nrows, self.ncols, &t)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|r| self.row(r).map(|(_, v)| v.modulus()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut d = vec![vec![T::zero(); self.ncols]; self.nrows];
        for (r, c, v) in self.triplets() {
            d[r][c] = v;
        }
        d
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, T>, LinalgError>
    where
        T: faer::traits::ComplexField,
    {
        let t: Vec<_> = self
            .triplets()
            .into_iter()
            .map(|(r, c, v)| Triplet::new(r, c, v))
            .collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &t)
            .map_err(|e| LinalgError::Backend(format!("{e:?}")))
    }
}

impl CsrMatrix<Complex64> {
    /// All eigenvalues of the dense pencil `a x = λ m x`, via `m⁻¹a`. Intended for a few thousand unknowns at most.
    pub fn pencil_eigenvalues(a: &Self, m: &Self) -> Result<Vec<Complex64>, LinalgError> {
        let n = a.nrows();
        if a.ncols() != n || m.nrows() != n || m.ncols() != n {
            return Err(LinalgError::Dimension {
                expected: n,
                got: m.nrows(),
            });
        }
        let dense = |x: &Self| {
            let mut d = Mat::<Complex64>::zeros(n, n);
            for (r, c, v) in x.triplets() {
                d[(r, c)] = v;
            }
            d
        };
        let lu = dense(m).partial_piv_lu();
        let b = lu.solve(dense(a));
        if b.col_iter()
            .flat_map(|c| c.iter().copied().collect::<Vec<_>>())
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(LinalgError::Singular);
        }
        b.eigenvalues()
            .map_err(|e| LinalgError::Backend(format!("{e:?}")))
    }
}

impl CsrMatrix<f64> {
    pub fn dot(x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(y).map(|(a, b)| a * b).sum()
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (r, &xr) in x.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            let mut s = 0.0;
            for (c, v) in self.row(r) {
                s += v * y[c];
            }
            acc += xr * s;
        }
        acc
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let scale = self.norm_inf().max(f64::MIN_POSITIVE);
        self.triplets()
            .iter()
            .all(|&(r, c, v)| (v - self.get(c, r)).abs() <= tol * scale)
    }

    pub fn to_complex(&self) -> CsrMatrix<Complex64> {
        let t: Vec<_> = self
            .triplets()
            .into_iter()
            .map(|(r, c, v)| (r, c, Complex64::new(v, 0.0)))
            .collect();
        CsrMatrix::from_triplets(self.nrows, self.ncols, &t)
    }
}

/// Sparse Cholesky factorization of a symmetric positive-definite matrix.
pub struct CholeskySolver {
    n: usize,
    llt: Llt<usize, f64>,
}

impl CholeskySolver {
    pub fn new(a: &CsrMatrix<f64>) -> Result<Self, LinalgError> {
        if a.nrows() != a.ncols() {
            return Err(LinalgError::Dimension {
                expected: a.nrows(),
                got: a.ncols(),
            });
        }
        let llt = a
            .to_faer()?
            .sp_cholesky(Side::Lower)
            .map_err(|_| LinalgError::NotPositiveDefinite)?;
        Ok(Self { n: a.nrows(), llt })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let rhs = Mat::from_fn(self.n, 1, |i, _| b[i]);
        let x = self.llt.solve(&rhs);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }

    /// Solves for several right-hand sides at once.
    pub fn solve_many(&self, cols: &[Vec<f64>]) -> Vec<Vec<f64>> {
        if cols.is_empty() {
            return Vec::new();
        }
        let rhs = Mat::from_fn(self.n, cols.len(), |i, j| cols[j][i]);
        let x = self.llt.solve(&rhs);
        (0..cols.len())
            .map(|j| (0..self.n).map(|i| x[(i, j)]).collect())
            .collect()
    }
}

/// Sparse LU factorization with partial pivoting for complex matrices.
pub struct ComplexLuSolver {
    n: usize,
    lu: Lu<usize, Complex64>,
}

impl ComplexLuSolver {
    pub fn new(a: &CsrMatrix<Complex64>) -> Result<Self, LinalgError> {
        if a.nrows() != a.ncols() {
            return Err(LinalgError::Dimension {
                expected: a.nrows(),
                got: a.ncols(),
            });
        }
        let lu = a.to_faer()?.sp_lu().map_err(|_| LinalgError::Singular)?;
        Ok(Self { n: a.nrows(), lu })
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(b.len(), self.n);
        let rhs = Mat::from_fn(self.n, 1, |i, _| b[i]);
        let x = self.lu.solve(&rhs);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let a =
            CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, 2.0), (0, 0, 3.0), (0, 1, -1.0)]);
        assert_eq!(a.get(0, 0), 4.0);
        assert_eq!(a.get(0, 1), -1.0);
        assert_eq!(a.get(1, 0), 0.0);
        assert_eq!(a.nnz(), 3);
    }

    #[test]
    fn identity_and_transpose() {
        let i = CsrMatrix::<Complex64>::identity(3);
        assert_eq!(i.get(2, 2), Complex64::new(1.0, 0.0));
        let a = CsrMatrix::from_triplets(2, 3, &[(0, 2, 5.0), (1, 0, 1.0)]);
        let t = a.transpose();
        assert_eq!((t.nrows(), t.ncols()), (3, 2));
        assert_eq!(t.get(2, 0), 5.0);
    }

    #[test]
    fn cholesky_solves_laplacian() {
        let n = 50;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.5));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &t);
        let b: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let x = CholeskySolver::new(&a).unwrap().solve(&b);
        let r = a.matvec(&x);
        let err: f64 = r
            .iter()
            .zip(&b)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, -1.0)]);
        assert!(CholeskySolver::new(&a).is_err());
    }

    #[test]
    fn complex_lu_solves() {
        let z = |re, im| Complex64::new(re, im);
        let a = CsrMatrix::from_triplets(
            3,
            3,
            &[
                (0, 0, z(2.0, 1.0)),
                (0, 1, z(1.0, 0.0)),
                (1, 1, z(0.0, 3.0)),
                (2, 0, z(1.0, 0.0)),
                (2, 2, z(4.0, 0.0)),
            ],
        );
        let b = vec![z(1.0, 0.0), z(0.0, 1.0), z(2.0, -1.0)];
        let x = ComplexLuSolver::new(&a).unwrap().solve(&b);
        let r = a.matvec(&x);
        for (p, q) in r.iter().zip(&b) {
            assert!((p - q).norm() < 1e-13);
        }
    }
}
