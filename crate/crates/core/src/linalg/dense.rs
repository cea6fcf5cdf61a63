use nalgebra::{DMatrix, SymmetricEigen};

/// Eigenpairs of a small symmetric-definite pencil, values ascending, vectors
/// orthonormal in the `b` inner product.
pub struct DenseEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// Solves `a x = λ b x` for symmetric `a` and symmetric positive-semidefinite `b`.
/// Directions where `b` is numerically singular are dropped.
pub fn symmetric_generalized_eigen(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DenseEigen {
    let n = a.nrows();
    let bs = (b + b.transpose()) * 0.5;
    let be = SymmetricEigen::new(bs);
    let bmax = be.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..n)
        .filter(|&i| be.eigenvalues[i] > 1e-13 * bmax)
        .collect();
    let mut w = DMatrix::zeros(n, keep.len());
    for (j, &i) in keep.iter().enumerate() {
        let s = 1.0 / be.eigenvalues[i].sqrt();
        w.set_column(j, &(be.eigenvectors.column(i) * s));
    }
    let c = w.transpose() * a * &w;
    let c = (&c + c.transpose()) * 0.5;
    let ce = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..keep.len()).collect();
    order.sort_by(|&i, &j| ce.eigenvalues[i].total_cmp(&ce.eigenvalues[j]));
    let values = order.iter().map(|&i| ce.eigenvalues[i]).collect();
    let mut q = DMatrix::zeros(keep.len(), keep.len());
    for (j, &i) in order.iter().enumerate() {
        q.set_column(j, &ce.eigenvectors.column(i));
    }
    DenseEigen {
        values,
        vectors: w * q,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_pencil() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0, 8.0]));
        let b = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1.0, 2.0]));
        let e = symmetric_generalized_eigen(&a, &b);
        assert_eq!(e.values.len(), 3);
        for (v, x) in e.values.iter().zip([1.0, 3.0, 4.0]) {
            assert!((v - x).abs() < 1e-14);
        }
        let g = e.vectors.transpose() * &b * &e.vectors;
        assert!((g - DMatrix::identity(3, 3)).norm() < 1e-13);
    }

    #[test]
    fn drops_null_directions_of_b() {
        let a = DMatrix::identity(2, 2);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let e = symmetric_generalized_eigen(&a, &b);
        assert_eq!(e.values.len(), 1);
        assert!((e.values[0] - 0.5).abs() < 1e-14);
    }
}
