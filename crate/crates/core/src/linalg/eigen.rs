use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dense::symmetric_generalized_eigen;
use super::{CholeskySolver, CsrMatrix, LinalgError};

/// Which part of the spectrum to compute.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Target {
    /// The lowest `n` eigenpairs.
    Count(usize),
    /// Every eigenpair with eigenvalue at most the bound.
    Below(f64),
}

#[derive(Clone, Debug)]
pub struct EigenOptions {
    /// Normwise backward error required of every returned pair.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Problems up to this size are solved densely.
    pub dense_cutoff: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 2000,
            seed: 0x5eed,
            dense_cutoff: 300,
        }
    }
}

/// Eigenpairs of `A x = λ M x`, ascending, vectors `M`-orthonormal.
#[derive(Clone, Debug)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    /// Normwise backward errors `‖Ax − λMx‖ / ((‖A‖ + |λ|‖M‖)‖x‖)`.
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

/// Lowest eigenpairs of a symmetric pencil with `A ⪰ 0` and `M ≻ 0`.
///
/// Subspace iteration on `(A + M)⁻¹M` (shift `σ = −1`) with Rayleigh–Ritz
/// extraction. For `Target::Below` the block grows until one converged Ritz
/// value beyond the bound is held as a guard.
pub fn lowest_eigenpairs(
    a: &CsrMatrix<f64>,
    m: &CsrMatrix<f64>,
    target: Target,
    opts: &EigenOptions,
) -> Result<EigenPairs, LinalgError> {
    let n = a.nrows();
    if m.nrows() != n || a.ncols() != n || m.ncols() != n {
        return Err(LinalgError::Dimension {
            expected: n,
            got: m.nrows(),
        });
    }
    let norms = (a.norm_inf(), m.norm_inf());
    if n <= opts.dense_cutoff {
        return dense_pairs(a, m, target, norms);
    }
    let k = CholeskySolver::new(&a.add_scaled(m, 1.0))?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut p = match target {
        Target::Count(c) => (c + (c / 2).max(6)).min(n),
        Target::Below(_) => 16.min(n),
    };
    let mut x: Vec<Vec<f64>> = (0..p).map(|_| random_vec(&mut rng, n)).collect();
    let mut last_res = f64::INFINITY;
    for iter in 1..=opts.max_iter {
        let mx: Vec<Vec<f64>> = x.iter().map(|v| m.matvec(v)).collect();
        let y = k.solve_many(&mx);
        let (theta, ritz) = rayleigh_ritz(a, m, &y);
        let res: Vec<f64> = theta
            .iter()
            .zip(&ritz)
            .map(|(&t, v)| backward_error(a, m, t, v, norms))
            .collect();
        let wanted = match target {
            Target::Count(c) => c.min(theta.len()),
            Target::Below(bound) => theta.iter().filter(|&&t| t <= bound).count(),
        };
        let guard = matches!(target, Target::Below(_)) as usize;
        let needed = (wanted + guard).min(theta.len());
        let want_block = match target {
            Target::Count(c) => c + (c / 2).max(6),
            Target::Below(_) => wanted + wanted / 2 + 8,
        }
        .min(n);
        if want_block > p || theta.len() < p {
            // grow (or refill after losing directions) and keep the current Ritz basis
            p = want_block.max(p);
            x = ritz;
            while x.len() < p {
                x.push(random_vec(&mut rng, n));
            }
            continue;
        }
        last_res = res[..needed].iter().cloned().fold(0.0, f64::max);
        if last_res <= opts.tol {
            let keep = wanted;
            return Ok(EigenPairs {
                values: theta[..keep].to_vec(),
                vectors: ritz[..keep].to_vec(),
                residuals: res[..keep].to_vec(),
                iterations: iter,
            });
        }
        x = ritz;
    }
    Err(LinalgError::NoConvergence {
        iterations: opts.max_iter,
        residual: last_res,
    })
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn rayleigh_ritz(
    a: &CsrMatrix<f64>,
    m: &CsrMatrix<f64>,
    y: &[Vec<f64>],
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let p = y.len();
    let ay: Vec<Vec<f64>> = y.iter().map(|v| a.matvec(v)).collect();
    let my: Vec<Vec<f64>> = y.iter().map(|v| m.matvec(v)).collect();
    let mut ar = DMatrix::zeros(p, p);
    let mut mr = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let aij = CsrMatrix::dot(&y[i], &ay[j]);
            let mij = CsrMatrix::dot(&y[i], &my[j]);
            ar[(i, j)] = aij;
            ar[(j, i)] = aij;
            mr[(i, j)] = mij;
            mr[(j, i)] = mij;
        }
    }
    let e = symmetric_generalized_eigen(&ar, &mr);
    let n = y[0].len();
    let vectors = (0..e.values.len())
        .map(|j| {
            let mut v = vec![0.0; n];
            for (i, yi) in y.iter().enumerate() {
                let c = e.vectors[(i, j)];
                for (vk, yk) in v.iter_mut().zip(yi) {
                    *vk += c * yk;
                }
            }
            v
        })
        .collect();
    (e.values, vectors)
}

fn backward_error(
    a: &CsrMatrix<f64>,
    m: &CsrMatrix<f64>,
    lambda: f64,
    x: &[f64],
    norms: (f64, f64),
) -> f64 {
    let ax = a.matvec(x);
    let mx = m.matvec(x);
    let r = ax
        .iter()
        .zip(&mx)
        .map(|(p, q)| (p - lambda * q).powi(2))
        .sum::<f64>()
        .sqrt();
    let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    r / ((norms.0 + lambda.abs() * norms.1) * xn)
}

fn dense_pairs(
    a: &CsrMatrix<f64>,
    m: &CsrMatrix<f64>,
    target: Target,
    norms: (f64, f64),
) -> Result<EigenPairs, LinalgError> {
    let n = a.nrows();
    let to_dense = |s: &CsrMatrix<f64>| {
        let mut d = DMatrix::zeros(n, n);
        for (r, c, v) in s.triplets() {
            d[(r, c)] = v;
        }
        d
    };
    let e = symmetric_generalized_eigen(&to_dense(a), &to_dense(m));
    if e.values.len() < n {
        return Err(LinalgError::NotPositiveDefinite);
    }
    let keep = match target {
        Target::Count(c) => c.min(n),
        Target::Below(bound) => e.values.iter().filter(|&&t| t <= bound).count(),
    };
    let vectors: Vec<Vec<f64>> = (0..keep)
        .map(|j| e.vectors.column(j).iter().copied().collect())
        .collect();
    let residuals = (0..keep)
        .map(|j| backward_error(a, m, e.values[j], &vectors[j], norms))
        .collect();
    Ok(EigenPairs {
        values: e.values[..keep].to_vec(),
        vectors,
        residuals,
        iterations: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    // P1 Neumann interval of length 1 with `n` cells.
    fn interval(n: usize) -> (CsrMatrix<f64>, CsrMatrix<f64>) {
        let h = 1.0 / n as f64;
        let mut ta = Vec::new();
        let mut tm = Vec::new();
        for i in 0..n {
            for (r, c, ka, km) in [
                (i, i, 1.0, 2.0),
                (i, i + 1, -1.0, 1.0),
                (i + 1, i, -1.0, 1.0),
                (i + 1, i + 1, 1.0, 2.0),
            ] {
                ta.push((r, c, ka / h));
                tm.push((r, c, km * h / 6.0));
            }
        }
        (
            CsrMatrix::from_triplets(n + 1, n + 1, &ta),
            CsrMatrix::from_triplets(n + 1, n + 1, &tm),
        )
    }

    #[test]
    fn iterative_matches_dense() {
        let (a, m) = interval(600);
        let it = lowest_eigenpairs(&a, &m, Target::Count(5), &EigenOptions::default()).unwrap();
        let dn = lowest_eigenpairs(
            &a,
            &m,
            Target::Count(5),
            &EigenOptions {
                dense_cutoff: 1000,
                ..Default::default()
            },
        )
        .unwrap();
        for (x, y) in it.values.iter().zip(&dn.values) {
            assert!((x - y).abs() < 1e-8 * (1.0 + y), "{x} {y}");
        }
        assert!(it.values[0].abs() < 1e-10);
        assert!((it.values[1] - PI * PI).abs() < 1e-3);
        for r in &it.residuals {
            assert!(*r <= 1e-10);
        }
    }

    #[test]
    fn below_returns_everything_under_bound() {
        let (a, m) = interval(500);
        let bound = (6.5 * PI) * (6.5 * PI);
        let e = lowest_eigenpairs(&a, &m, Target::Below(bound), &EigenOptions::default()).unwrap();
        assert_eq!(e.values.len(), 7);
        for (j, v) in e.values.iter().enumerate() {
            let exact = (j as f64 * PI).powi(2);
            assert!((v - exact).abs() < 1e-3 * (1.0 + exact));
        }
    }

    #[test]
    fn vectors_are_mass_orthonormal() {
        let (a, m) = interval(400);
        let e = lowest_eigenpairs(&a, &m, Target::Count(4), &EigenOptions::default()).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let g = m.bilinear(&e.vectors[i], &e.vectors[j]);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-9);
            }
        }
    }
}
