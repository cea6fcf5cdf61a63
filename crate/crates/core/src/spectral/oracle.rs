use super::{Method, SpectralError, SpectralResult};
use crate::graph::{fd_discretize, fd_discretize_counts, MetricGraph};
use crate::linalg::{lowest_eigenpairs, EigenOptions, Target};

/// Settings for the extrapolated finite-element oracle.
#[derive(Clone, Debug)]
pub struct OracleOptions {
    /// Coarsest grid step.
    pub h0: f64,
    /// Number of grids; cell counts double from one to the next.
    pub levels: usize,
    /// Relative gap below which extrapolated values are merged.
    pub group_rel: f64,
    pub eigen: EigenOptions,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            h0: 1.0 / 64.0,
            levels: 3,
            group_rel: 1e-7,
            eigen: EigenOptions::default(),
        }
    }
}

/// Eigenvalues in `[0, Λ]` from P1 discretizations on nested grids combined by
/// Romberg extrapolation in h² (the error expansion is even in h on uniform
/// per-edge grids).
pub fn fd_oracle_eigenvalues(
    graph: &MetricGraph,
    lambda_max: f64,
    opts: &OracleOptions,
) -> Result<SpectralResult, SpectralError> {
    if opts.levels == 0 {
        return Err(SpectralError::InvalidParameter(
            "at least one grid level required".into(),
        ));
    }
    let base = fd_discretize(graph, opts.h0)?.dofs.counts();
    let counts_at = |i: usize| -> Vec<usize> { base.iter().map(|&c| c << i).collect() };
    let finest = fd_discretize_counts(graph, &counts_at(opts.levels - 1))?;
    let margin = 1e-3 * (1.0 + lambda_max);
    let top = lowest_eigenpairs(
        &finest.stiffness,
        &finest.mass,
        Target::Below(lambda_max + margin),
        &opts.eigen,
    )?;
    let n = top.values.len();
    let mut table: Vec<Vec<f64>> = Vec::with_capacity(opts.levels);
    for i in 0..opts.levels - 1 {
        let sys = fd_discretize_counts(graph, &counts_at(i))?;
        let e = lowest_eigenpairs(&sys.stiffness, &sys.mass, Target::Count(n), &opts.eigen)?;
        if e.values.len() != n {
            return Err(SpectralError::OracleInconsistent(format!(
                "level {i} returned {} of {n} values",
                e.values.len()
            )));
        }
        table.push(e.values);
    }
    table.push(top.values);
    let extrapolated: Vec<f64> = (0..n)
        .map(|j| romberg(&table.iter().map(|row| row[j]).collect::<Vec<_>>()))
        .collect();
    let mut values: Vec<f64> = extrapolated
        .into_iter()
        .filter(|&v| v <= lambda_max)
        .collect();
    values.sort_by(f64::total_cmp);
    if let Some(v) = values.first_mut() {
        if v.abs() < 1e-9 {
            *v = 0.0;
        }
    }
    Ok(SpectralResult::new(
        SpectralResult::group(&values, opts.group_rel),
        Method::FdOracle,
    ))
}

/// Romberg extrapolation of values on grids with h halved each time, error in powers of h².
pub(crate) fn romberg(values: &[f64]) -> f64 {
    romberg_from(values, 2)
}

/// Romberg extrapolation for an error expansion in h^p, h^{p+2}, … over grids with h halved each time.
pub(crate) fn romberg_from<T>(values: &[T], p: i32) -> T
where
    T: Copy
        + std::ops::Add<Output = T>
        + std::ops::Sub<Output = T>
        + std::ops::Div<f64, Output = T>,
{
    let mut row = values.to_vec();
    let mut factor = 2f64.powi(p);
    while row.len() > 1 {
        row = row
            .windows(2)
            .map(|p| p[1] + (p[1] - p[0]) / (factor - 1.0))
            .collect();
        factor *= 4.0;
    }
    row[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn romberg_kills_even_terms() {
        let f = |h: f64| 2.0 + 0.3 * h * h - 1.1 * h.powi(4);
        let v: Vec<f64> = (0..3).map(|i| f(0.1 / 2f64.powi(i))).collect();
        assert!((romberg(&v) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn loop_oracle() {
        let r = fd_oracle_eigenvalues(&MetricGraph::unit_loop(), 50.0, &OracleOptions::default())
            .unwrap();
        assert_eq!(r.eigenvalues.len(), 2);
        assert_eq!(r.eigenvalues[1].multiplicity, 2);
        assert!((r.eigenvalues[1].value - 4.0 * PI * PI).abs() < 1e-8);
    }
}
