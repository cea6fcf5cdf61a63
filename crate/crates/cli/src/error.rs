use qgraph::coupling::CouplingError;
use qgraph::graph::GraphError;
use qgraph::linalg::LinalgError;
use qgraph::manifold::ManifoldError;
use qgraph::resonance::ResonanceError;
use qgraph::spectral::SpectralError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NO_CONVERGENCE: i32 = 3;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Resonance(#[from] ResonanceError),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("{0} inequality violation(s)")]
    Violations(usize),
}

impl CliError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.is_parse() {
            EXIT_DATA
        } else if self.is_no_convergence() {
            EXIT_NO_CONVERGENCE
        } else {
            EXIT_VALIDATION
        }
    }

    fn is_parse(&self) -> bool {
        let graph = match self {
            CliError::Graph(g) => Some(g),
            CliError::Spectral(SpectralError::Graph(g)) => Some(g),
            CliError::Resonance(ResonanceError::Graph(g)) => Some(g),
            _ => None,
        };
        matches!(graph, Some(GraphError::Parse { .. }))
    }

    fn is_no_convergence(&self) -> bool {
        match self {
            CliError::Spectral(e) => spectral_stalled(e),
            CliError::Resonance(e) => matches!(
                e,
                ResonanceError::NoConvergence { .. }
                    | ResonanceError::TrackingFailed { .. }
                    | ResonanceError::Linalg(LinalgError::NoConvergence { .. })
            ),
            CliError::Manifold(e) => manifold_stalled(e),
            CliError::Coupling(e) => coupling_stalled(e),
            _ => false,
        }
    }
}

fn spectral_stalled(e: &SpectralError) -> bool {
    matches!(e, SpectralError::Linalg(LinalgError::NoConvergence { .. }))
}

fn manifold_stalled(e: &ManifoldError) -> bool {
    matches!(e, ManifoldError::Linalg(LinalgError::NoConvergence { .. }))
}

fn coupling_stalled(e: &CouplingError) -> bool {
    match e {
        CouplingError::NoConvergence { .. } => true,
        CouplingError::Linalg(LinalgError::NoConvergence { .. }) => true,
        CouplingError::Manifold(m) => manifold_stalled(m),
        CouplingError::Spectral(s) => spectral_stalled(s),
        CouplingError::StudyAborted { source, .. } => coupling_stalled(source),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes() {
        let parse = GraphError::Parse {
            line: 1,
            column: 2,
            message: "x".into(),
        };
        assert_eq!(CliError::from(parse).exit_code(), EXIT_DATA);
        let stalled = CouplingError::NoConvergence { iterations: 3 };
        assert_eq!(CliError::from(stalled).exit_code(), EXIT_NO_CONVERGENCE);
        assert_eq!(CliError::Violations(1).exit_code(), EXIT_VALIDATION);
    }
}
