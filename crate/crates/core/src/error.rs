use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate parameterization at s = {s}: |x'(s)| = {speed:e}")]
    DegenerateParameterization { s: f64, speed: f64 },

    #[error("infeasible topology: {0}")]
    InfeasibleTopology(String),

    #[error("infeasible geometry: {0}")]
    InfeasibleGeometry(String),

    #[error("mesh quality: {0}")]
    MeshQuality(String),

    #[error("mesh integrity: {0}")]
    MeshIntegrity(String),

    #[error("linear solver: {0}")]
    Solver(String),

    #[error("geometry out of sync: {0}")]
    GeometrySync(String),

    #[error("line search exhausted {backtracks} backtracks without sufficient decrease")]
    LineSearch { backtracks: usize },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("missing required config key `{0}`")]
    MissingKey(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Failures that a line search may treat as a rejected trial step.
    pub fn is_recoverable_trial(&self) -> bool {
        matches!(
            self,
            Error::DegenerateParameterization { .. }
                | Error::InfeasibleTopology(_)
                | Error::InfeasibleGeometry(_)
                | Error::MeshQuality(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
