use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not symmetric at ({row}, {col}), asymmetry {gap:e}")]
    NotSymmetric { row: usize, col: usize, gap: f64 },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("gain for subsystem {index} has shape {got:?}, expected {expected:?}")]
    GainShape {
        index: usize,
        got: (usize, usize),
        expected: (usize, usize),
    },

    #[error("storage matrix of subsystem {index} is numerically singular (min eigenvalue {min_eig:e})")]
    SingularStorage { index: usize, min_eig: f64 },

    #[error("system is not asymptotically stable (spectral abscissa {0:e})")]
    Unstable(f64),

    #[error("subsystem {index}: no admissible random draw in {tries} tries")]
    ResampleExhausted { index: usize, tries: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("problem file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
