use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("numerical breakdown: {0}")]
    Numerical(String),
    #[error("degenerate denominator: the fractional objective denominator is zero at every iterate")]
    DegenerateDenominator,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
