use thiserror::Error;

/// Failures surfaced by the harness, each mapped to a stable exit code.
#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] ilaplace::Error),

    #[error("invalid argument: {0}")]
    Usage(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_MODEL: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_TOLERANCE: i32 = 4;

impl BenchError {
    /// 2 for model or parameter errors, 3 for numerical failures, 4 when a
    /// quadrature tolerance cannot be met, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        use ilaplace::Error as E;
        match self {
            BenchError::Core(e) => match e.root() {
                E::UnknownModel(_)
                | E::InvalidParameter(_)
                | E::DimensionMismatch { .. }
                | E::DimensionTooLarge { .. } => EXIT_MODEL,
                E::ToleranceNotMet { .. } => EXIT_TOLERANCE,
                _ => EXIT_NUMERICAL,
            },
            BenchError::Usage(_) => EXIT_MODEL,
            BenchError::Io(_) | BenchError::Csv(_) | BenchError::Json(_) => EXIT_IO,
        }
    }
}

pub type BenchResult<T> = std::result::Result<T, BenchError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let code = |e: ilaplace::Error| BenchError::from(e).exit_code();
        assert_eq!(code(ilaplace::Error::UnknownModel("x".into())), 2);
        assert_eq!(
            code(ilaplace::Error::ToleranceNotMet { panels: 1, abs_err_est: 1.0 }.at_coordinate(3)),
            4
        );
        assert_eq!(code(ilaplace::Error::HessianNotPd { x: vec![] }), 3);
        assert_eq!(BenchError::Usage("x".into()).exit_code(), 2);
    }
}
