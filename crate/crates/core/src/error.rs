use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown chart `{0}`")]
    UnknownChart(String),

    #[error("unknown system `{0}`")]
    UnknownSystem(String),

    #[error("unknown cost function `{0}` (expected `chordal` or `chordal-sq`)")]
    UnknownCost(String),

    #[error("coordinate {index} = {value} is outside the chart range")]
    Domain { index: usize, value: f64 },

    #[error("point {0:?} lies on the singular locus")]
    SingularPoint(Vec<f64>),

    #[error("implicit midpoint solve did not converge in {iterations} iterations (residual {residual:e})")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("integrator failed on {failed} of {total} samples")]
    TooManyFailures { failed: usize, total: usize },

    #[error("unsupported measure: {0}")]
    UnsupportedMeasure(String),

    #[error(
        "sinkhorn did not converge after {iterations} iterations (marginal defect {defect:e})"
    )]
    SinkhornNonConvergence { iterations: usize, defect: f64 },

    #[error("malformed data: {0}")]
    Format(String),
}

impl Error {
    /// Numeric failures, as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NewtonDivergence { .. }
                | Error::TooManyFailures { .. }
                | Error::SinkhornNonConvergence { .. }
        )
    }
}
