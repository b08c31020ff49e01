use thiserror::Error;

/// Failures raised while building or evaluating Green's functions.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("point {value} lies outside the domain [{lo}, {hi}]")]
    OutOfDomain { value: f64, lo: f64, hi: f64 },

    #[error("integrator failed at t = {t}: {reason}")]
    Integrator { t: f64, reason: String },

    #[error("quadrature did not converge on [{lo}, {hi}]: error estimate {estimate:e} exceeds {tolerance:e}")]
    Quadrature {
        lo: f64,
        hi: f64,
        estimate: f64,
        tolerance: f64,
    },

    /// The two-point problem has non-trivial homogeneous solutions, so `g_M` does not exist.
    #[error("resonant problem: uniqueness determinant {det:e} is below {threshold:e}")]
    ResonantProblem { det: f64, threshold: f64 },

    /// `det(I - A)` vanishes, so the non-local problem is not uniquely solvable.
    #[error("spectral obstruction: det(I - A) = {det:e} is below {threshold:e}")]
    SpectralObstruction { det: f64, threshold: f64 },

    #[error("singular matrix")]
    SingularMatrix,

    #[error("expression error at column {column}: {message}")]
    Expression { column: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
