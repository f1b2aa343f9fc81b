use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid algebra: {0}")]
    InvalidAlgebra(String),
    #[error("algebra mismatch: {0}")]
    AlgebraMismatch(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("element is not in the algebra (residual {residual:.3e})")]
    NotInAlgebra { residual: f64 },
    #[error("range is not closed: smallest nonzero singular value squared {gap:.3e} is below {tol:.3e}")]
    NotClosedRange { gap: f64, tol: f64 },
    #[error("operator is not idempotent: defect {defect:.3e}")]
    NotIdempotent { defect: f64 },
    #[error("operator is not a projection: {0}")]
    NotProjection(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("evaluation point {t} is not a grid node")]
    OffGrid { t: f64 },
    #[error("sobolev exponent {s} is out of range: {reason}")]
    SobolevExponent { s: f64, reason: String },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("double is not injective: smallest singular value {sigma:.3e}")]
    NotInjective { sigma: f64 },
    #[error("contour pinched: boundary symbol has an eigenvalue with real part {min_abs:.3e}")]
    ContourPinched { min_abs: f64 },
    #[error("quadrature did not converge: estimated error {error:.3e}")]
    QuadratureFailed { error: f64 },
    #[error("linear algebra failure: {0}")]
    Numerical(String),
    #[error("{0}")]
    Unsupported(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
