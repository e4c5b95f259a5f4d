use thiserror::Error;

/// Errors raised across the library. Variants are grouped by the subsystem
/// that produces them.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("half-dimension must be at least 1")]
    ZeroDimension,
    #[error("matrix is {rows}x{cols}; expected an even square matrix")]
    BadShape { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is singular or not finite")]
    Singular,
    #[error("matrix is too far from the symplectic group (defect {defect:e})")]
    FarFromGroup { defect: f64 },
    #[error("symplectic defect {defect:e} exceeds tolerance {tol:e}")]
    NotSymplectic { defect: f64, tol: f64 },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("no transverse perturbation found after {tries} tries")]
    TransversalityExhausted { tries: usize },

    #[error("torus matrix is not hyperbolic: trace {trace}, det {det}")]
    NotHyperbolic { trace: i64, det: i64 },
    #[error("operation requires a constant roof")]
    VariableRoof,
    #[error("roof function is not bounded away from zero (lower bound {lower})")]
    RoofNotPositive { lower: f64 },
    #[error("point is not periodic: residual {residual:e}")]
    NotPeriodic { residual: f64 },
    #[error("point is not on the periodic leaf")]
    OffLeaf,

    #[error("cocycle product overflowed at step {step}")]
    Overflow { step: usize },
    #[error("non-finite cocycle value along the orbit at step {step}")]
    NonFinite { step: usize },
    #[error("bump support meets its own orbit at n = {n} (distance {distance})")]
    OrbitSeparation { n: i64, distance: f64 },
    #[error("bump direction must lie on the rotation family")]
    BumpNotRotation,

    #[error("no spectral gap at index {index}: gap {gap:e} with standard error {std_error:e}")]
    NoSpectralGap { index: usize, gap: f64, std_error: f64 },

    #[error("holonomy increments are not Cauchy (ratio {ratio}, last increment {last:e})")]
    NotCauchy { ratio: f64, last: f64 },
    #[error("circle coordinate {t} is the undefined point of the unstable transport")]
    UndefinedLoopPoint { t: f64 },

    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
