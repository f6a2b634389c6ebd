use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("map has a pole at {0}")]
    PoleAtPoint(Complex64),
    #[error("layer cycle must contain at least one map")]
    EmptyCycle,
    #[error("composite map is the identity; no Denjoy-Wolff point")]
    IdentityCycle,
    #[error("iteration did not converge: {0}")]
    NonConvergent(String),
    #[error("parameter {name} = {value} outside {range}")]
    ParamOutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("layer {index} not admissible: {reason}")]
    LayerNotAdmissible { index: usize, reason: String },
    #[error("map value at the origin is {0}, expected 0")]
    NonzeroAtOrigin(Complex64),
    #[error("unsupported map variant for this operation: {0}")]
    UnsupportedVariant(&'static str),
    #[error("map is not a Schur function (sup estimate {0})")]
    NotSchur(f64),
    #[error("boundary condition failed: |phi(1) - 1| = {0}")]
    BoundaryConditionFailed(f64),
    #[error("matrix is not normal (residual {0:.3e})")]
    NotNormal(f64),
    #[error("eigensolver failure: {0}")]
    SolverFailure(String),
    #[error("function undefined at eigenvalue {0}")]
    FunctionUndefinedAtEigenvalue(Complex64),
    #[error("resolvent point {0} lies on the spectrum")]
    SpectrumHit(Complex64),
    #[error("ill-conditioned matrix (condition estimate {0:.3e})")]
    IllConditioned(f64),
    #[error("contour passes within {distance:.3e} of eigenvalue {eigenvalue}")]
    ContourTooClose {
        eigenvalue: Complex64,
        distance: f64,
    },
    #[error("quadrature did not converge with {nodes} nodes (last change {change:.3e})")]
    NoConvergence { nodes: usize, change: f64 },
    #[error("spectral radius {0} exceeds one")]
    SpectralRadiusExceedsOne(f64),
    #[error("power norm {norm:.3e} overflowed at step {step}")]
    Overflow { step: usize, norm: f64 },
    #[error("incompatible dimensions: {0}")]
    IncompatibleDims(String),
    #[error("operator is not power bounded (estimate {0:.3e})")]
    NotPowerBounded(f64),
    #[error("contour does not isolate the eigenvalue 1: {0} is enclosed")]
    IsolationFailed(Complex64),
    #[error("conjugator is singular or ill-conditioned (condition estimate {0:.3e})")]
    SingularConjugator(f64),
    #[error("iteration mode {0} not valid for this operation")]
    WrongMode(&'static str),
    #[error("matrix entries must be finite")]
    NonFinite,
}
