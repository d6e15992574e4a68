use num_complex::Complex64 as C64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    // numerics
    #[error(
        "quadrature did not converge within {budget} subdivisions (error estimate {estimate:e})"
    )]
    NonConvergence { budget: usize, estimate: f64 },
    #[error("integrand is not finite at s = {s}")]
    NonFiniteSample { s: C64 },
    #[error("difference step {step:e} below the precision floor {floor:e}")]
    StepUnderflow { step: f64, floor: f64 },
    #[error("step size collapsed to {h:e} at s = {s}")]
    StiffnessAbort { s: f64, h: f64 },
    #[error("state became non-finite at s = {s}")]
    NonFiniteState { s: f64 },

    // fields
    #[error("degenerate parameters: {0}")]
    DegenerateParams(String),
    #[error("field vector is zero")]
    ZeroField,
    #[error("asymptotic tail fit failed: {0}")]
    FitFailure(String),

    // dynamics
    #[error("field lies on the z-axis at s = {s}; polar angles undefined")]
    CoordinateSingularity { s: C64 },
    #[error("square-root branch of B^2 not anchored at s = {s}")]
    BranchAmbiguity { s: C64 },
    #[error("coupling c vanishes at s = {s}")]
    CouplingZero { s: C64 },
    #[error("cutoff {cutoff} too small: truncation bound {bound:e} exceeds {allowed:e}")]
    CutoffTooSmall {
        cutoff: f64,
        bound: f64,
        allowed: f64,
    },

    // stokes
    #[error("square-root branch jump detected near s = {s}")]
    BranchJumpDetected { s: C64 },
    #[error("line tracing stalled near s = {s}")]
    StallDetected { s: C64 },
    #[error("no Stokes line links Re s = -inf to Re s = +inf")]
    NoLinkingLine,
    #[error("path is not canonical between points {index} and {next}", next = index + 1)]
    NonCanonicalPath { index: usize },
    #[error("path passes within the margin of a turning point at s = {s}")]
    NearTurningPoint { s: C64 },
    #[error("no canonical path found: {0}")]
    NoCanonicalPathFound(String),
    #[error("evaluation too close to a singular point s = {s}")]
    NearSingularity { s: C64 },

    // adiabatic
    #[error("asymptotic vectors B0 and B1 are parallel on the {side} side")]
    ParallelAsymptoticVectors { side: &'static str },
    #[error("no prefactor formula for model family '{0}'")]
    UnknownFamily(String),
    #[error("fit window violates the exponential-suppression regime: {0}")]
    RegimeViolation(String),
    #[error("geometric term of the frequency is identically zero for a planar field")]
    GeometricTermZero,
    #[error("edge integrand decays too slowly: {0}")]
    TailDivergence(String),
    #[error("i/o: {0}")]
    Io(String),

    // cli
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid value for '{field}': {message}")]
    Validation { field: String, message: String },
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
