use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degree p = {p} is not supported here (need {requirement})")]
    InvalidDegree { p: usize, requirement: &'static str },

    #[error("mesh with N = {0} elements is too coarse (need N >= 2)")]
    InvalidMesh(usize),

    #[error("basis index {index} out of range (dimension {dim})")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("point {0} lies outside [0, 1]")]
    PointOutOfDomain(f64),

    #[error("matrix is singular")]
    Singular,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("root finder did not converge for {family} with {points} points")]
    NonConvergence { family: &'static str, points: usize },

    #[error("rule {label} integrates degree {exactness} exactly, need at least {required}")]
    InsufficientExactness {
        label: String,
        exactness: usize,
        required: usize,
    },

    #[error("degenerate blend: both rules give the same mass entries (denominator {denominator:e})")]
    DegenerateBlend { denominator: f64 },

    #[error("rules are not pairwise distinct")]
    RulesNotDistinct,

    #[error("mass matrix is not positive definite")]
    IndefiniteMass,

    #[error("eigenfunction sign cannot be fixed: b(u, u_h) = 0 for mode {0}")]
    DegenerateSign(usize),

    #[error("denominator {0:e} of the Rayleigh quotient is too small (stopping band)")]
    StoppingBand(f64),

    #[error("wave number {0} lies outside (0, pi]")]
    InvalidWaveNumber(f64),

    #[error("all samples are below the noise floor")]
    BelowNoise,

    #[error("problem size {size} exceeds the configured cap {cap}")]
    SizeCap { size: usize, cap: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
