use thiserror::Error;

/// Errors raised anywhere in the solver stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("exponential-sum power {power} exceeds the confluence limit {limit}")]
    PowerOverflow { power: u32, limit: u32 },
    #[error("imaginary residue {imag:e} on real part {real:e}: conjugate pairing violated")]
    ImaginaryResidue { real: f64, imag: f64 },
    #[error("surplus model violates the non-subordinator assumption: {0}")]
    SubordinatorViolation(String),
    #[error("invalid phase-type representation: {0}")]
    InvalidPhaseType(String),
    #[error("invalid economics: {0}")]
    InvalidEconomics(String),
    #[error("Laplace exponent evaluated at a pole (eigenvalue of T) s = {re} + {im}i")]
    PoleAtEigenvalue { re: f64, im: f64 },
    #[error("roots of psi_{k}(s) = q are too close (min gap {min_gap:e})")]
    RepeatedRoots { k: usize, min_gap: f64 },
    #[error("psi_{k}(s) = q: expected {expected} roots with negative real part, found {found}")]
    RootCountMismatch { k: usize, expected: usize, found: usize },
    #[error("psi_{k}(s) = q: root residual {residual:e} above tolerance")]
    RootAccuracy { k: usize, residual: f64 },
    #[error("normalizer g(0) = {0:e} is degenerate")]
    DegenerateNormalizer(f64),
    #[error("bracketing failed: {0}")]
    BracketFailure(String),
    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),
    #[error("invalid simulation config: {0}")]
    InvalidSimConfig(String),
    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
