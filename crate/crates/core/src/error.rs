use alloc::string::String;

use crate::linalg::C64;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch between {first} and {second}: {detail}")]
    DimensionMismatch {
        first: &'static str,
        second: &'static str,
        detail: String,
    },

    #[error("invalid argument `{what}`: {reason}")]
    InvalidArgument { what: &'static str, reason: String },

    /// The shifted matrix `-A^* + alpha E^*` could not be factored.
    #[error("shifted system is singular for shift {shift}")]
    SingularShift { shift: C64 },

    #[error("matrix `{what}` is numerically singular")]
    Singular { what: &'static str },

    #[error("small matrix T is numerically singular at dimension {dim}; consider basis truncation")]
    SingularT { dim: usize },

    #[error("T lost Hermitian symmetry at step {step}: relative drift {drift:e}")]
    HermitianDrift { step: usize, drift: f64 },

    #[error("spectrum point {point} coincides with the pole -{shift}")]
    PoleCollision { point: C64, shift: C64 },

    #[error("Hamiltonian has an eigenvalue on the imaginary axis: {value}")]
    ImaginaryAxisEigenvalue { value: C64 },

    #[error("no stabilizing solution: {0}")]
    NoStabilizingSolution(String),

    #[error("M_{step} is numerically singular in the dense subspace iteration")]
    IterationBreakdown { step: usize },

    #[error("shifts {first} and {second} coincide; the distinct-pole basis needs pairwise distinct shifts")]
    RepeatedShift { first: usize, second: usize },

    #[error("initial distance d = {d} is not below one; the convergence constant is undefined")]
    DistanceTooLarge { d: f64 },

    #[error("no admissible shift candidates: {0}")]
    NoCandidates(String),

    #[error("eigenvalue iteration did not converge for `{what}`")]
    NoConvergence { what: &'static str },

    #[error("problem is not stable: eigenvalue with real part {max_real}")]
    Unstable { max_real: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),
}
