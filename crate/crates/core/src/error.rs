use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid captures only {captured:.6} of the pulse norm squared; widen the grid")]
    SupportTruncated { captured: f64 },

    #[error("superposition coefficients violate |c1*G1 + c2*G2|^2 = G1^2 + G2^2 (lhs {lhs:.6e}, rhs {rhs:.6e})")]
    NormConstraintViolated { lhs: f64, rhs: f64 },

    #[error("s = {s} is within tolerance of a pole (|det(sI - A)| = {det:.3e})")]
    PoleProximity { s: crate::C64, det: f64 },

    #[error("detunings differ by {difference:.3e}; the closed form needs equal qubit detunings")]
    DetuningMismatch { difference: f64 },

    #[error("closed-form branches disagree by {deviation:.3e}")]
    BranchMismatch { deviation: f64 },

    #[error("step too large: {reason}")]
    StepTooLarge { reason: String },

    #[error("trajectory ended at t = {t} before the emitted field decayed (|s4| = {residual:.3e} of peak)")]
    NotConverged { t: f64, residual: f64 },

    #[error("marginal mode couples to the input/output path (|C v| = {observability:.3e}, |w B| = {controllability:.3e})")]
    MarginalModeExposed {
        observability: f64,
        controllability: f64,
    },

    #[error("pulses are sampled on different grids")]
    GridMismatch,

    #[error("{0}")]
    Unsupported(String),
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
