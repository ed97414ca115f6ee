use thiserror::Error;

pub type Result<T> = std::result::Result<T, DimerError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DimerError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("state is not normalized: |psi1|^2 + |psi2|^2 = {norm_sq}")]
    Unnormalized { norm_sq: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("imbalance polynomial drops degree (gamma = 0, leading coefficient vanishes)")]
    DegreeDrop,

    #[error("modes are decoupled (J = 0); relative phase is undetermined")]
    Decoupled,

    #[error("root s = {s} does not reconstruct an eigenstate (residual {residual:e})")]
    ReconstructionFailed { s: f64, residual: f64 },
}
