use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("field does not match grid: expected {expected} values, got {got}")]
    FieldSize { expected: usize, got: usize },

    #[error("field is not zero on the boundary at node {node} (value {value})")]
    BoundaryNotZero { node: usize, value: f64 },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("component counts differ: {0} vs {1}")]
    ComponentMismatch(usize, usize),

    #[error("operation requires a nonzero field")]
    ZeroField,

    #[error("step size underflow at t = {t} (h = {h})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("no sign change found before the safety horizon t = {horizon}")]
    NoSignChange { horizon: f64 },

    #[error("descent stalled at iteration {iteration}: quotient {quotient}, gradient norm {gradient_norm}")]
    Stall {
        iteration: usize,
        quotient: f64,
        gradient_norm: f64,
    },

    #[error("kernel cache: {0}")]
    KernelCache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn require_p(p: f64) -> Result<()> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter {
            name: "p",
            reason: format!("must satisfy p > 1, got {p}"),
        });
    }
    Ok(())
}
