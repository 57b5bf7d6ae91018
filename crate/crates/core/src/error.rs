use thiserror::Error;

pub type Result<T, E = M1Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum M1Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-realizable state: {0}")]
    NotRealizable(String),

    #[error("realizability violated at node {node} ({context}): psi0 = {psi0:e}, |psi1| = {psi1_norm:e}")]
    RealizabilityViolation {
        node: usize,
        context: String,
        psi0: f64,
        psi1_norm: f64,
    },

    #[error("time step {dt:e} violates the CFL condition at node {node}; largest admissible step is {max_dt:e}")]
    CflViolation { dt: f64, max_dt: f64, node: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("steady iteration diverged at step {step}: residual {residual:e} exceeds {limit:e}")]
    Diverged { step: usize, residual: f64, limit: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
