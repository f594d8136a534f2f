use thiserror::Error;

/// Failures raised by the numerical pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("shape mismatch in {what}: expected {expected}, found {found}")]
    ShapeMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("potential evaluated outside its domain at rho = {value:e} (guard {guard:e})")]
    Domain { value: f64, guard: f64 },
    #[error("Newton did not converge at step {step} after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        step: usize,
        iterations: usize,
        residual: f64,
    },
    #[error("barrier breach at step {step}: damped Newton iterate left (0,1) at minimal damping")]
    BarrierBreach { step: usize },
    #[error("mu-step diagonal lost positivity at step {step} (min diagonal {min_diag:e}); time step too large")]
    DiagonalLoss { step: usize, min_diag: f64 },
    #[error("singular matrix: zero pivot in column {column}")]
    SingularJacobian { column: usize },
    #[error("linear solve residual {residual:e} exceeds tolerance")]
    LinearSolve { residual: f64 },
    #[error("projection stalled after {sweeps} sweeps (box violation {box_violation:e}, rate excess {rate_excess:e})")]
    ProjectionStall {
        sweeps: usize,
        box_violation: f64,
        rate_excess: f64,
    },
    #[error("line search failed at iteration {iteration}: no step above {min_step:e} satisfies Armijo")]
    LineSearchFail { iteration: usize, min_step: f64 },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
}

pub type Result<T> = std::result::Result<T, SolverError>;
