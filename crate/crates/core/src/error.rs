//! Error type shared by every module of the crate.

use thiserror::Error;

/// Everything that can go wrong while evaluating a model or advancing a state.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A vector or matrix had the wrong length for the model it was passed to.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension {
        /// Length required by the model.
        expected: usize,
        /// Length that was supplied.
        got: usize,
    },

    /// A model or one of its derivatives produced NaN or ±∞.
    #[error("non-finite derivative")]
    NonFiniteDerivative,

    /// A state became NaN or ±∞ during integration.
    #[error("non-finite state")]
    NonFiniteState,

    /// Derivative tensors are only available up to fourth total order.
    #[error("derivative order {0} is not supported (maximum is 4)")]
    UnsupportedOrder(usize),

    /// Newton's method hit its iteration cap before the residual met the tolerance.
    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        /// Number of Newton updates performed.
        iterations: usize,
        /// ∞-norm of the last residual.
        residual: f64,
    },

    /// The Newton Jacobian has a pivot below the relative singularity threshold.
    #[error("singular Jacobian")]
    SingularJacobian,

    /// The constraint Jacobian lost rank, so the multiplier is not unique.
    #[error("constraint Jacobian is rank deficient")]
    ConstraintDegeneracy,

    /// The velocity Hessian ∂²L/∂q̇² is singular or too badly conditioned to invert.
    #[error("mass matrix ∂²L/∂q̇² is singular or ill-conditioned")]
    SingularMassMatrix,

    /// The operation needs a model class that was not supplied (for example a quadratic Lagrangian).
    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    /// A parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The requested closed form does not exist for this parameter regime.
    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    /// A step of a trajectory failed; `source` holds the underlying cause.
    #[error("step {step} failed: {source}")]
    StepFailed {
        /// Zero-based index of the step that failed.
        step: usize,
        /// Underlying cause.
        #[source]
        source: Box<Error>,
    },
}

/// Crate-wide result alias.
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Returns `Dimension` unless `got == expected`.
pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
