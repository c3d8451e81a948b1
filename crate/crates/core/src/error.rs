use thiserror::Error;

/// Errors raised by the solvers, functionals and certifiers.
#[derive(Debug, Error)]
pub enum RelaxError {
    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("infeasible dual witness: feasibility margin {margin:.3e} is below the admissible floor")]
    InfeasibleWitness { margin: f64 },

    #[error("incomplete trajectory: {0}")]
    IncompleteTrajectory(String),

    #[error("missing derivatives: {0}")]
    MissingDerivatives(String),

    #[error("Legendre transform unbounded: maximiser still on the search boundary after {expansions} expansions")]
    UnboundedTransform { expansions: usize },

    #[error("domain violation: {0}")]
    DomainViolation(String),

    #[error("CFL violation: dt = {dt:.3e} exceeds the stability bound {bound:.3e}")]
    CflViolation { dt: f64, bound: f64 },

    #[error("positivity lost after {rejections} step rejections (min value {min_value:.3e})")]
    PositivityLoss { rejections: usize, min_value: f64 },

    #[error("pair is not admissible: continuity residual {residual:.3e} exceeds {bound:.3e}")]
    NotAdmissible { residual: f64, bound: f64 },

    #[error("unsupported form degree k = {k} in dimension d = {d}")]
    UnsupportedDegree { k: usize, d: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, RelaxError>;

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(RelaxError::NumericFailure(format!(
            "{what}: non-finite value {} at index {pos}",
            values[pos]
        )));
    }
    Ok(())
}
