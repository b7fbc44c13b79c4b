use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid strategy profile: {0}")]
    InvalidProfile(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("iteration budget of {sweeps} sweeps exhausted (last residual {residual:e})")]
    IterationBudget { sweeps: usize, residual: f64 },

    #[error("equilibrium candidate failed certification (max deviation gain {max_gain:e} > {tol:e})")]
    NotCertified { max_gain: f64, tol: f64 },

    #[error("profile space has {size:e} pure profiles, exceeding the enumeration budget {budget}")]
    BudgetExceeded { size: f64, budget: u64 },

    #[error("no penalty up to {m_cap} makes every equilibrium viable (missing safe action?)")]
    NoThreshold { m_cap: f64 },

    #[error("viability set has no safe-action certificate")]
    MissingSafeAction,

    #[error("no SEE found at this grid/tolerance: {0}")]
    NoSelection(String),

    #[error("shape check failed: {property} at {points:?}")]
    Shape { property: String, points: Vec<f64> },

    #[error("point lies on the boundary of the {0} range; no interior first-order condition applies")]
    Boundary(&'static str),

    #[error("degenerate second-order condition (d/de of the follower FOC = {0:e})")]
    DegenerateSoc(f64),

    #[error("containment violated: {0}")]
    Containment(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable tag used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidModel(_) => "invalid_model",
            Error::InvalidProfile(_) => "invalid_profile",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::IterationBudget { .. } => "iteration_budget",
            Error::NotCertified { .. } => "not_certified",
            Error::BudgetExceeded { .. } => "budget_exceeded",
            Error::NoThreshold { .. } => "no_threshold",
            Error::MissingSafeAction => "missing_safe_action",
            Error::NoSelection(_) => "no_selection",
            Error::Shape { .. } => "shape_check",
            Error::Boundary(_) => "boundary",
            Error::DegenerateSoc(_) => "degenerate_soc",
            Error::Containment(_) => "containment",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}
