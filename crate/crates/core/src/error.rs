use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid rational {0:?}")]
    BadRational(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("boundary has nonzero total mass {0}")]
    NonzeroTotalMass(String),
    #[error("boundary has a zero-mass atom")]
    ZeroAtom,
    #[error("duplicate boundary point {0:?}")]
    DuplicatePoint(Vec<f64>),
    #[error("chain must be canonical for this operation")]
    NotCanonical,
    #[error("chain boundary does not match the given boundary")]
    BoundaryMismatch,
    #[error("too many terminals: {n} > {max} (raise --max-terminals to override)")]
    TooManyTerminals { n: usize, max: usize },
    #[error("need at least two atoms, found {0}")]
    TooFewAtoms(usize),
    #[error("alpha must lie in (0, 1], got {0}")]
    BadAlpha(f64),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("infeasible component: terminal masses of a forest component do not cancel")]
    InfeasibleComponent,
    #[error("inadmissible perturbation point: {0}")]
    InadmissiblePoint(String),
    #[error("no distinguishing point between minimizers {0} and {1}")]
    NoDistinguishingPoint(usize, usize),
    #[error("instance too large for the grid oracle: {0}")]
    InstanceTooLarge(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Whether the error reflects a broken internal invariant rather than bad input.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Invariant(_) | Error::NoDistinguishingPoint(..))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
