use thiserror::Error;

pub type Result<T, E = CalfError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalfError {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("self-loop at node {0}")]
    SelfLoop(usize),

    #[error("node index {index} out of range for {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("latitude {0} outside [-90, 90]")]
    InvalidLatitude(f64),

    #[error("similarity component {0} has zero variance")]
    ZeroVariance(usize),

    #[error("requested {k} communities for only {n} nodes")]
    TooManyClusters { k: usize, n: usize },

    #[error("all nodes are isolated; mean degree is zero")]
    AllIsolated,

    #[error("logistic regression diverged (complete separation), coefficient norm {norm:.3e}")]
    Separation { norm: f64 },

    #[error("chains have zero within-chain variance")]
    ConstantChains,

    #[error("no draws or dyads available")]
    Empty,

    #[error("label vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),

    #[error("Cramér's V needs at least two levels on each side")]
    SingleLevel,

    #[error("eigendecomposition did not converge")]
    EigenFailure,
}
