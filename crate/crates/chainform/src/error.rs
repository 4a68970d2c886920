use thiserror::Error;

/// Crate-wide error type; variants say which contract was broken.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("index out of range: {detail}")]
    IndexOutOfRange { detail: String },
    #[error("link ({retailer}, {supplier}) already present")]
    DuplicateLink { retailer: usize, supplier: usize },
    #[error("link ({retailer}, {supplier}) not present")]
    MissingLink { retailer: usize, supplier: usize },
    #[error("negative price w[{supplier}] = {price}")]
    NegativePrice { supplier: usize, price: f64 },
    #[error("need at least {needed} retailers, have {available}")]
    InsufficientRetailers { needed: usize, available: usize },
    #[error("need at least {needed} suppliers, have {available}")]
    InsufficientSuppliers { needed: usize, available: usize },
    #[error("exhaustive enumeration is limited to m <= {limit} suppliers, got m = {m}")]
    SizeLimit { m: usize, limit: usize },
    #[error("parameter shape does not fit this analysis: {detail}")]
    ShapeMismatch { detail: String },
    #[error("planner optimum needs {k_opt} active suppliers but only {available} fit the instance")]
    BoundaryOptimum { k_opt: usize, available: usize },
    #[error("cannot moment-match supplier {supplier} with a {family} distribution: {detail}")]
    InfeasibleMoments {
        supplier: usize,
        family: String,
        detail: String,
    },
    #[error("invalid parameters: {detail}")]
    InvalidParams { detail: String },
}

impl Error {
    /// Exit-code class for command-line use: size caps are reported apart
    /// from plain validation failures.
    pub fn is_size_limit(&self) -> bool {
        matches!(self, Error::SizeLimit { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
