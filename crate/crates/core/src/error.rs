use thiserror::Error;

/// Why no block length satisfies the large-deviation inequality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoBlockReason {
    /// `inf φ ≤ exp(-δ)`, so `P(R_M ≥ 0) ≤ exp(-Mδ)` for every `M`.
    BoundImpossible,
    /// The search ran up to `M_max` without success.
    Exhausted,
}

impl NoBlockReason {
    pub fn as_str(self) -> &'static str {
        match self {
            NoBlockReason::BoundImpossible => "bound-impossible",
            NoBlockReason::Exhausted => "exhausted",
        }
    }
}

impl std::fmt::Display for NoBlockReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("weight {index} is not strictly positive ({value})")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("weights sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("alphabet sizes differ: {left} vs {right}")]
    AlphabetMismatch { left: usize, right: usize },
    #[error("parameter `{name}` out of range: {value}")]
    ParameterOutOfRange { name: &'static str, value: f64 },
    #[error("convolution needs {needed} atoms, cap is {cap}")]
    AtomBudgetExceeded { needed: usize, cap: usize },
    #[error("integer overflow computing {0}")]
    Overflow(&'static str),
    #[error("regression window ({n0}, {n1}) is degenerate for {len} counts")]
    DegenerateWindow { n0: usize, n1: usize, len: usize },
    #[error("tree spec mismatch: {0}")]
    SpecMismatch(String),
    #[error("truncation to depth {depth} needs {vertices} vertices, cap is {cap}")]
    DepthBudget { depth: usize, vertices: u64, cap: u64 },
    #[error("vertex at distance {distance} lies outside sampled depth {depth}")]
    OutOfDepth { distance: usize, depth: usize },
    #[error("no block length: {0}")]
    NoBlockLength(NoBlockReason),
    #[error("invalid vertex `{0}`")]
    InvalidVertex(String),
    #[error("invalid tree spec `{0}`")]
    InvalidTreeSpec(String),
    #[error("worker pool: {0}")]
    ThreadPool(String),
}

impl Error {
    pub(crate) fn out_of_range(name: &'static str, value: f64) -> Self {
        Error::ParameterOutOfRange { name, value }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
