use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid bases n={n}, m={m}: need 2 <= m < n")]
    InvalidBase { n: u32, m: u32 },
    #[error("digit ({i}, {j}) is outside the {n}x{m} grid")]
    DigitOutOfRange { i: u32, j: u32, n: u32, m: u32 },
    #[error("digit set is empty")]
    EmptyDigitSet,
    #[error("invalid probability vector: {0}")]
    InvalidWeights(String),
    #[error("invalid hole: {0}")]
    InvalidHole(String),
    #[error("invalid point: {0}")]
    InvalidPoint(String),
    #[error("rectangle prefix is incompatible with the digit set at index {index}")]
    IncompatiblePrefix { index: usize },
    #[error("{what} needs {needed} units of work, budget is {limit}")]
    BudgetExceeded {
        what: &'static str,
        needed: u128,
        limit: u64,
    },
    #[error("depth {depth} too large: {cells} cells exceed the budget of {limit}")]
    DepthTooLarge { depth: usize, cells: u128, limit: u64 },
    #[error("invalid depth: {0}")]
    InvalidDepth(String),
    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("symbol {symbol} has zero weight")]
    ZeroWeightSymbol { symbol: usize },
    #[error("survivor system is not topologically mixing")]
    NotMixing,
    #[error("survivor set is empty")]
    EmptySurvivor,
    #[error("negative survivor dimension {0}")]
    NegativeDimension(f64),
    #[error("optimizer failed: {0}")]
    OptimizerFailed(String),
    #[error("no lower bound: the projected hole is strictly between empty and full")]
    NotApplicable,
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
}
