use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("step distribution has no atoms")]
    EmptyDistribution,
    #[error("atom ({x}, {y}) has non-positive mass {mass}")]
    NonPositiveMass { x: i32, y: i32, mass: f64 },
    #[error("asymmetric step law: atom ({x}, {y}) has no mirror atom of equal mass")]
    Asymmetric { x: i32, y: i32 },
    #[error("masses sum to {0}, expected 1")]
    MassSum(f64),
    #[error("degenerate covariance (det = {0}); the walk is confined to a line")]
    DegenerateCovariance(f64),
    #[error("path of length {n} exceeds the brute-force limit {max}")]
    PathTooLong { n: usize, max: usize },
    #[error("malformed block: {0}")]
    MalformedBlock(String),
    #[error("kernel radius {0} is below mollifier validity regime (r >= 1)")]
    BelowMollifierRegime(f64),
    #[error("kernel support needs {required} cells, budget is {budget}")]
    KernelTooLarge { required: usize, budget: usize },
    #[error("function is identically zero")]
    ZeroFunction,
    #[error("shooting bracket failure: Q(0) = {lo} classified {lo_kind}, Q(0) = {hi} classified {hi_kind}")]
    ShootingBracket {
        lo: f64,
        hi: f64,
        lo_kind: &'static str,
        hi_kind: &'static str,
    },
    #[error("enumeration budget exceeded: {count} paths > {budget}")]
    EnumerationBudget { count: u128, budget: u128 },
    #[error("theorem hypotheses violated: {0}")]
    HypothesesViolated(String),
    #[error("invalid scaling schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
