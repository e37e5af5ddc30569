use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("invalid word: symbol {symbol} at position {position} is outside an alphabet of size {alphabet}")]
    InvalidWord {
        symbol: usize,
        position: usize,
        alphabet: usize,
    },
    #[error("empty word where a contraction is required")]
    EmptyWord,
    #[error("mixed number modes: {0}")]
    MixedMode(String),
    #[error("resource budget exceeded: {needed} items requested, budget is {budget}")]
    Budget { needed: u128, budget: u128 },
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("alphabet mismatch: measure has {measure} symbols, system has {system}")]
    AlphabetMismatch { measure: usize, system: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("cross-check failed: {0}")]
    CrossCheck(String),
    #[error("resolution guard violated: finest scale {finest:e} is below 4x truncation error {bound:e}{}", required_depth.map(|d| format!(" (use depth >= {d})")).unwrap_or_default())]
    Guard {
        finest: f64,
        bound: f64,
        required_depth: Option<usize>,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
