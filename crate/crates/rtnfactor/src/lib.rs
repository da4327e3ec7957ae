//! Orthogonal factor decomposition of periodic financial return data.
//!
//! Given a panel of normalized linear returns, a weight vector over periods,
//! and a periods-per-unit-time scale, [`decomp::decompose`] splits expected
//! return and risk into orthogonal factors:
//!
//! * `E`  — expected returns per unit time,
//! * `f0` — systemic risk, a variance floor shared by every portfolio,
//! * `F`  — a factor matrix whose first row is productive risk (the only
//!   direction whose changes move expected return) and whose remaining rows
//!   are the principal nonproductive risks,
//! * `e0`, `eF` — the affine law `e = e0 + eF·x` linking expected return to
//!   productive risk.
//!
//! The covariance of returns is recovered as `f0² + FᵀF`, so the factor
//! matrix drives everything downstream: variance breakdowns and per-portfolio
//! risk components ([`analysis`]), and minimum-variance / minimum-|y|
//! portfolio paths across the simplex ([`optimizer`]). [`ingest`] parses
//! adjusted-closing-price files and produces return panels and weight
//! systems.

// Index loops mirror the matrix algebra throughout the numerical kernels.
#![allow(clippy::needless_range_loop)]

pub mod analysis;
pub mod cli;
pub mod decomp;
pub mod ingest;
pub mod mat;
pub mod optimizer;

use thiserror::Error as ThisError;

/// Crate-wide error type. Variants map onto the CLI's exit codes:
/// everything except [`Error::Numerical`] is an input-validation failure.
#[derive(Debug, ThisError)]
pub enum Error {
    #[error("line {line}: expected {expected} fields, found {found}")]
    MalformedRow {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: {msg}")]
    BadField { line: usize, msg: String },
    #[error("price panel has no data rows")]
    EmptyPanel,
    #[error("dates not strictly increasing at line {line}")]
    NonIncreasingDates { line: usize },
    #[error("non-positive price {value} for {ticker} at line {line}")]
    NonPositivePrice {
        line: usize,
        ticker: String,
        value: f64,
    },
    #[error("duplicate ticker {0}")]
    DuplicateTicker(String),
    #[error("anchor date {0} not present in panel")]
    MissingAnchor(String),
    #[error("need at least two price rows to form returns")]
    TooFewRows,
    #[error("window of {wanted} rows exceeds the {available} available")]
    WindowTooLarge { wanted: usize, available: usize },
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("periods per unit time must be >= 1, got {0}")]
    InvalidRho(f64),
    #[error("unknown ticker {0}")]
    UnknownTicker(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid portfolio: {0}")]
    InvalidPortfolio(String),
    #[error("expected returns are constant; every portfolio is minimum-variance")]
    ConstantExpectedReturns,
    #[error("factor row count {k} outside valid range 2..={m}")]
    RowCountOutOfRange { k: usize, m: usize },
    #[error("invalid x-range: {0}")]
    InvalidRange(String),
    #[error("{0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// True when the error reflects bad input rather than an internal
    /// numerical failure.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Numerical(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
