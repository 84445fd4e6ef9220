use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty model: at least one Bernoulli component is required")]
    EmptyModel,

    #[error("invalid parameter p[{index}] = {value} (must lie in [0, 1])")]
    InvalidParameter { index: usize, value: f64 },

    #[error("parameter p[{index}] = {value} is outside the interior band [{margin}, 1 - {margin}]")]
    NotInterior { index: usize, value: f64, margin: f64 },

    #[error("index {index} out of range for {len} components")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid pair ({0}, {0}): indices must differ")]
    InvalidPair(usize),

    #[error("slope magnitude at index {index} is negative: {value}")]
    NegativeMagnitude { index: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{what} requires n {requirement}, got n = {n}")]
    UnsupportedSize { what: &'static str, requirement: &'static str, n: usize },

    #[error("enumeration guard: n = {n} exceeds the limit {limit}")]
    TooLargeToEnumerate { n: usize, limit: usize },

    #[error("t = {t} outside the path domain [{lo}, {hi}]")]
    OutsideDomain { t: f64, lo: f64, hi: f64 },

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("boundary degeneracy: mass f[{k}] vanishes while its derivatives do not")]
    BoundaryDegeneracy { k: usize },

    #[error("invalid entropy order q = {q}: {reason}")]
    InvalidOrder { q: f64, reason: &'static str },

    #[error("lemma hypothesis violated: {0}")]
    LemmaHypothesis(String),

    #[error("no sign change on bracket [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("invalid scan configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown checker id `{0}`")]
    UnknownChecker(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
