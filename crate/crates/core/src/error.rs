use thiserror::Error;

/// Errors raised by model construction, simulation and analysis.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} = {value} is outside its domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("phase map rejected: {0}")]
    InvalidPhaseMap(String),

    #[error("oscillator {oscillator} couples to itself (strength {strength})")]
    SelfCoupling { oscillator: usize, strength: f64 },

    #[error("in-strengths of oscillator {oscillator} sum to {sum}, expected {expected}")]
    Normalization {
        oscillator: usize,
        sum: f64,
        expected: f64,
    },

    #[error("oscillator {oscillator} has no presynaptic neighbours")]
    IsolatedOscillator { oscillator: usize },

    #[error("index {index} out of range for a network of {n} oscillators")]
    Index { index: usize, n: usize },

    #[error("hypothesis not met: {0}")]
    Hypothesis(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("internal consistency violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
