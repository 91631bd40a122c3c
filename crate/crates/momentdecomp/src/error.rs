//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while building models, compiling them to
/// joints, or evaluating moments on them.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// A variable name was not found in the joint or model.
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    /// Conditioning on an event with zero marginal probability.
    #[error("conditioning on zero-probability prefix {0:?}")]
    ZeroProbabilityEvent(Vec<f64>),

    /// An operation that needs `expected` target variables was called on a
    /// joint with a different target arity.
    #[error("operation requires {expected} target variable(s), joint has {actual}")]
    Arity { expected: usize, actual: usize },

    /// Atom probabilities do not sum close enough to one to normalize.
    #[error("probability mass sums to {sum}, too far from 1 to normalize")]
    InvalidMass { sum: f64 },

    /// Malformed input text (model JSON or a parameter expression).
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },

    /// A parameter expression references a variable that is not defined at
    /// that point of the chain (forward or unknown reference).
    #[error("unknown variable reference `{name}` in {context}")]
    UnknownVariableReference { name: String, context: String },

    /// A structurally invalid distribution or leaf specification.
    #[error("invalid distribution spec: {0}")]
    InvalidDistributionSpec(String),

    /// Division by zero while evaluating a parameter expression.
    #[error("division by zero while evaluating `{0}`")]
    DivisionByZero(String),

    /// A parameter expression produced a non-finite value.
    #[error("non-finite result while evaluating `{0}`")]
    NonFiniteResult(String),

    /// A parameter evaluated outside [0,1], or a distribution's probabilities
    /// do not sum to one at some reachable prefix.
    #[error("invalid probability: {0}")]
    InvalidProbability(String),

    /// Compilation would enumerate more atoms than the configured cap.
    #[error("support explosion: enumeration exceeds {cap} atoms")]
    SupportExplosion { cap: usize },

    /// A Monte Carlo term needs a conditional-moment oracle that the sampler
    /// chain does not provide.
    #[error("moment oracle undefined: {0}")]
    OracleUndefined(String),
}
