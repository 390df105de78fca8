//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced while evaluating series, expressions, transformations,
/// and recursions.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    /// Gamma (or factorial) evaluated at a nonpositive integer.
    #[error("gamma pole at {0}")]
    GammaPole(String),

    /// Series diverges and has no usable analytic continuation
    /// (parametric excess is a nonpositive integer and the series does
    /// not terminate).
    #[error("divergent series: excess {0} admits no continuation")]
    DivergentSeries(String),

    /// A bottom parameter hits a nonpositive integer before the series
    /// terminates, so the terms are undefined.
    #[error("bottom parameter pole at term {0}")]
    BottomPole(usize),

    /// A three-term recursion coefficient vanished (or nearly vanished)
    /// at the requested point, so the walk cannot proceed there.
    #[error("recursion coefficient singular near {0}")]
    RecursionSingular(String),

    /// A bridge or closed form degenerates at this parameter point.
    #[error("degenerate case: {0}")]
    DegenerateCase(String),

    /// No closed-form seed is registered at the requested lattice point.
    #[error("no recursion seed at offsets ({0}, {1})")]
    SeedMissing(i64, i64),

    /// The family only walks forward; the requested index lies in the
    /// direction where every member of the family diverges.
    #[error("backward walk diverges: {0}")]
    BackwardDivergence(String),

    /// Division by an exact zero during expression evaluation.
    #[error("division by zero in {0}")]
    DivisionByZero(String),

    /// Expression references a symbol with no binding.
    #[error("unbound symbol {0}")]
    UnboundSymbol(String),

    /// Expression uses a special-function head with no evaluator attached.
    #[error("no evaluator for special head {0}")]
    NoSpecialEval(String),

    /// Parse failure with location diagnostics.
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    /// Catalog entry failed a structural consistency check at load time.
    #[error("catalog entry {id}: {msg}")]
    Catalog { id: String, msg: String },

    /// Admissible-sample search gave up after the attempt budget.
    #[error("sampling exhausted: {0}")]
    SamplingExhausted(String),

    /// Template matching failed.
    #[error("no catalog entry matches: {0}")]
    MatchFailed(String),

    /// Anything that should not happen with valid inputs.
    #[error("internal: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
