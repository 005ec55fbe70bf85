//! Crate-wide error type.
//!
//! Every fallible operation in this crate returns [`Error`]. Variants are
//! grouped roughly by the module that raises them; the CLI maps parse/input
//! problems to exit code 2 and failed checks (non-convergence, failed
//! separation checks) to exit code 1.

use crate::boost::BoostTrace;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// All errors raised by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A distribution point has no value in a predictor or hypothesis table.
    #[error("point `{0}` has no value in the supplied table")]
    MissingPoint(String),

    /// A level-set query named a value that carries no mass.
    #[error("no level set with positive mass at value {0}")]
    EmptyLevelSet(f64),

    /// An operation that needs at least one record received none.
    #[error("empty input: at least one record is required")]
    EmptyInput,

    /// A sample label was outside {0, 1}.
    #[error("label {0} is not a binary label (expected 0 or 1)")]
    BadLabel(u8),

    /// A loss name (or its parameters) was not recognised.
    #[error("unknown loss: {0}")]
    UnknownLoss(String),

    /// A generalized-linear link function failed validation.
    #[error("invalid GLM link: {0}")]
    BadGlm(String),

    /// A linear combination referenced a hypothesis missing from the class.
    #[error("unknown class member `{0}`")]
    UnknownMember(String),

    /// A hypothesis class with no members.
    #[error("hypothesis class has no members")]
    EmptyClass,

    /// Grid enumeration would exceed the configured cap.
    #[error("grid would enumerate {combinations} combinations, above the cap of {cap}")]
    GridTooLarge { combinations: u128, cap: u64 },

    /// A bucket width (or lattice step) whose reciprocal is not an integer.
    #[error("grid width {0} is not the reciprocal of a positive integer")]
    BadDelta(f64),

    /// Boosting hit its iteration cap, or its final audit missed the target.
    #[error(
        "boosting did not converge after {iterations} iterations (final sMCE {final_smce}); \
         trace attached"
    )]
    DidNotConverge {
        iterations: usize,
        final_smce: f64,
        trace: Box<BoostTrace>,
    },

    /// A learned hypothesis failed its post-hoc regret verification.
    #[error("verified regret {achieved} exceeds the target {target}")]
    RegretAboveTarget { target: f64, achieved: f64 },

    /// A regret computation was given nothing to compete against.
    #[error("competitor set is empty")]
    EmptyCompetitors,

    /// A distribution failed validation (weights, label means, ids).
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    /// A predictor failed validation (range, missing ids).
    #[error("invalid predictor: {0}")]
    InvalidPredictor(String),

    /// A hypothesis class failed structural validation.
    #[error("invalid class: {0}")]
    InvalidClass(String),

    /// Caller-supplied options failed validation.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Malformed JSON or an unparseable command-line value.
    #[error("parse error: {0}")]
    Parse(String),

    /// Filesystem trouble, annotated with the offending path.
    #[error("io error on `{path}`: {message}")]
    Io { path: String, message: String },
}

impl Error {
    /// Wrap an I/O error with the path it occurred on.
    pub fn io(path: impl Into<String>, err: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }

    /// Wrap a serde_json error with a short context string.
    pub fn parse(context: impl std::fmt::Display, err: impl std::fmt::Display) -> Self {
        Error::Parse(format!("{context}: {err}"))
    }
}
