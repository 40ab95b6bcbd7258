use thiserror::Error;

use crate::probcore::{Rational, Setting};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("negative probability mass {value} at {at}")]
    NegativeMass { at: String, value: Rational },

    /// `deficit` is `1 - sum`, so it is negative when the table overshoots.
    #[error("{what} is not normalized: deficit {deficit}")]
    NotNormalized { what: String, deficit: Rational },

    #[error("alphabet violation: {0}")]
    AlphabetViolation(String),

    #[error("duplicate entry {0}")]
    DuplicateEntry(String),

    #[error("setting pair ({a},{b}) has zero mass; its conditional law is undefined")]
    ZeroSettingMass { a: Setting, b: Setting },

    #[error("spreadsheet has no rows")]
    EmptySheet,

    #[error("response undefined at {0}")]
    ResponseUndefined(String),

    #[error("invalid hidden space: {0}")]
    InvalidHiddenSpace(String),

    #[error("detection probability P(XY != 0) is zero")]
    ZeroDetection,

    #[error("local model exceeded the CHSH bound: s_max = {0}")]
    InternalBoundViolation(Rational),

    #[error("no trials")]
    EmptyTrials,

    #[error("setting pairs do not match: {0}")]
    MismatchedPairs(String),

    #[error("trial count must be at least 1")]
    ZeroTrials,

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for errors that come from malformed input text rather than
    /// from a well-formed but invalid value.
    pub fn is_parse(&self) -> bool {
        matches!(self, Error::Parse(_))
    }
}
