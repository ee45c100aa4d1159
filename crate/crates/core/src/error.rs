use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("numeric domain error: {0}")]
    Domain(String),

    /// The stick sequence hit the hard cap before its remaining mass fell
    /// below epsilon.
    #[error("truncation overflow: {len} sticks generated, remaining mass {tail_mass:e} still above epsilon")]
    TruncationOverflow { len: usize, tail_mass: f64 },

    #[error("degenerate posterior: w_x = {w_x} is within 1e-12 of 1")]
    DegeneratePosterior { w_x: f64 },

    #[error("stick sequence too short: need {needed} positions, have {have}")]
    SequenceTooShort { needed: usize, have: usize },

    #[error("stick sequence has the wrong law: {0}")]
    WrongLaw(String),

    #[error("only {accepted} samples accepted (need at least {required}); increase `samples`")]
    UnderSampled { accepted: usize, required: usize },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
