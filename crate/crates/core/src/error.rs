use alloc::boxed::Box;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {what}: expected {expected}, found {found}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("signal of {len} samples is shorter than one frame ({frame_len})")]
    SignalTooShort { len: usize, frame_len: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("negative entry in {0}")]
    NegativeEntry(&'static str),
    #[error("non-positive entry in {0}")]
    NonPositive(&'static str),
    #[error("singular matrix at frequency bin {bin}")]
    Singular { bin: usize },
    #[error("input is all zero: {0}")]
    AllZero(&'static str),
    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn shape(what: &'static str, expected: usize, found: usize) -> Self {
        Error::ShapeMismatch {
            what,
            expected,
            found,
        }
    }
}
