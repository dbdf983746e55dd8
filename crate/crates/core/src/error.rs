use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{what}: expected dimension {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("model fault: non-finite {what} at entry {index}")]
    ModelFault { what: &'static str, index: usize },
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("value function returned a non-finite value at state {state:?}")]
    NonFiniteValue { state: Vec<f64> },
    #[error("index {index} out of range for {len} entries")]
    OutOfRange { index: usize, len: usize },
    #[error("{0} is empty")]
    Empty(&'static str),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("exhaustive search over {count} sequences exceeds the budget of {budget}; use a smaller horizon")]
    Budget { count: u128, budget: u64 },
    #[error("at t={t}: {source}")]
    AtStep { t: usize, source: Box<Error> },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn at_step(self, t: usize) -> Self {
        match self {
            e @ Error::AtStep { .. } => e,
            e => Error::AtStep {
                t,
                source: Box::new(e),
            },
        }
    }
}

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            got,
        })
    }
}
