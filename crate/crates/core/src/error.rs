use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("optimizer state error: {0}")]
    State(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("wrong volume domain: expected {expected}, found {found}")]
    Domain {
        expected: &'static str,
        found: &'static str,
    },
    #[error(
        "non-finite loss at epoch {epoch}, pair {pair}: total={total} high={high} overall={overall} adv={adv}"
    )]
    NonFiniteLoss {
        epoch: usize,
        pair: usize,
        total: f64,
        high: f64,
        overall: f64,
        adv: f64,
    },
}

macro_rules! shape_err {
    ($($arg:tt)*) => { $crate::error::Error::Shape(alloc::format!($($arg)*)) };
}
macro_rules! arg_err {
    ($($arg:tt)*) => { $crate::error::Error::Argument(alloc::format!($($arg)*)) };
}
pub(crate) use arg_err;
pub(crate) use shape_err;
