use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not square: {0} x {1}")]
    NotSquare(usize, usize),

    #[error("row {row} is not a probability vector (sum = {sum}, min = {min})")]
    NotStochastic { row: usize, sum: f64, min: f64 },

    #[error("chain is reducible ({components} strongly connected components)")]
    Reducible { components: usize },

    #[error("network is disconnected")]
    Disconnected,

    #[error("invalid parameters: {0}")]
    BadParams(String),

    #[error("rate for state {state} is not positive ({rate})")]
    NonPositiveRate { state: usize, rate: f64 },

    #[error("operation requires a reversible chain")]
    NotReversible,

    #[error("operation requires a discrete-time kernel, but the chain is in generator form")]
    GeneratorForm,

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("negative time {0}")]
    NegativeTime(f64),

    #[error("invalid time: {0}")]
    BadTime(String),

    #[error("set must be a nonempty proper subset of the state space")]
    EmptyOrFullSet,

    #[error("state index {0} out of range")]
    BadState(usize),

    #[error("linear system is singular")]
    Singular,

    #[error("chain is not a random walk on a tree")]
    NotATree,

    #[error("delta {0} outside the admissible range")]
    BadDelta(f64),

    #[error("argument outside the domain: {0}")]
    DomainError(String),

    #[error("distance did not reach {epsilon} within {cap} steps (t_rel_absolute = {t_rel_absolute})")]
    NotMixing {
        epsilon: f64,
        cap: u64,
        t_rel_absolute: f64,
    },

    #[error("log-Sobolev estimate {estimate} outside analytic bracket [{lower}, {upper}]")]
    BracketViolation {
        estimate: f64,
        lower: f64,
        upper: f64,
    },

    #[error("connected-set enumeration exceeded cap of {0} sets")]
    CapExceeded(usize),

    #[error("measure has mass where the reference measure vanishes (state {0})")]
    SupportViolation(usize),

    #[error("entropy requires a nonnegative function (state {0})")]
    NegativeInput(usize),

    #[error("unsupported mode: {0}")]
    BadMode(String),

    #[error("chain spec, line {line} column {column}: {message}")]
    SpecParse {
        line: usize,
        column: usize,
        message: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
