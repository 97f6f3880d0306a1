use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PicardError {
    #[error("non-finite input value at index {index}")]
    NonFinite { index: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("admissibility error: nonlinearity `{tag}` has Lipschitz constant {lipschitz} > class bound {bound}")]
    Admissibility {
        tag: String,
        lipschitz: f64,
        bound: f64,
    },

    #[error("unknown nonlinearity `{0}`")]
    UnknownNonlinearity(String),

    #[error("inconsistent certification: {0}")]
    Certification(String),

    #[error("value {value} leaves [-{bound}, {bound}] in time slice {slice}")]
    DomainViolation { slice: usize, value: f64, bound: f64 },

    #[error("fixed-point solver stalled after {iterations} iterations (last increment {increment:e})")]
    SolverStall { iterations: usize, increment: f64 },

    #[error("initial-law misconfiguration: {0}")]
    LawMisconfigured(String),

    #[error("rollout left the admissible initial-data set at block {block} (sup {sup} > R = {radius})")]
    HorizonExceeded { block: usize, sup: f64, radius: f64 },
}

pub type Result<T> = std::result::Result<T, PicardError>;
