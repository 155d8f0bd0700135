use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An evaluator produced a non-finite value.
    #[error("evaluation error: non-finite value in {component}")]
    Evaluation { component: String },

    /// A caller violated an operation's precondition (shapes, ranges, signs).
    #[error("contract error: {0}")]
    Contract(String),

    /// Random data generation could not satisfy its acceptance check.
    #[error("generation error: {0}")]
    Generation(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn evaluation(component: impl Into<String>) -> Self {
        Error::Evaluation {
            component: component.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
