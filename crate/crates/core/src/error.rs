use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("argument error: {0}")]
    Argument(String),

    #[error("value {value} outside domain [0, 1] for {what}")]
    Domain { what: &'static str, value: f64 },

    #[error("class {0} has no vertices; estimate undefined")]
    EmptyClass(usize),

    #[error("no root of the de-biasing equation in [0, 1]")]
    NoValidRoot,

    #[error("optimizer did not reach residual tolerance (best residual {residual:e})")]
    NonConvergence { residual: f64, best: Vec<f64> },

    #[error("degenerate latent configuration: {0}")]
    Degenerate(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of a numerical procedure, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::EmptyClass(_)
                | Error::NoValidRoot
                | Error::NonConvergence { .. }
                | Error::Degenerate(_)
        )
    }
}
