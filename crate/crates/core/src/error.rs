use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid layer sizes {0:?}: need at least two layers, all non-zero")]
    InvalidLayers(Vec<usize>),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("malformed episode: {0}")]
    MalformedEpisode(String),

    #[error("no stored step {episode}:{step}")]
    InvalidStep { episode: u64, step: usize },

    #[error("replay memory holds {have} observations, sampling needs {need}")]
    NotWarmedUp { have: usize, need: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("evaluation: {0}")]
    Evaluation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
