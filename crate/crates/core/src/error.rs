use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("episode already finished")]
    EpisodeFinished,

    /// Evidence ruled out every hypothesis with positive weight.
    #[error("evidence contradicts every hypothesis in the belief support")]
    Contradiction,

    #[error("belief is a point mass; no check is informative")]
    NothingToLearn,

    #[error("episode aborted at step {step}: {source}")]
    EpisodeAborted {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("replay diverged at step {step}: {detail}")]
    ReplayMismatch { step: usize, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
