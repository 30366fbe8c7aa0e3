use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Autograd(#[from] crossway_autograd::Error),
    #[error(transparent)]
    Sim(#[from] crossway_sim::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("unknown policy variant `{0}` (expected maddpg, attention_maddpg, or ma_ga_ddpg)")]
    BadVariant(String),
    #[error("checkpoint does not fit this run: {0}")]
    CheckpointMismatch(String),
    #[error("replay buffer holds {have} transitions but {need} were requested")]
    BufferUnderflow { have: usize, need: usize },
    #[error("{0}")]
    Train(String),
}

impl Error {
    /// True when the failure is a checkpoint that cannot be used (missing,
    /// corrupt, wrong format version, or built for another configuration).
    pub fn is_checkpoint_error(&self) -> bool {
        matches!(
            self,
            Error::CheckpointMismatch(_)
                | Error::Autograd(crossway_autograd::Error::BadCheckpoint(_))
        )
    }
}
