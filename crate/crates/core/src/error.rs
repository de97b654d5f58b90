use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid segment spec: {0}")]
    InvalidSpec(String),

    #[error("invalid membrane parameters: {0}")]
    InvalidParams(String),

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("invalid stimulus: {0}")]
    InvalidStimulus(String),

    #[error("unknown node label `{0}`")]
    UnknownLabel(String),

    #[error("node {0} is not part of the waveform")]
    UnknownNode(usize),

    #[error("system matrix is singular (degenerate topology) at pivot {pivot}")]
    DegenerateTopology { pivot: usize },

    #[error("solver became unstable at step {step} (non-finite voltage at node {node})")]
    Instability { step: usize, node: usize },

    #[error("not applicable: {0}")]
    NotApplicable(String),
}
