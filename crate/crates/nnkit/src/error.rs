use thiserror::Error;

pub type Result<T> = std::result::Result<T, NnError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("{op}: shape mismatch on {operand}: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        op: &'static str,
        operand: &'static str,
        expected: Vec<usize>,
        got: Vec<usize>,
    },

    #[error("{op}: input length {len} is shorter than window {window}")]
    InputTooShort {
        op: &'static str,
        len: usize,
        window: usize,
    },

    #[error("model width {d_model} is not divisible by {heads} heads")]
    IndivisibleHeads { d_model: usize, heads: usize },

    #[error("{op}: empty input")]
    Empty { op: &'static str },

    #[error("non-finite gradient in parameter `{param}`")]
    NonFiniteGradient { param: String },

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("token id {id} out of range for vocabulary of {vocab}")]
    TokenOutOfRange { id: usize, vocab: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
