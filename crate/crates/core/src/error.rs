use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("invalid record `{id}`: {message}")]
    InvalidRecord { id: String, message: String },

    #[error("not enough {class} records: requested {requested}, available {available}")]
    ClassShortage {
        class: &'static str,
        requested: usize,
        available: usize,
    },

    #[error("invalid split: {0}")]
    Split(String),

    #[error("record `{0}` has no label")]
    Unlabeled(String),

    #[error("corpus has no tokens; vocabulary would be empty")]
    EmptyVocabulary,

    #[error("vectorizer manifest: {0}")]
    Manifest(String),

    #[error("unknown architecture `{0}`")]
    UnknownArchitecture(String),

    #[error("{id} requires input dimension >= {minimum}, got {got}")]
    InputTooShort { id: String, minimum: usize, got: usize },

    #[error("input does not match model contract: {0}")]
    Contract(String),

    #[error("length mismatch: {left} predictions vs {right} labels")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("gazetteer row {row}: {message}")]
    Gazetteer { row: usize, message: String },

    #[error("GeoJSON: {0}")]
    GeoJson(String),

    #[error(transparent)]
    Nn(#[from] nnkit::NnError),
}
