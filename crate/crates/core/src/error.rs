use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("relation symbol `{0}` used by more than one atom")]
    RepeatedRelation(String),
    #[error("variable `{var}` repeated in atom `{relation}`")]
    RepeatedVariable { relation: String, var: String },
    #[error("head variables do not match the atoms: {0}")]
    HeadMismatch(String),
    #[error("query has no atoms")]
    NoAtoms,
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("arity mismatch for `{relation}`: expected {expected}, got {got}")]
    Arity {
        relation: String,
        expected: usize,
        got: usize,
    },
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("stream line {line}: {msg}")]
    Stream { line: usize, msg: String },
    #[error("insert of tuple already present in `{0}`")]
    DuplicateInsert(String),
    #[error("delete of tuple absent from `{0}`")]
    AbsentDelete(String),
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error("stale delta handle from timestamp {0} (engine is at {1})")]
    StaleHandle(u64, u64),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
