use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("expected {expected} bits, got {got}")]
    Length { expected: usize, got: usize },
    #[error("message has bits set at or above position {k}")]
    MessageOverflow { k: usize },
    #[error("block index {index} out of range (depth {depth})")]
    BlockIndex { index: usize, depth: usize },
    #[error("expected a {rows}x{cols} matrix")]
    Shape { rows: usize, cols: usize },
    #[error("chunk {0} is not available")]
    MissingChunk(i64),
    #[error("chunk range {lo}..{hi} is outside the decodable window {win_lo}..{win_hi}")]
    OutOfWindow { lo: i64, hi: i64, win_lo: i64, win_hi: i64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("stall search exhausted {0} attempts without a verified pattern")]
    SearchExhausted(usize),
    #[error("malformed corpus: {0}")]
    Corpus(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
