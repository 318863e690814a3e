use alloc::string::String;

use crate::words::Word;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("node id {node} out of range for graph with {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },

    #[error("edge #{index} ({src} -> {dst}) has unknown edge type {edge_type}")]
    UnknownEdgeType {
        index: usize,
        src: usize,
        dst: usize,
        edge_type: usize,
    },

    #[error(
        "edge #{index} ({src} -> {dst}, type {edge_type}) violates signature: \
         expected node types ({expected_src} -> {expected_dst}), got ({found_src} -> {found_dst})"
    )]
    SignatureViolation {
        index: usize,
        src: usize,
        dst: usize,
        edge_type: usize,
        expected_src: usize,
        expected_dst: usize,
        found_src: usize,
        found_dst: usize,
    },

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("negative entry {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("word count overflows 2^63 (R = {alphabet}, K = {order})")]
    Overflow { alphabet: usize, order: usize },

    #[error("word {0} is missing from the propagation store")]
    MissingWord(Word),

    #[error("budget exceeded: {count} words, cap {cap}")]
    BudgetExceeded { count: usize, cap: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("dense oracle capped at n <= {cap}, got {n}")]
    DenseCapExceeded { n: usize, cap: usize },

    #[error("eigensolver did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
}
