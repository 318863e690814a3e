//! Heterogeneous graph convolution with `gᵀg` polynomial filters.
//!
//! A heterogeneous graph is split into one sub-graph per edge type; each
//! sub-graph contributes a shift operator `P_r` (row-normalized adjacency or
//! its Laplacian). Filters are noncommutative polynomials in those operators,
//! and the convolution applied to features is always of the form `gᵀg`, which
//! makes it positive semidefinite for every choice of weights.
//!
//! The crate is `no_std` with `alloc`. Everything that touches the file system
//! or a clock lives in the companion `pshgcn` crate.
//!
//! * [`graph`] builds sub-graph adjacencies and shift operators.
//! * [`words`] enumerates monomial words, prunes structurally-zero ones and
//!   expands `gᵀg` into coefficient form.
//! * [`conv`] applies filters (trie-shared chained products, decoupled
//!   precomputed propagation, and the MHGCN comparison filter).
//! * [`nn`] is the trainable model with a small reverse-mode tape.
//! * [`verify`] holds dense oracles for the PSD and equivalence properties.

#![no_std]

extern crate alloc;

pub mod conv;
mod error;
pub mod graph;
pub mod linalg;
pub mod nn;
pub mod rng;
pub mod verify;
pub mod words;

pub use error::{Error, Result};
pub use graph::{Edge, EdgeSignature, HeteroGraph, OperatorKind, OperatorSet, ShiftOperator, TypeMask};
pub use linalg::{CsrMatrix, Matrix};
pub use words::{ExpandedFilter, SosFilter, Word};
