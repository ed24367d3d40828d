//! Spectral pruning and rewiring of graph convolutional networks.
//!
//! The guide in `book/` walks through every module; its snippets are
//! compiled as doc-tests of this crate.

// `!(x >= 0.0)` rejects NaN along with negatives.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// index loops mirror the matrix formulas
#![allow(clippy::needless_range_loop)]

pub mod consensus;
pub mod data;
pub mod error;
pub mod gnn;
pub mod graph;
pub mod linalg;
pub mod lowrank;
pub mod rewiring;

pub use error::{Error, Result};
pub use linalg::DenseMatrix;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/spectra.md")]
    mod spectra {}
    #[doc = include_str!("../../../book/src/low_rank.md")]
    mod low_rank {}
    #[doc = include_str!("../../../book/src/gnn.md")]
    mod gnn {}
    #[doc = include_str!("../../../book/src/rewiring.md")]
    mod rewiring {}
    #[doc = include_str!("../../../book/src/consensus.md")]
    mod consensus {}
    #[doc = include_str!("../../../book/src/data_cli.md")]
    mod data_cli {}
}
