//! Dense and sparse matrix kernels.

mod decomp;
mod matrix;
mod sparse;

pub(crate) use decomp::{complete_orthonormal, fix_sign};
pub use decomp::{
    nuclear_norm, singular_values, sv_threshold, svd, sym_eig, top_singular_values, truncate_rank,
    EigResult, SvdResult, ThresholdMode, SYMMETRY_TOL,
};
pub use matrix::{format_f64, parse_matrix_prefix, DenseMatrix};
pub(crate) use matrix::{norm2, parse_f64};
pub use sparse::CsrMatrix;
