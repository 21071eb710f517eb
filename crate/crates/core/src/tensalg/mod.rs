//! Dense linear and multilinear algebra: Kronecker and Khatri-Rao products,
//! n-gram matrices, reshaping, and rank decisions.

mod dense;
mod products;
mod rank;

pub use dense::{DenseMatrix, DenseTensor};
pub use products::{
    khatri_rao, kron_power, kron_vec, kron_vec_power, kronecker, ngram_matrix, ngram_row,
    restricted_ngram_matrix, ten_of, vec_of, MAX_DENSE_ENTRIES,
};
pub use rank::{
    has_null_space_property, is_rank_one, kruskal_rank, kruskal_rank_at_least, null_space,
    numeric_rank, singular_values, KrankOptions, DEFAULT_TOL,
};

pub(crate) use rank::{column_space_na, sorted_svd};
