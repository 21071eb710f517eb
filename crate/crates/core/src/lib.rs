//! Identifiability of overcomplete n-persistent topic models.
//!
//! The crate decides the combinatorial identifiability conditions (perfect
//! n-gram matching, Kruskal rank, expansion), synthesizes and estimates the
//! observed moments, recovers the topic-word matrix from exact moments at
//! desk scale, and runs seeded ensembles over random structures.

pub mod combin;
pub mod ensemble;
pub mod identify;
pub mod io;
mod error;
pub mod kv;
pub mod matgraph;
pub mod moments;
pub mod recover;
pub mod tensalg;

pub use error::{Error, Result};
pub use matgraph::{BipartiteGraph, NGramMatching};
pub use tensalg::{DenseMatrix, DenseTensor};
