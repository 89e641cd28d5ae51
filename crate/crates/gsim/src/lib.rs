//! Graph similarity toolkit.
//!
//! The crate learns a graph–graph similarity function (a regression onto
//! values in `(0, 1]`, e.g. `exp(-GED)`) and provides the classical solvers
//! needed to supervise and evaluate it:
//!
//! - [`graph`]: simple undirected graphs, JSON-lines datasets, synthetic
//!   generators, train/val/test splits, and a pairwise ground-truth cache.
//! - [`spectral`]: normalized-Laplacian spectral clustering that compacts a
//!   graph into a hierarchy of coarser stages, plus eigenvector pooling that
//!   carries node embeddings from one stage to the next.
//! - [`align`]: earth mover's distance over node embeddings, greedy
//!   plan-to-matching extraction, canonical node ordering, and the aligned
//!   correlation matrices consumed by the regressor.
//! - [`nn`]: a small reverse-mode tape (matmul/conv/pool/etc.), graph
//!   convolution encoders, the multi-stage convolutional regressor, and a
//!   deterministic SGD training loop with checkpointing.
//! - [`oracles`]: exact and approximate graph edit distance (brute force,
//!   A*, beam, bipartite assignment), maximum common subgraph, and baseline
//!   similarity scores.
//! - [`eval`]: regression and ranking metrics (MSE, Spearman ρ, Kendall τ-b,
//!   precision@k) and whole-model evaluation reports.
//! - [`cli`]: the `gsim` command-line entry points (`dataset`, `groundtruth`,
//!   `train`, `eval`, `query`, `sweep`).
//!
//! See the crate examples for runnable walkthroughs of each piece:
//! `cargo run -p gsim --example <name>`.

pub mod align;
pub mod cli;
pub mod eval;
pub mod graph;
pub mod hashing;
pub mod mat;
pub mod nn;
pub mod oracles;
pub mod spectral;

pub use graph::{Graph, GraphError};
pub use mat::Mat;
