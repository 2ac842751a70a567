//! # cfgnn
//!
//! Class-Fourier graph neural networks for imbalanced node classification.
//!
//! The crate implements the full spectral pipeline behind the CF-GNN family
//! of models: dense graph Laplacians and Kronecker-sum product graphs, graph
//! Fourier transforms (including the two-dimensional twin transform on
//! Cartesian products), node-localized polynomial spectral filters with
//! class-oriented eigenvalue weighting and eigenvector attention, manual
//! reverse-mode training with Adam, and the confusion-matrix metrics used to
//! judge classifiers on skewed data.
//!
//! ## Layout
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`graph`] | [`Graph`], Laplacians, Cartesian products, Kronecker sums |
//! | [`spectral`] | Jacobi eigensolver, power iteration, GFT / twin-GFT |
//! | [`filters`] | Polynomial filter banks and the class-branch variants |
//! | [`model`] | The trainable classifier, loss, gradients, Adam, training |
//! | [`data`] | CSV ingestion, synthetic corpora, splits, resampling |
//! | [`metrics`] | Confusion matrices, G-mean, multiclass MCC, cmA |
//!
//! ## Quick start
//!
//! ```
//! use cfgnn::graph::Graph;
//! use cfgnn::spectral::{eigendecompose, gft, igft};
//! use ndarray::array;
//!
//! let cycle = Graph::cycle(4).unwrap();
//! let basis = eigendecompose(&cycle.laplacian()).unwrap();
//!
//! // The 4-cycle Laplacian has spectrum {0, 2, 2, 4}.
//! assert!((basis.eigenvalues()[0] - 0.0).abs() < 1e-9);
//! assert!((basis.eigenvalues()[3] - 4.0).abs() < 1e-9);
//!
//! // Analysis followed by synthesis reconstructs the signal.
//! let signal = array![1.0, -2.0, 0.5, 3.0];
//! let spectrum = gft(&basis, &signal).unwrap();
//! let back = igft(&basis, &spectrum).unwrap();
//! for (a, b) in signal.iter().zip(back.iter()) {
//!     assert!((a - b).abs() < 1e-9);
//! }
//! ```
//!
//! A narrative guide with worked examples lives in the `book/` directory of
//! the repository; its code listings are compiled as doc-tests so they stay
//! in sync with the crate.

pub mod data;
pub mod filters;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod spectral;

#[cfg(doctest)]
mod book;

pub use graph::{Graph, SymMatrix};
pub use spectral::SpectralBasis;
