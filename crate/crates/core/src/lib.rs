//! Covariate-assisted latent factor stochastic block model (CALF-SBM).
//!
//! An undirected binary network is modelled dyad by dyad:
//!
//! ```text
//! logit P(A_ij = 1 | π_i = k, π_j = l) = β₀ + β_kl · S_ij + θ_i + θ_j
//! ```
//!
//! where `S_ij` is a covariate similarity between the two nodes, `β_kl` a
//! block-pair coefficient and `θ_i ~ N(0, σ²)` a latent connectivity effect.
//!
//! The crate is split by pipeline stage:
//!
//! * [`model`] and [`similarity`]: domain types, the link function, and the likelihood.
//! * [`datagen`]: synthetic networks with known ground truth.
//! * [`inference`]: initialization and the Gibbs-within-Metropolis sampler for fixed `K`.
//! * [`posterior`]: label-switching correction, summaries, R-hat, WAIC and `K` selection.
//! * [`evaluation`]: ARI, NMI, Cramér's V and the baseline clusterers.
//!
//! Community labels are 0-based `usize` block indices everywhere in this crate.
//! Front ends convert to 1-based labels when writing reports.

pub mod datagen;
pub mod error;
pub mod evaluation;
pub mod inference;
pub mod matrix;
pub mod model;
pub mod posterior;
pub mod rng;
pub mod similarity;

pub use error::{CalfError, Result};
pub use matrix::DenseMatrix;
pub use model::{BlockCoefficients, ModelState, Network, NodeData, SimilarityKind};
