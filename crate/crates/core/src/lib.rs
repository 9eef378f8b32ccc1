//! Computational machinery for low-rank global attention (LRGA) on graphs and
//! for the Weisfeiler-Leman style refinement hierarchy it relates to.
//!
//! The crate is organized around a chain of equivalences, each of which is
//! backed by an executable oracle in the test suites:
//!
//! * [`graph`] / [`pair_tensor`] — dense graphs, permutations, and the
//!   isomorphism-type tensor `[I, 1⊗X, X⊗1, A]` over node pairs.
//! * [`wl`] — classical hash-based 1-WL vertex refinement and 2-FWL pair
//!   refinement, plus a synchronized isomorphism test.
//! * [`fwl_matrix`] — the algebraic form of one 2-FWL round: multiplication
//!   heads `𝒴^β · 𝒴^γ` and the power-sum multi-symmetric encoding they
//!   implement pairwise.
//! * [`kernels`] — explicit polynomial-kernel feature maps that factor each
//!   multiplication head through node-level features.
//! * [`vandermonde`] — multivariate Vandermonde systems, monomial
//!   decompositions into powers of linear forms, and the sample-complexity
//!   bound built from their conditioning.
//! * [`lrga`] — the low-rank global attention module itself, with a dense
//!   attention oracle for testing.
//! * [`rgnn`] — random node features, the message-passing layer over them,
//!   and concentration diagnostics for the random factorization `RRᵀ/d ≈ I`.
//! * [`mlp`] — a two-layer ReLU MLP with exact gradients and the monomial
//!   learnability experiment.
//!
//! Everything is deterministic given explicit seeds; the PRNG is ChaCha8 with
//! stream splitting (see [`rgnn::RNG_ALGORITHM`]).

pub mod alloc_track;
pub mod fwl_matrix;
pub mod graph;
pub mod graph6;
pub mod kernels;
pub mod lrga;
pub mod mlp;
pub mod multi_index;
pub mod pair_tensor;
pub mod rgnn;
pub mod vandermonde;
pub mod wl;
