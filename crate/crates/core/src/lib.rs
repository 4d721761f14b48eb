//! Bipartite hardcore model on `G = ((L, R), E)` with fugacity `λ` on `L`
//! and `α` on `R`.
//!
//! - [`graph`]: bipartite graphs, parsing and random ensembles.
//! - [`exact`]: brute-force partition functions, distributions and
//!   influence matrices (ground truth for small graphs).
//! - [`recursion`]: the tree recursion `F`, `T_δ`, `M_δ`, `λ(x)` and the
//!   contraction functions `H`, `U`.
//! - [`uniqueness`]: critical thresholds and δ-uniqueness decisions.
//! - [`samplers`]: one-side and two-side Glauber, block dynamics and field
//!   dynamics.
//! - [`diagnostics`]: TV distance, mixing curves, spectral-independence checks.
//! - [`ising`]: reduction of `Δ_L ≤ 2` instances to a ferromagnetic Ising
//!   model with consistent fields.
//! - [`cli`]: the `biphc` command line.

pub mod cli;
pub mod diagnostics;
pub mod exact;
pub mod graph;
pub mod ising;
pub mod numeric;
pub mod recursion;
pub mod samplers;
pub mod uniqueness;

pub use exact::{ExactDistribution, Fugacities, Oracle, Pinning, Side};
pub use graph::{parse_graph, BipartiteGraph};
pub use recursion::TreeParams;
