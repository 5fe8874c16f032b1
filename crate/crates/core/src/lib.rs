//! Cavity-method toolkit for q-coloring of sparse random graphs.
//!
//! The crate bundles random-graph ensembles and the Potts anti-ferromagnet
//! energy ([`graph`]), a brute-force oracle for small instances ([`exact`]),
//! Belief, Warning and Survey Propagation ([`bp`], [`wp`], [`sp`]), local
//! search ([`search`]), message-passing guided solvers ([`decimate`]),
//! reference threshold values ([`thresholds`]) and, behind the `harness`
//! feature, the experiment harness driving the `bench` binary.

pub mod bp;
mod dsu;
pub mod decimate;
pub mod exact;
pub mod graph;
pub mod rng;
pub mod search;
pub mod sp;
pub mod thresholds;
pub mod wp;

#[cfg(feature = "harness")]
pub mod bench;

pub use graph::{energy, Adjacency, Assignment, Color, Ensemble, Graph};

/// Replica-symmetric entropy density of proper colorings,
/// `log q + (c/2) log(1 - 1/q)`.
pub fn rs_entropy(q: usize, c: f64) -> f64 {
    let q = q as f64;
    q.ln() + 0.5 * c * (1.0 - 1.0 / q).ln()
}
