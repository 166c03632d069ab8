//! Graph powering and the surrounding spectral community-detection toolkit.
//!
//! The central operation is *graph powering*: replacing a graph `G` by
//! `G^(r)`, which connects every pair of vertices at hop distance at most
//! `r`. Powering regularizes sparse graphs — local density fluctuations,
//! high-degree vertices, and dense tangles stop dominating the spectrum —
//! so that a plain second-eigenvector split recovers planted communities.
//!
//! The crate provides:
//!
//! * [`graph`] — immutable CSR graphs, BFS, components, diameter;
//! * [`generators`] — seeded samplers for ER, SBM, random regular,
//!   Gaussian-mixture block model (GBM) and the hybrid model (HBM);
//! * [`operators`] — powering, distance and self-avoiding-walk matrices,
//!   the nonbacktracking family, and classical spectral operators;
//! * [`pipeline`] — the cleaning → powering → normalizing meta-algorithm;
//! * [`spectral`] — Lanczos / power-iteration eigensolvers, rounding rules,
//!   and the permutation-maximized agreement score;
//! * [`bp`] — belief propagation and its adjusted / linearized variants;
//! * [`bounds`] — the Alon-Boppana-style lower bound for powered graphs and
//!   its exact closed-walk certificates;
//! * [`experiments`] — reproducible parameter sweeps behind the CLI.

pub mod bounds;
pub mod bp;
pub mod error;
pub mod experiments;
pub mod generators;
pub mod graph;
pub mod io;
pub mod operators;
pub mod pipeline;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
pub use graph::{Graph, LabeledGraph, VertexSet};
