//! Community detection in multilayer networks.
//!
//! Detects communities in temporal, multiplex, and multilevel networks
//! by maximizing multilayer modularity, with resolution and interlayer
//! coupling parameters estimated from a planted-partition model instead
//! of being hand-tuned. The crate bundles the data model and file I/O,
//! the quality functions, a Louvain-style optimizer, parameter
//! estimators, the iterated maximization loop, synthetic benchmark
//! generators, and partition-comparison metrics; the `mlcd` binary wires
//! them into reproducible command-line experiments.

pub mod error;
pub mod estimator;
pub mod evalx;
pub mod itermodmax;
pub mod network;
pub mod optimizer;
pub mod quality;
pub mod synth;

pub use error::{Error, Result};
