//! Convergence analysis and feedback-gain design for discrete-time consensus
//! with delayed feedback on n-hop controller architectures.
//!
//! The closed-loop dynamics are `x(k+1) = x(k) - K x(k - tau)`, where `K` is a
//! symmetric gain matrix with zero row sums whose sparsity follows the
//! architecture graph. Each nonzero eigenvalue `lambda` of `K` contributes the
//! modes of `z^(tau+1) - z^tau + lambda`; the convergence rate is the largest
//! modulus among those modes.
//!
//! Modules:
//! - [`graph`]: topologies, n-hop closures, Laplacians, seeded generators.
//! - [`spectral`]: characteristic roots, stability bound, convergence rate.
//! - [`gains`]: uniform and structured gain design.
//! - [`sweep`]: architecture sweeps under hop-dependent delays.
//! - [`sim`]: time-domain simulation and empirical rate estimation.

pub mod error;
pub mod gains;
pub mod graph;
pub mod sim;
pub mod spectral;
pub mod sweep;

pub use error::{Error, Result};
pub use gains::{GainDesign, GainMatrix, Strategy};
pub use graph::Topology;
pub use sim::Trajectory;
pub use spectral::{RootSet, Spectrum};
pub use sweep::{DelayModel, RateReport, SweepResult};
