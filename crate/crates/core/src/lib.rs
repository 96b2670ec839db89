//! Gradient dynamics of the layer-peeled model under the unhinged loss.
//!
//! The crate provides the problem definition ([`shape`], [`loss`]), the
//! eigenspace decomposition of the coupling operator ([`subspace`]),
//! learning-rate schedules ([`schedule`]), exact trajectories
//! ([`closed_form`]), Euler and projected simulators ([`simulate`]),
//! convergence diagnostics ([`analysis`]) and seeded initialization ([`init`]).

pub mod analysis;
pub mod closed_form;
pub mod error;
pub mod init;
pub mod loss;
pub mod schedule;
pub mod shape;
pub mod simulate;
pub mod subspace;

pub use error::{Error, Result};
pub use loss::{Gradients, NcReport};
pub use schedule::{Rate, RateProfile, Schedule};
pub use shape::{build_coupling, CouplingMatrix, HwPair, ProblemShape, State};
pub use simulate::{LimitTarget, MetricsRow, RunParams, SimKind, Trace};
pub use subspace::{Component, Decomposition, Sign, Subspace};
