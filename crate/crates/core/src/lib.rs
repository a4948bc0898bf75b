//! Age-of-Information statistics for multi-source preemptive M/M/1/1 queues.
//!
//! Every source shares a single server with no waiting room; a newly arriving
//! packet from any source pushes out the packet in service. The crate provides:
//!
//! - [`analytics`]: closed forms for the stationary AoI transform, moments,
//!   density, post-update ages, the two-source cross-moment and the
//!   correlation coefficient.
//! - [`simulator`]: a seeded event-level simulation that records the exact
//!   sawtooth trajectory of every source.
//! - [`estimators`]: exact time averages over those piecewise-linear paths.
//! - [`validation`] and [`sweep`]: theory-vs-simulation tables and parameter
//!   sweeps of the correlation coefficient.

pub mod analytics;
pub mod error;
pub mod estimators;
pub mod model;
pub mod report;
pub mod simulator;
pub mod sweep;
pub mod validation;

pub use analytics::{AoiDistribution, CorrelationReport};
pub use error::{AoiError, Result};
pub use estimators::{Estimate, ReplicationSummary, SimEstimates};
pub use model::ModelParams;
pub use report::Comparison;
pub use simulator::{Horizon, SamplePath, SimConfig};
