//! Cooperative abnormality detection and localization with mobile molecular
//! sensors in a cylindrical flow channel.
//!
//! Sensors are injected upstream, drift with the flow through `K` slots and
//! are absorbed by a fusion center (FC). A sensor that senses the abnormality
//! (or fires falsely) dumps its marker storage into the channel; the markers
//! may activate other sensors and are sampled by the FC. The crate evaluates
//! the resulting detection and localization error probabilities in closed
//! form ([`detection`], [`localization`]) and checks them against an
//! independent Monte-Carlo simulator ([`sim`]).

// `!(a < b)` comparisons are deliberate: NaN must fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod detection;
pub mod estimate;
pub mod flow;
pub mod geometry;
pub mod localization;
pub mod numeric;
pub mod sim;
pub mod tail;

pub use config::{ConfigError, FlowCheck, SystemConfig};
pub use estimate::{ErrorEstimate, Provenance};
pub use flow::{validate_flow_regime, FlowReport};
pub use geometry::{build_geometry, marker_hit_prob, Geometry};
pub use tail::{count_tail, gaussian_tail_q, TailMode};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(
        "exact enumeration needs {count} source vectors, above the budget of {budget}; \
         use a truncated or sampled policy"
    )]
    OverBudget { count: u128, budget: u64 },
    #[error("{0}")]
    Unsupported(String),
}
