//! Agent-based simulator of influence-process structural learning.
//!
//! Organizations are three-tier networks (input, hidden, output agents).
//! Input agents sense opportunities, hidden agents champion them and output
//! agents fund a limited number looking only at champion status. Outcomes
//! feed back into statuses, reputations and relationship weights, so the
//! collective learns which channels find good projects.
//!
//! Modules:
//! - [`engine`]: the per-tick funding and learning loop.
//! - [`emergence`]: preferential-attachment growth, scale-free checks and
//!   degree-based tier assignment.
//! - [`evolution`]: a genetic algorithm over influence weights.
//! - [`metrics`]: Spearman, Gini and series summaries.
//! - [`config`] / [`runner`]: batch experiment configuration and CSV output.

// `!(x > 0.0)` deliberately rejects NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod rng;
pub mod types;
pub mod engine;
pub mod emergence;
pub mod evolution;
pub mod metrics;
pub mod par;
pub mod csv;
pub mod config;
pub mod runner;

pub use error::{IpslError, Result};
pub use types::{
    new_organization, new_organization_with_graph, Agent, EnvParams, InfluenceGraph, LayerSizes,
    Opportunity, Organization, Outcome, Project, SimConfig, Tier,
};
