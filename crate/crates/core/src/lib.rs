//! Active search for anomalous processes among `M` heterogeneous cells.
//!
//! At each step a searcher probes `K` of the cells, observes one sample
//! from each, and eventually declares which `L` cells hold targets. This
//! crate provides:
//!
//! - [`models`]: observation families, log-densities, sampling and KL divergences.
//! - [`state`]: per-cell sum LLRs, probe counts and the deterministic ranking.
//! - [`rates`]: rate functions, the optimal-allocation closed form, optimality
//!   verdicts, pathological probe budgets and the "cars and drivers" oracle.
//! - [`dgfi`]: the deterministic DGFi selection, stopping and decision rules.
//! - [`chernoff`]: the randomized Chernoff test and its maximin action distributions.
//! - [`harness`]: seeded, order-independent Monte Carlo evaluation.
//! - [`config`] and [`output`]: JSON experiment configs and bit-stable CSV/JSON reports.
//!
//! All logarithms are natural; divergences and thresholds are in nats.

pub mod chernoff;
pub mod config;
pub mod dgfi;
pub mod error;
pub mod harness;
pub mod instance;
pub mod lp;
pub mod models;
pub mod output;
pub mod quadrature;
pub mod rates;
pub mod state;
pub mod subsets;

pub use chernoff::{ActionDistribution, ChernoffPolicy};
pub use config::ExperimentConfig;
pub use dgfi::{DgfiPolicy, PolicyAction};
pub use error::{Error, Result};
pub use harness::{ExperimentReport, PolicyKind, Simulator, TrialResult};
pub use instance::{HypothesisPrior, ProblemInstance};
pub use models::{kl_divergence, DistributionSpec, ProcessModel};
pub use rates::{DivergenceTable, RateReport};
pub use state::SearchState;
