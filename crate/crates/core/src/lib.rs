//! Panel difference-in-differences estimation under bipartite network
//! interference.
//!
//! Treatments are imposed on one set of units (intervention units) while
//! outcomes are measured on a disjoint set (outcome units), connected only
//! across the sets by a weighted interference network. The crate:
//!
//! - projects outcome-unit panels onto intervention units through
//!   normalized network weights ([`projection`]),
//! - maps each intervention unit's exposure to *other* units' treatments
//!   into a scalar spillover value, thresholds it to identify unexposed
//!   control observations ([`spillover`]),
//! - estimates dynamic total treatment effects with a two-stage
//!   difference-in-differences procedure, with block-bootstrap intervals,
//!   outcome-level rescaling, and one-step TWFE baselines ([`estimator`]),
//! - generates synthetic datasets with exact counterfactual worlds and
//!   brute-force effect oracles for validation ([`simulator`]), and
//! - reads/writes delimited panels and orchestrates the full pipeline
//!   ([`io`], [`pipeline`]).
//!
//! Replicated computations (bootstrap, Monte-Carlo studies, per-period maps)
//! run on rayon when the default `parallel` feature is enabled and fall back
//! to sequential loops without it; results are identical either way.
//!
//! ```
//! use netdid::estimator::{bootstrap_ci, BootstrapConfig};
//! use netdid::model::EventWindow;
//! use netdid::pipeline::build_projected_panel;
//! use netdid::simulator::{generate, DgpConfig};
//! use netdid::spillover::SpilloverConfig;
//!
//! let mut dgp = DgpConfig::random(30, 120, 8, 0.05, 7);
//! dgp.effects.profile = vec![-2.0, -4.0];
//! dgp.noise_sd = 0.5;
//! dgp.adoption.never_treated_fraction = 0.5;
//! let data = generate(&dgp)?;
//!
//! let assembly = build_projected_panel(
//!     &data.ids,
//!     &data.network,
//!     &data.treatment,
//!     &data.factual,
//!     &SpilloverConfig::SpilloverValue {
//!         threshold_percentile: 25.0,
//!         per_period: true,
//!         untreated_only: true,
//!     },
//! )?;
//! let result = bootstrap_ci(
//!     &assembly.panel,
//!     &data.treatment,
//!     EventWindow::new(3, 4)?,
//!     &BootstrapConfig { n_replicates: 99, master_seed: 11, ci_level: 0.95 },
//! )?;
//! let at_adoption = result.estimate(0).expect("observed relative time");
//! assert!(at_adoption < 0.0);
//! # Ok::<(), netdid::Error>(())
//! ```

pub mod error;
pub mod estimator;
mod exec;
pub mod io;
pub mod model;
pub mod network;
pub mod pipeline;
pub mod projection;
pub mod seed;
pub mod simulator;
pub mod spillover;

pub use error::{Error, Result};
