//! Soft Q-learning with energy-based policies.
//!
//! Two halves share one temperature convention:
//!
//! * **Tabular oracles** ([`tabular`], [`oracle_suite`]): exact
//!   maximum-entropy solvers on finite MDPs — the soft Bellman backup, its
//!   unique fixed point, Boltzmann policies, soft policy evaluation, and the
//!   policy-gradient/soft-Q equivalence on bandits. These double as ground
//!   truth for everything else.
//! * **Continuous control** ([`nn`], [`qnet`], [`svgd`], [`value`],
//!   [`agent`], [`env`]): a soft Q-network trained on importance-sampled
//!   soft-value targets with hard target copies, and an amortized SVGD
//!   sampling network that draws approximate samples from the policy
//!   `π(a|s) ∝ exp(Q(s,a)/α)`. The desk-scale benchmark is a 2D multi-goal
//!   point mass whose optimal maximum-entropy policy is multimodal.
//!
//! The [`agent::train`] loop, the [`config::RunConfig`] file format, binary
//! [`checkpoint`]s, metrics CSVs, and evaluation trajectory dumps are the
//! surfaces the CLI builds on.

pub mod agent;
pub mod checkpoint;
pub mod config;
pub mod env;
pub mod error;
pub mod eval;
pub mod explore;
pub mod metrics;
pub mod nn;
pub mod oracle_suite;
pub mod qnet;
pub mod replay;
pub mod rng;
pub mod svgd;
pub mod tabular;
pub mod tensor;
pub mod value;

pub use error::{Result, SoftqError};
