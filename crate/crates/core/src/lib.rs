//! Electric-bus charging scheduling lab.
//!
//! A fleet of electric buses shares a terminal with a PV array, a limited
//! number of bidirectional chargers and a grid connection priced per step.
//! The crate provides:
//!
//! - [`data`]: timebase, price/PV traces, travel-time model and timetables,
//! - [`env`]: the stochastic fleet simulator with cost and safety accounting,
//! - [`options`]: charger allocations as options, termination and the
//!   compound high-level policy,
//! - [`nn`]: a small MLP with reverse-mode gradients, policy heads and Adam,
//! - [`trainer`]: constrained hierarchical PPO (high-level PPO-Lagrangian over
//!   allocations, low-level MAPPO-Lagrangian over charging power),
//! - [`baselines`]: a dynamic-programming oracle, an open-loop forecast
//!   baseline and the evaluation harness,
//! - [`harness`]: experiment orchestration used by the `ebcsl` binary.

pub mod baselines;
pub mod config;
pub mod data;
pub mod env;
pub mod error;
pub mod harness;
pub mod nn;
pub mod options;
pub mod trainer;

pub use error::{Error, Result};
