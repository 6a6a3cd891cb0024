//! Evaluation of multiplexed two-way quantum repeater chains over silica
//! single-mode fiber and hollow-core fiber.
//!
//! The crate is organised bottom-up:
//!
//! * [`states`]: Bell-diagonal state algebra and the local noise channels.
//! * [`channel`]: fiber media, link budgets and elementary success probability.
//! * [`coupling`]: scalar step-index mode solver and Gaussian-beam coupling.
//! * [`cascade`]: exact recursion of Bell-pair count distributions across
//!   nesting levels.
//! * [`protocol`]: static distillation schedule and end-to-end evaluation.
//! * [`metrics`]: operation accounting and cross-technology ratios.
//! * [`sweep`]: parameter sweeps, depth optimisation, figure presets and CSV.
//! * [`oracle`]: brute-force references (Monte-Carlo bursts, dense density
//!   matrices) used to validate the analytic paths.

pub mod cascade;
pub mod channel;
pub mod coupling;
mod error;
pub mod metrics;
pub mod oracle;
pub mod protocol;
pub mod states;
pub mod sweep;

pub use error::{Error, Result};
