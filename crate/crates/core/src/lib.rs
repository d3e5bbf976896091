//! Directed polymers with unbounded jumps in a Bernoulli random
//! environment.
//!
//! * [`env`]: seeded obstacle fields, the open-site point process and its
//!   theta-regularization.
//! * [`fpp`]: exact minimum passage times by layered dynamic programming.
//! * [`polymer`]: log-domain transfer sweeps for `log Z` at finite and
//!   infinite negative inverse temperature.
//! * [`stats`]: replica ensembles and scaling/continuity diagnostics.
//! * [`cli`]: configuration and the `polymerlab` command dispatcher.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod env;
pub mod error;
pub mod fpp;
pub mod params;
pub mod polymer;
pub mod seed;
pub mod stats;

pub use env::{generate_slab, scale_factor, EnvSlab, PointView, RegularizedSlab, Site, Window};
pub use error::{Error, Result};
pub use params::{Beta, ModelParams};

/// Version stamp embedded in every artifact.
pub const CODE_VERSION: &str = concat!("polymerlab ", env!("CARGO_PKG_VERSION"));
