//! Interacting queues on lattices and graphs whose service rates follow
//! utility-maximising allocations such as SIR and Shannon rates.
//!
//! The crate simulates the networks in discrete and continuous time,
//! solves small truncated chains exactly and evaluates the moment bounds
//! that hold in stationarity.

// `!(a > b)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod continuous;
pub mod discrete;
pub mod error;
pub mod model;
pub mod rates;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};

use rayon::prelude::*;

use model::Scenario;
use stats::RunStats;

/// Run every replication of `scenario`, in parallel. Replication seeds are
/// fixed up front from the master seed, so results do not depend on the
/// number of threads.
pub fn simulate(scenario: &Scenario) -> Result<Vec<RunStats>> {
    scenario.validate()?;
    rng::replication_seeds(scenario.run.seed, scenario.run.replications)
        .into_par_iter()
        .map(|seed| {
            if scenario.is_continuous() {
                continuous::run_ct(scenario, seed)
            } else {
                discrete::run(scenario, seed)
            }
        })
        .collect()
}
