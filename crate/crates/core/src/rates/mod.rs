//! Closed-form service-rate families and checks of their fairness and
//! feasibility properties.

mod fairness;
mod feasibility;

pub use fairness::{
    verify_fairness, verify_shannon_fairness, FairnessReport, WitnessSampler, FAIRNESS_TOL,
};
pub use feasibility::{
    fold_kernel, periodic_feasibility, power_iteration, symmetric_threshold,
    FeasibilityCertificate, PowerIterationResult, POWER_ITERATION_MAX_ITERS,
    POWER_ITERATION_TOL,
};

use crate::error::{Error, Result};
use crate::model::Topology;

/// A state-dependent rate allocation `ψ(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum RateFamily {
    /// `ψ_i = x_i / Σ_j a_{j-i} x_j`.
    #[default]
    Sir,
    /// `log(1 + ψ_i)` with `ψ` the SIR rate.
    Shannon,
    /// `log(1 + x_i / (Σ_j a_{j-i} x_j + B))` with background noise `B >= 0`.
    Sinr { noise: f64 },
}

impl RateFamily {
    pub fn sinr(noise: f64) -> Result<Self> {
        if !(noise.is_finite() && noise >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise must be finite and non-negative, got {noise}"
            )));
        }
        Ok(Self::Sinr { noise })
    }

    /// Upper bound on any single node's rate.
    pub fn max_rate(&self) -> f64 {
        match self {
            Self::Sir => 1.0,
            Self::Shannon | Self::Sinr { .. } => std::f64::consts::LN_2,
        }
    }

    /// Rate of node `i` in state `x` (entries may be any non-negative reals).
    pub fn rate<T: Copy + Into<f64>>(&self, x: &[T], topo: &Topology, i: usize) -> f64 {
        let xi: f64 = x[i].into();
        if xi == 0.0 {
            return 0.0;
        }
        let load = interference_load(x, topo, i);
        match *self {
            Self::Sir => xi / load,
            Self::Shannon => (xi / load).ln_1p(),
            Self::Sinr { noise } => (xi / (load + noise)).ln_1p(),
        }
    }

    /// Write `ψ(x)` into `out`.
    pub fn rates_into<T: Copy + Into<f64>>(&self, x: &[T], topo: &Topology, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.rate(x, topo, i);
        }
    }

    pub fn rates<T: Copy + Into<f64>>(&self, x: &[T], topo: &Topology) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.rates_into(x, topo, &mut out);
        out
    }
}

/// `Σ_{j ∈ N_i} a_{j-i} x_j`, the self term included.
pub fn interference_load<T: Copy + Into<f64>>(x: &[T], topo: &Topology, i: usize) -> f64 {
    topo.neighbourhood(i)
        .iter()
        .map(|&(j, a)| a * x[j].into())
        .sum()
}

/// SIR rates `ψ_i(x) = x_i / Σ_j a_{j-i} x_j`, with `0/0 = 0`.
pub fn sir_rates<T: Copy + Into<f64>>(x: &[T], topo: &Topology) -> Vec<f64> {
    RateFamily::Sir.rates(x, topo)
}

/// Shannon rates `log(1 + ψ_i(x))`.
pub fn shannon_rates<T: Copy + Into<f64>>(x: &[T], topo: &Topology) -> Vec<f64> {
    RateFamily::Shannon.rates(x, topo)
}

/// SINR rates with background noise `noise`.
pub fn sinr_rates<T: Copy + Into<f64>>(x: &[T], topo: &Topology, noise: f64) -> Result<Vec<f64>> {
    Ok(RateFamily::sinr(noise)?.rates(x, topo))
}
