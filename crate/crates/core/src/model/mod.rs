//! Domain types shared across the crate.

mod arrivals;
mod kernel;
mod scenario;
mod topology;
mod utility;

pub use arrivals::{ArrivalDist, ArrivalSpec, Moments};
pub use kernel::{InterferenceKernel, Offset};
pub use scenario::{RoutingDegree, Routing, RunControl, Scenario, Scheduler, TimeModel};
pub use topology::{NodeConvention, Topology, TopologyKind};
pub use utility::{
    Concave, ConditionReport, UtilityPair, Weight, CONDITION_G_HORIZON, CONDITION_TOL,
};

use crate::error::{Error, Result};

/// Queue lengths `X_i`, indexed by node.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct QueueState(pub Vec<u32>);

impl QueueState {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0; n])
    }

    /// Componentwise `self <= other`.
    pub fn dominated_by(&self, other: &Self) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }
}

impl std::ops::Deref for QueueState {
    type Target = [u32];
    fn deref(&self) -> &[u32] {
        &self.0
    }
}

impl std::ops::DerefMut for QueueState {
    fn deref_mut(&mut self) -> &mut [u32] {
        &mut self.0
    }
}

impl From<Vec<u32>> for QueueState {
    fn from(v: Vec<u32>) -> Self {
        Self(v)
    }
}

/// Slack allowed on `λ_i < ν_i - ε` so that boundary choices such as
/// `λ = 0.3, ν = 1/3, ε = 1/30` survive floating-point rounding.
pub const SUBCRITICAL_SLACK: f64 = 1e-12;

/// Reference rates `ν`, margin `ε` and utility pair defining the Lyapunov
/// function `F(y) = Σ_i h'(ν_i) G(y_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovSpec {
    nu: Vec<f64>,
    epsilon: f64,
    utility: UtilityPair,
}

impl LyapunovSpec {
    pub fn new(nu: Vec<f64>, epsilon: f64, utility: UtilityPair) -> Result<Self> {
        if nu.is_empty() || nu.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidArgument("reference rates ν must be positive".into()));
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!("margin ε must be positive, got {epsilon}")));
        }
        Ok(Self {
            nu,
            epsilon,
            utility,
        })
    }

    pub fn uniform(nodes: usize, nu: f64, epsilon: f64, utility: UtilityPair) -> Result<Self> {
        Self::new(vec![nu; nodes], epsilon, utility)
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn utility(&self) -> &UtilityPair {
        &self.utility
    }

    pub fn len(&self) -> usize {
        self.nu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nu.is_empty()
    }

    /// `h'(ν_i)`.
    pub fn h_prime(&self, i: usize) -> f64 {
        self.utility.h_prime(self.nu[i])
    }

    /// Check `λ_i < ν_i - ε` for every node.
    pub fn check_subcritical(&self, lambda: &[f64]) -> Result<()> {
        if lambda.len() != self.nu.len() {
            return Err(Error::InvalidArgument(format!(
                "{} arrival rates for {} reference rates",
                lambda.len(),
                self.nu.len()
            )));
        }
        for (i, (&l, &n)) in lambda.iter().zip(&self.nu).enumerate() {
            if l > n - self.epsilon + SUBCRITICAL_SLACK {
                return Err(Error::InvalidArgument(format!(
                    "node {i}: λ = {l} is not below ν - ε = {}",
                    n - self.epsilon
                )));
            }
        }
        Ok(())
    }

    /// `F(y) = Σ_i h'(ν_i) G(y_i)`.
    pub fn lyapunov(&self, y: &[u32]) -> f64 {
        y.iter()
            .enumerate()
            .map(|(i, &yi)| self.h_prime(i) * self.utility.weight.partial_sum(u64::from(yi)))
            .sum()
    }
}
