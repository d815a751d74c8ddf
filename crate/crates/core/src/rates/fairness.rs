use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{Concave, Topology};
use crate::rates::{interference_load, RateFamily};

/// Log-uniform sampler for positive witness vectors `p`.
#[derive(Debug, Clone, Copy)]
pub struct WitnessSampler {
    pub lo: f64,
    pub hi: f64,
}

impl Default for WitnessSampler {
    fn default() -> Self {
        Self { lo: 0.01, hi: 100.0 }
    }
}

impl WitnessSampler {
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        let (a, b) = (self.lo.ln(), self.hi.ln());
        (0..n).map(|_| rng.gen_range(a..b).exp()).collect()
    }
}

/// Outcome of a randomized utility-maximisation check at a fixed state.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct FairnessReport {
    pub trials: usize,
    /// Largest relative amount by which a random witness beat the rates at `x`
    /// (non-positive when the inequality holds on every trial).
    pub max_violation: f64,
    /// Relative gap between the two sides at `p ∝ x`.
    pub equality_gap: f64,
    /// Trials whose relative violation exceeded the tolerance.
    pub violations: usize,
}

impl FairnessReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.violations == 0 && self.max_violation <= tol && self.equality_gap <= tol
    }
}

pub const FAIRNESS_TOL: f64 = 1e-9;

/// `Σ_{i: x_i > 0} x_i² (Σ_j a_{j-i} p_j) / p_i`: the 2-fair cost of the
/// rates induced by witness `p`.
fn witness_cost(x: &[u32], p: &[f64], topo: &Topology) -> f64 {
    x.iter()
        .enumerate()
        .filter(|&(_, &xi)| xi > 0)
        .map(|(i, &xi)| {
            let xi = f64::from(xi);
            xi * xi * interference_load(p, topo, i) / p[i]
        })
        .sum()
}

fn scaled_state(x: &[u32], c: f64) -> Vec<f64> {
    x.iter().map(|&v| c * f64::from(v)).collect()
}

fn check_state(x: &[u32]) -> Result<()> {
    if x.iter().all(|&v| v == 0) {
        return Err(Error::InvalidArgument(
            "fairness check needs at least one non-empty queue".into(),
        ));
    }
    Ok(())
}

/// Randomized check that SIR rates are 2-fair in the witness-generated set:
/// `Σ x_i² / ψ_i(x) <= Σ x_i² (Σ_j a_{j-i} p_j) / p_i` for random positive `p`,
/// with equality at `p = c x`.
pub fn verify_fairness<R: Rng + ?Sized>(
    x: &[u32],
    topo: &Topology,
    trials: usize,
    sampler: WitnessSampler,
    rng: &mut R,
) -> Result<FairnessReport> {
    check_state(x)?;
    let psi = RateFamily::Sir.rates(x, topo);
    let at_state: f64 = x
        .iter()
        .zip(&psi)
        .filter(|&(&xi, _)| xi > 0)
        .map(|(&xi, &r)| f64::from(xi).powi(2) / r)
        .sum();

    let mut max_violation = f64::NEG_INFINITY;
    let mut violations = 0;
    for _ in 0..trials {
        let p = sampler.sample(x.len(), rng);
        let other = witness_cost(x, &p, topo);
        let v = (at_state - other) / other;
        if v > FAIRNESS_TOL {
            violations += 1;
        }
        max_violation = max_violation.max(v);
    }
    let equality_gap = [1.0, 0.37, 12.5]
        .iter()
        .map(|&c| {
            let other = witness_cost(x, &scaled_state(x, c), topo);
            ((at_state - other) / at_state).abs()
        })
        .fold(0.0, f64::max);
    Ok(FairnessReport {
        trials,
        max_violation,
        equality_gap,
        violations,
    })
}

/// `Σ_{i: x_i > 0} x_i² h̃(μ_i)`.
fn shannon_utility(x: &[u32], mu: &[f64]) -> f64 {
    x.iter()
        .zip(mu)
        .filter(|&(&xi, _)| xi > 0)
        .map(|(&xi, &m)| f64::from(xi).powi(2) * Concave::ShannonCompanion.h(m))
        .sum()
}

fn shannon_witness_rates(p: &[f64], topo: &Topology) -> Vec<f64> {
    (0..p.len())
        .map(|i| (p[i] / interference_load(p, topo, i)).ln_1p())
        .collect()
}

/// Randomized check that Shannon rates maximise `Σ x_i² h̃(μ_i)` over the
/// witness set `μ_i <= log(1 + p_i / Σ_j a_{j-i} p_j)`.
///
/// The utility is evaluated through `h̃` directly on both sides rather than
/// through the SIR reduction, so this is an independent route to the same
/// inequality checked by [`verify_fairness`].
pub fn verify_shannon_fairness<R: Rng + ?Sized>(
    x: &[u32],
    topo: &Topology,
    trials: usize,
    sampler: WitnessSampler,
    rng: &mut R,
) -> Result<FairnessReport> {
    check_state(x)?;
    let at_state = shannon_utility(x, &RateFamily::Shannon.rates(x, topo));
    let scale = at_state.abs();

    let mut max_violation = f64::NEG_INFINITY;
    let mut violations = 0;
    for _ in 0..trials {
        let p = sampler.sample(x.len(), rng);
        let other = shannon_utility(x, &shannon_witness_rates(&p, topo));
        let v = (other - at_state) / scale;
        if v > FAIRNESS_TOL {
            violations += 1;
        }
        max_violation = max_violation.max(v);
    }
    let equality_gap = [1.0, 0.37, 12.5]
        .iter()
        .map(|&c| {
            let p = scaled_state(x, c);
            let mu = shannon_witness_rates(&p, topo);
            ((shannon_utility(x, &mu) - at_state) / scale).abs()
        })
        .fold(0.0, f64::max);
    Ok(FairnessReport {
        trials,
        max_violation,
        equality_gap,
        violations,
    })
}
