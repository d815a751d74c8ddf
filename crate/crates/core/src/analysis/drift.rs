//! One-slot drift of `F(x) = Σ_i h'(ν_i) G(x_i)` and the chain of upper
//! bounds used to show it is negative away from the origin.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ArrivalSpec, LyapunovSpec, Topology, UtilityPair};
use crate::rates::RateFamily;

fn check_lengths(x: &[u32], other: &[f64], spec: &LyapunovSpec) -> Result<()> {
    if x.len() != other.len() || x.len() != spec.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {} queues, {} values, {} reference rates",
            x.len(),
            other.len(),
            spec.len()
        )));
    }
    Ok(())
}

/// `E[F(X(k+1)) - F(X(k)) | X(k) = x]` for bernoulli arrivals with means
/// `lambda` and service probabilities `psi`. Exact for any joint service law
/// with these marginals, since `F` is separable.
pub fn drift_exact(x: &[u32], lambda: &[f64], psi: &[f64], spec: &LyapunovSpec) -> Result<f64> {
    check_lengths(x, lambda, spec)?;
    check_lengths(x, psi, spec)?;
    let w = &spec.utility().weight;
    Ok(x.iter()
        .enumerate()
        .map(|(i, &xi)| {
            let xi = u64::from(xi);
            let (l, p) = (lambda[i], psi[i]);
            spec.h_prime(i) * (l * (1.0 - p) * w.g(xi + 1) - (1.0 - l) * p * w.g(xi))
        })
        .sum())
}

/// [`drift_exact`] with the arrival means read from `arrivals`, which must be
/// bernoulli.
pub fn drift_exact_for(
    x: &[u32],
    arrivals: &ArrivalSpec,
    psi: &[f64],
    spec: &LyapunovSpec,
) -> Result<f64> {
    if !arrivals.is_bernoulli() {
        return Err(Error::InvalidArrivals(
            "the closed-form drift needs bernoulli arrivals".into(),
        ));
    }
    drift_exact(x, &arrivals.means(), psi, spec)
}

/// `Σ_i h'(ν_i) (λ_i g(x_i+1) - ψ_i g(x_i))`.
pub fn drift_intermediate(x: &[u32], lambda: &[f64], psi: &[f64], spec: &LyapunovSpec) -> Result<f64> {
    check_lengths(x, lambda, spec)?;
    check_lengths(x, psi, spec)?;
    let w = &spec.utility().weight;
    Ok(x.iter()
        .enumerate()
        .map(|(i, &xi)| {
            let xi = u64::from(xi);
            spec.h_prime(i) * (lambda[i] * w.g(xi + 1) - psi[i] * w.g(xi))
        })
        .sum())
}

/// `Σ_i h'(ν_i) (-ε g(x_i) + Δ(x_i))`.
pub fn drift_bound(x: &[u32], spec: &LyapunovSpec) -> Result<f64> {
    check_lengths(x, spec.nu(), spec)?;
    let w = &spec.utility().weight;
    Ok(x.iter()
        .enumerate()
        .map(|(i, &xi)| {
            let xi = u64::from(xi);
            spec.h_prime(i) * (-spec.epsilon() * w.g(xi) + w.delta(xi))
        })
        .sum())
}

/// `Σ_i h'(ν_i) (ν_i - ψ_i) g(x_i)`, non-positive in aggregate when `ψ` is
/// the fair allocation and `ν` lies in the rate region.
pub fn drift_correction(x: &[u32], psi: &[f64], spec: &LyapunovSpec) -> Result<f64> {
    check_lengths(x, psi, spec)?;
    let w = &spec.utility().weight;
    Ok(x.iter()
        .enumerate()
        .map(|(i, &xi)| spec.h_prime(i) * (spec.nu()[i] - psi[i]) * w.g(u64::from(xi)))
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftChain {
    pub exact: f64,
    pub intermediate: f64,
    pub bound: f64,
    pub correction: f64,
}

impl DriftChain {
    /// `exact <= intermediate <= bound + correction`, up to a relative `tol`.
    pub fn holds(&self, tol: f64) -> bool {
        let scale = |a: f64, b: f64| tol * a.abs().max(b.abs()).max(1.0);
        self.exact <= self.intermediate + scale(self.exact, self.intermediate)
            && self.intermediate
                <= self.bound + self.correction + scale(self.intermediate, self.bound)
    }
}

pub fn drift_chain(x: &[u32], lambda: &[f64], psi: &[f64], spec: &LyapunovSpec) -> Result<DriftChain> {
    Ok(DriftChain {
        exact: drift_exact(x, lambda, psi, spec)?,
        intermediate: drift_intermediate(x, lambda, psi, spec)?,
        bound: drift_bound(x, spec)?,
        correction: drift_correction(x, psi, spec)?,
    })
}

/// The two sides of the aggregated fairness inequality
/// `Σ g(x_i) h'(ν_i)(ψ_i - ν_i) >= Σ g(x_i)(h(ψ_i) - h(ν_i)) >= 0`
/// over nodes with `x_i > 0`.
pub fn aggregated_fairness(x: &[u32], nu: &[f64], psi: &[f64], utility: &UtilityPair) -> (f64, f64) {
    let mut linear = 0.0;
    let mut concave = 0.0;
    for i in 0..x.len() {
        if x[i] == 0 {
            continue;
        }
        let g = utility.g(u64::from(x[i]));
        linear += g * utility.h_prime(nu[i]) * (psi[i] - nu[i]);
        concave += g * (utility.h(psi[i]) - utility.h(nu[i]));
    }
    (linear, concave)
}

/// Smallest `y` from which `-ε g(y) + Δ(y) < 0` holds up to `limit`.
pub fn bound_crossover(spec: &LyapunovSpec, limit: u64) -> Option<u64> {
    let w = &spec.utility().weight;
    let mut last_nonneg = None;
    for y in 0..=limit {
        if -spec.epsilon() * w.g(y) + w.delta(y) >= 0.0 {
            last_nonneg = Some(y);
        }
    }
    match last_nonneg {
        Some(y) if y == limit => None,
        Some(y) => Some(y + 1),
        None => Some(0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftScan {
    pub max_coordinate: u32,
    pub states: u64,
    /// Smallest `X₀` such that every scanned state with `max_i x_i >= X₀`
    /// has negative drift.
    pub x0: u32,
    /// Whether `X₀` lies inside the scanned box.
    pub certified: bool,
    /// States with non-negative drift.
    pub nonnegative: u64,
    pub largest_drift: f64,
    pub largest_drift_state: Vec<u32>,
}

/// Exhaustive scan of `{0..=max_coordinate}^N` for the region of
/// non-negative exact drift.
pub fn drift_scan(
    topo: &Topology,
    lambda: &[f64],
    rates: RateFamily,
    spec: &LyapunovSpec,
    max_coordinate: u32,
) -> Result<DriftScan> {
    let n = topo.node_count();
    if lambda.len() != n || spec.len() != n {
        return Err(Error::InvalidArgument("scan dimensions do not match the topology".into()));
    }
    let states = (u64::from(max_coordinate) + 1)
        .checked_pow(n as u32)
        .filter(|&s| s <= 1 << 32)
        .ok_or_else(|| Error::InvalidArgument("scan box is too large".into()))?;
    let mut x = vec![0u32; n];
    let mut psi = vec![0.0; n];
    let mut scan = DriftScan {
        max_coordinate,
        states,
        x0: 0,
        certified: true,
        nonnegative: 0,
        largest_drift: f64::NEG_INFINITY,
        largest_drift_state: x.clone(),
    };
    for _ in 0..states {
        rates.rates_into(&x, topo, &mut psi);
        let d = drift_exact(&x, lambda, &psi, spec)?;
        if d > scan.largest_drift {
            scan.largest_drift = d;
            scan.largest_drift_state.clone_from(&x);
        }
        if d >= 0.0 {
            scan.nonnegative += 1;
            let m = x.iter().copied().max().unwrap_or(0);
            scan.x0 = scan.x0.max(m + 1);
        }
        for v in x.iter_mut().rev() {
            if *v < max_coordinate {
                *v += 1;
                break;
            }
            *v = 0;
        }
    }
    scan.certified = scan.x0 <= max_coordinate;
    Ok(scan)
}
