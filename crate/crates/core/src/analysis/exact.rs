//! Stationary distributions of small truncated chains by direct linear solve.
//!
//! Queues are capped at `K`: an arrival that would push a queue above `K` is
//! discarded. The discrete kernel uses scheduler D2, under which services are
//! conditionally independent and the one-slot kernel is a product over nodes.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::analysis::estimate::{Marginals, MomentEstimate, MomentSource};
use crate::error::{Error, Result};
use crate::model::{ArrivalDist, Routing, Scenario, Scheduler};

pub const MAX_STATES: usize = 1_000_000;
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Target mass at the cap for [`exact_stationary_auto`].
pub const TAIL_TOL: f64 = 1e-8;
/// Largest chain solved by dense LU under [`SolveMethod::Auto`].
pub const DENSE_LIMIT: usize = 3000;
const GS_MAX_SWEEPS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Auto,
    Dense,
    GaussSeidel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryDistribution {
    pub cap: u32,
    pub nodes: usize,
    pub continuous: bool,
    /// Probabilities indexed by `Σ_i x_i (K+1)^(N-1-i)`.
    pub pi: Vec<f64>,
    /// `marginals[i][v] = P(X_i = v)`.
    pub marginals: Vec<Vec<f64>>,
    /// `Σ_x π(x) ψ_i(x)`: service probability per slot, or departure rate.
    pub service: Vec<f64>,
    /// `‖πP - π‖∞`.
    pub residual: f64,
    /// `max_i P(X_i = K)`.
    pub tail_mass: f64,
    pub method: SolveMethod,
    pub iterations: usize,
}

impl StationaryDistribution {
    pub fn state(&self, index: usize) -> Vec<u32> {
        decode(index, self.nodes, self.cap)
    }

    /// `E f(X)` for a joint functional.
    pub fn expect_state(&self, f: impl Fn(&[u32]) -> f64) -> f64 {
        let mut x = vec![0; self.nodes];
        self.pi
            .iter()
            .enumerate()
            .map(|(s, &p)| {
                decode_into(s, self.cap, &mut x);
                p * f(&x)
            })
            .sum()
    }
}

impl Marginals for StationaryDistribution {
    fn node_count(&self) -> usize {
        self.nodes
    }

    fn expect(&self, node: usize, f: &dyn Fn(u32) -> f64) -> f64 {
        self.marginals[node]
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(v, &p)| p * f(v as u32))
            .sum()
    }

    fn service_rate(&self, node: usize) -> f64 {
        self.service[node]
    }
}

impl MomentSource for StationaryDistribution {
    fn estimate(&self, functional: &dyn Fn(&dyn Marginals) -> f64) -> Result<MomentEstimate> {
        Ok(MomentEstimate::exact(functional(self)))
    }

    fn node_count(&self) -> usize {
        self.nodes
    }
}

fn decode_into(mut s: usize, cap: u32, x: &mut [u32]) {
    let base = cap as usize + 1;
    for v in x.iter_mut().rev() {
        *v = (s % base) as u32;
        s /= base;
    }
}

fn decode(s: usize, nodes: usize, cap: u32) -> Vec<u32> {
    let mut x = vec![0; nodes];
    decode_into(s, cap, &mut x);
    x
}

fn state_count(nodes: usize, cap: u32) -> Result<usize> {
    let states = (u128::from(cap) + 1).checked_pow(nodes as u32).unwrap_or(u128::MAX);
    if states > MAX_STATES as u128 {
        return Err(Error::StateSpaceTooLarge {
            states,
            limit: MAX_STATES,
        });
    }
    Ok(states as usize)
}

/// Sparse transition rows: `rows[s]` lists `(target, probability)`.
type Rows = Vec<Vec<(usize, f64)>>;

fn arrival_pmf(dist: &ArrivalDist, cap: u32) -> Vec<f64> {
    match dist.truncated(cap + 1) {
        ArrivalDist::Bernoulli(l) => vec![1.0 - l, l],
        ArrivalDist::Pmf(p) => p,
        ArrivalDist::Poisson(_) => unreachable!("truncation always yields a pmf"),
    }
}

fn check_scenario(sc: &Scenario) -> Result<()> {
    sc.validate()?;
    if matches!(sc.routing, Routing::MultiHop { .. }) {
        return Err(Error::Inapplicable("exact solve with multi-hop routing".into()));
    }
    if !sc.is_continuous() && sc.scheduler != Scheduler::D2 {
        return Err(Error::Inapplicable(
            "exact discrete solve with scheduler D1 (its kernel is not a product)".into(),
        ));
    }
    Ok(())
}

fn discrete_rows(sc: &Scenario, cap: u32, states: usize) -> Rows {
    let n = sc.node_count();
    let base = cap as usize + 1;
    let pmfs: Vec<Vec<f64>> = (0..n).map(|i| arrival_pmf(sc.arrivals.dist(i), cap)).collect();
    let mut x = vec![0u32; n];
    let mut psi = vec![0.0; n];
    let mut per_node: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
    let mut rows = Vec::with_capacity(states);
    for s in 0..states {
        decode_into(s, cap, &mut x);
        sc.rates.rates_into(&x, &sc.topology, &mut psi);
        for i in 0..n {
            let out = &mut per_node[i];
            out.clear();
            let lo = x[i].saturating_sub(1);
            let mut probs = vec![0.0; (cap - lo) as usize + 1];
            for (eta, pe) in [(0u32, 1.0 - psi[i]), (1, psi[i])] {
                if pe == 0.0 {
                    continue;
                }
                for (k, &pk) in pmfs[i].iter().enumerate() {
                    let v = (x[i] - eta + k as u32).min(cap);
                    probs[(v - lo) as usize] += pe * pk;
                }
            }
            out.extend(
                probs
                    .iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(k, &p)| (lo + k as u32, p)),
            );
        }
        let mut row = Vec::new();
        let mut idx = vec![0usize; n];
        'outer: loop {
            let mut target = 0usize;
            let mut p = 1.0;
            for i in 0..n {
                let (v, pv) = per_node[i][idx[i]];
                target = target * base + v as usize;
                p *= pv;
            }
            row.push((target, p));
            for i in (0..n).rev() {
                idx[i] += 1;
                if idx[i] < per_node[i].len() {
                    continue 'outer;
                }
                idx[i] = 0;
            }
            break;
        }
        rows.push(row);
    }
    rows
}

/// Uniformized rows of the continuous chain, or the generator's off-diagonal
/// rates when `generator` is set (self-loops then omitted).
fn continuous_rows(sc: &Scenario, cap: u32, states: usize, generator: bool) -> Rows {
    let n = sc.node_count();
    let lambda = sc.arrivals.means();
    let uniform = lambda.iter().sum::<f64>() + n as f64 * sc.rates.max_rate();
    let scale = if generator { 1.0 } else { 1.0 / uniform };
    let stride: Vec<usize> = (0..n).map(|i| (cap as usize + 1).pow((n - 1 - i) as u32)).collect();
    let mut x = vec![0u32; n];
    let mut psi = vec![0.0; n];
    let mut rows = Vec::with_capacity(states);
    for s in 0..states {
        decode_into(s, cap, &mut x);
        sc.rates.rates_into(&x, &sc.topology, &mut psi);
        let mut row = Vec::with_capacity(2 * n + 1);
        let mut out = 0.0;
        for i in 0..n {
            if x[i] < cap && lambda[i] > 0.0 {
                row.push((s + stride[i], lambda[i] * scale));
                out += lambda[i] * scale;
            }
            if psi[i] > 0.0 {
                row.push((s - stride[i], psi[i] * scale));
                out += psi[i] * scale;
            }
        }
        if !generator {
            row.push((s, 1.0 - out));
        }
        rows.push(row);
    }
    rows
}

fn residual(rows: &Rows, pi: &[f64]) -> f64 {
    let mut next = vec![0.0; pi.len()];
    for (s, row) in rows.iter().enumerate() {
        for &(t, p) in row {
            next[t] += pi[s] * p;
        }
    }
    next.iter().zip(pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

fn normalise(pi: &mut [f64]) {
    for v in pi.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= total);
}

/// Solve `π A = 0, Σ π = 1` where `A = P - I` (stochastic rows) or the
/// generator (rate rows, diagonal implied).
fn dense_solve(rows: &Rows, generator: bool) -> Result<Vec<f64>> {
    let n = rows.len();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for (s, row) in rows.iter().enumerate() {
        let mut out = 0.0;
        for &(t, p) in row {
            a[(t, s)] += p;
            if generator {
                out += p;
            }
        }
        a[(s, s)] -= if generator { out } else { 1.0 };
    }
    for c in 0..n {
        a[(0, c)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[0] = 1.0;
    let pi = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::SingularSolve("dense system is singular".into()))?;
    let mut pi: Vec<f64> = pi.iter().copied().collect();
    normalise(&mut pi);
    Ok(pi)
}

fn gauss_seidel(rows: &Rows) -> Result<(Vec<f64>, usize)> {
    let n = rows.len();
    let mut incoming: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut stay = vec![0.0; n];
    for (s, row) in rows.iter().enumerate() {
        for &(t, p) in row {
            if t == s {
                stay[s] += p;
            } else {
                incoming[t].push((s, p));
            }
        }
    }
    let mut pi = vec![1.0 / n as f64; n];
    let mut last = f64::INFINITY;
    for sweep in 1..=GS_MAX_SWEEPS {
        let mut change = 0.0f64;
        for j in 0..n {
            let leave = 1.0 - stay[j];
            if leave <= 0.0 {
                continue;
            }
            let v = incoming[j].iter().map(|&(i, p)| pi[i] * p).sum::<f64>() / leave;
            change = change.max((v - pi[j]).abs());
            pi[j] = v;
        }
        let total: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|v| *v /= total);
        last = change / total;
        if last < 1e-15 || (sweep % 50 == 0 && residual(rows, &pi) < RESIDUAL_TOL * 1e-3) {
            return Ok((pi, sweep));
        }
    }
    Err(Error::NoConvergence {
        iterations: GS_MAX_SWEEPS,
        change: last,
    })
}

fn summarise(
    sc: &Scenario,
    cap: u32,
    rows: &Rows,
    pi: Vec<f64>,
    method: SolveMethod,
    iterations: usize,
) -> Result<StationaryDistribution> {
    let n = sc.node_count();
    let res = residual(rows, &pi);
    if !(res < RESIDUAL_TOL) {
        return Err(Error::SingularSolve(format!(
            "global balance residual {res:e} exceeds {RESIDUAL_TOL:e}"
        )));
    }
    let mut marginals = vec![vec![0.0; cap as usize + 1]; n];
    let mut service = vec![0.0; n];
    let mut x = vec![0u32; n];
    let mut psi = vec![0.0; n];
    for (s, &p) in pi.iter().enumerate() {
        decode_into(s, cap, &mut x);
        sc.rates.rates_into(&x, &sc.topology, &mut psi);
        for i in 0..n {
            marginals[i][x[i] as usize] += p;
            service[i] += p * psi[i];
        }
    }
    let tail_mass = marginals.iter().map(|m| m[cap as usize]).fold(0.0, f64::max);
    Ok(StationaryDistribution {
        cap,
        nodes: n,
        continuous: sc.is_continuous(),
        pi,
        marginals,
        service,
        residual: res,
        tail_mass,
        method,
        iterations,
    })
}

fn transition_rows(sc: &Scenario, cap: u32) -> Result<Rows> {
    check_scenario(sc)?;
    if cap == 0 {
        return Err(Error::InvalidArgument("cap must be at least 1".into()));
    }
    let states = state_count(sc.node_count(), cap)?;
    Ok(if sc.is_continuous() {
        continuous_rows(sc, cap, states, false)
    } else {
        discrete_rows(sc, cap, states)
    })
}

/// Stationary distribution of the chain truncated at `cap`: `πP = π` in
/// discrete time, the uniformized `P` in continuous time.
pub fn exact_stationary(scenario: &Scenario, cap: u32) -> Result<StationaryDistribution> {
    exact_stationary_with(scenario, cap, SolveMethod::Auto)
}

pub fn exact_stationary_with(
    scenario: &Scenario,
    cap: u32,
    method: SolveMethod,
) -> Result<StationaryDistribution> {
    let rows = transition_rows(scenario, cap)?;
    let method = match method {
        SolveMethod::Auto if rows.len() <= DENSE_LIMIT => SolveMethod::Dense,
        SolveMethod::Auto => SolveMethod::GaussSeidel,
        m => m,
    };
    let (pi, iterations) = match method {
        SolveMethod::Dense => (dense_solve(&rows, false)?, 1),
        _ => gauss_seidel(&rows)?,
    };
    summarise(scenario, cap, &rows, pi, method, iterations)
}

/// Solve `πQ = 0` on the generator directly (continuous scenarios only).
pub fn generator_stationary(scenario: &Scenario, cap: u32) -> Result<StationaryDistribution> {
    check_scenario(scenario)?;
    if !scenario.is_continuous() {
        return Err(Error::Inapplicable("generator solve of a discrete scenario".into()));
    }
    let states = state_count(scenario.node_count(), cap)?;
    let pi = dense_solve(&continuous_rows(scenario, cap, states, true), true)?;
    // residual is measured on the uniformized chain, which shares π
    let rows = continuous_rows(scenario, cap, states, false);
    summarise(scenario, cap, &rows, pi, SolveMethod::Dense, 1)
}

/// Double the cap from `start` until the mass at the cap drops below
/// [`TAIL_TOL`].
pub fn exact_stationary_auto(scenario: &Scenario, start: u32) -> Result<StationaryDistribution> {
    let mut cap = start.max(1);
    loop {
        let sol = exact_stationary(scenario, cap)?;
        if sol.tail_mass < TAIL_TOL {
            return Ok(sol);
        }
        let next = cap.saturating_mul(2);
        if state_count(scenario.node_count(), next).is_err() {
            return Err(Error::InsufficientData(format!(
                "tail mass {:e} at cap {cap}, and doubling exceeds the state limit",
                sol.tail_mass
            )));
        }
        cap = next;
    }
}
