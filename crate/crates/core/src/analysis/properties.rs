//! Randomized property suites: monotone coupling, scheduler marginals,
//! exclusion and independence, and fairness over random states.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::discrete::{d1_from_priorities, priorities, Simulator};
use crate::error::{Error, Result};
use crate::model::{QueueState, Routing, Scenario, Scheduler, Topology};
use crate::rates::{verify_fairness, RateFamily, WitnessSampler, FAIRNESS_TOL};
use crate::rng::{open01, replication_seeds};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingReport {
    pub pairs: usize,
    pub slots: u64,
    /// Pair-slots at which `x* <= x` failed in some coordinate.
    pub violations: u64,
}

/// Start `pairs` ordered pairs `x* <= x` (entries up to `max_initial`) and run
/// each pair for `slots` slots on shared scheduling and arrival streams.
pub fn coupling_suite(
    scenario: &Scenario,
    pairs: usize,
    slots: u64,
    max_initial: u32,
    seed: u64,
) -> Result<CouplingReport> {
    if matches!(scenario.routing, Routing::MultiHop { .. }) {
        return Err(Error::Inapplicable("monotone coupling with multi-hop routing".into()));
    }
    scenario.validate()?;
    let n = scenario.node_count();
    let seeds = replication_seeds(seed, pairs);
    let violations = seeds
        .par_iter()
        .map(|&s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s ^ 0x5eed);
            let upper: Vec<u32> = (0..n).map(|_| rng.gen_range(0..=max_initial)).collect();
            let lower: Vec<u32> = upper.iter().map(|&v| v - rng.gen_range(0..=v)).collect();
            let mut hi = Simulator::new(scenario, QueueState(upper), s)?;
            let mut lo = Simulator::new(scenario, QueueState(lower), s)?;
            let mut bad = 0u64;
            for _ in 0..slots {
                hi.advance();
                lo.advance();
                if lo.state().iter().zip(hi.state()).any(|(a, b)| a > b) {
                    bad += 1;
                }
            }
            Ok(bad)
        })
        .collect::<Result<Vec<u64>>>()?;
    Ok(CouplingReport {
        pairs,
        slots,
        violations: violations.iter().sum(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalReport {
    pub state: Vec<u32>,
    pub slots: u64,
    pub psi: Vec<f64>,
    pub freq_d1: Vec<f64>,
    pub freq_d2: Vec<f64>,
    /// Largest `|freq - ψ| / σ` for each scheduler.
    pub max_z_d1: f64,
    pub max_z_d2: f64,
    /// Largest `|freq_d1 - freq_d2| / (σ √2)`.
    pub max_z_diff: f64,
}

fn z_score(diff: f64, var: f64) -> f64 {
    if var > 0.0 {
        diff.abs() / var.sqrt()
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Service frequencies of D1 and D2 at the fixed state `x` over `slots`
/// independent slots, against the SIR rates.
pub fn scheduler_marginals(x: &[u32], topo: &Topology, slots: u64, seed: u64) -> Result<MarginalReport> {
    if x.len() != topo.node_count() || slots == 0 {
        return Err(Error::InvalidArgument("state length or slot count is wrong".into()));
    }
    let n = x.len();
    let psi = RateFamily::Sir.rates(x, topo);
    let mut rng1 = ChaCha8Rng::seed_from_u64(seed);
    let mut rng2 = ChaCha8Rng::seed_from_u64(seed);
    rng2.set_stream(1);
    let (mut u, mut tau) = (vec![0.0; n], vec![0.0; n]);
    let mut eta = vec![false; n];
    let (mut c1, mut c2) = (vec![0u64; n], vec![0u64; n]);
    for _ in 0..slots {
        u.iter_mut().for_each(|v| *v = open01(&mut rng1));
        priorities(x, &u, &mut tau);
        d1_from_priorities(&tau, topo, &mut eta);
        for (c, &e) in c1.iter_mut().zip(&eta) {
            *c += u64::from(e);
        }
        for i in 0..n {
            c2[i] += u64::from(x[i] > 0 && open01(&mut rng2) < psi[i]);
        }
    }
    let k = slots as f64;
    let freq_d1: Vec<f64> = c1.iter().map(|&c| c as f64 / k).collect();
    let freq_d2: Vec<f64> = c2.iter().map(|&c| c as f64 / k).collect();
    let var: Vec<f64> = psi.iter().map(|p| p * (1.0 - p) / k).collect();
    let max_z = |f: &[f64]| (0..n).map(|i| z_score(f[i] - psi[i], var[i])).fold(0.0, f64::max);
    Ok(MarginalReport {
        state: x.to_vec(),
        slots,
        max_z_d1: max_z(&freq_d1),
        max_z_d2: max_z(&freq_d2),
        max_z_diff: (0..n)
            .map(|i| z_score(freq_d1[i] - freq_d2[i], 2.0 * var[i]))
            .fold(0.0, f64::max),
        psi,
        freq_d1,
        freq_d2,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExclusionReport {
    pub slots: u64,
    /// Slots in which two interfering nodes were both served.
    pub conflicts: u64,
    pub services: u64,
}

/// Run a D1 scenario and count slots where interfering nodes transmit
/// together. Zero is expected for the 0/1 kernel.
pub fn exclusion_check(scenario: &Scenario, slots: u64, seed: u64) -> Result<ExclusionReport> {
    if scenario.scheduler != Scheduler::D1 {
        return Err(Error::InvalidScenario("exclusion check needs scheduler D1".into()));
    }
    let topo = &scenario.topology;
    let mut sim = Simulator::new(scenario, QueueState::zeros(scenario.node_count()), seed)?;
    let (mut conflicts, mut services) = (0u64, 0u64);
    for _ in 0..slots {
        sim.advance();
        let eta = sim.last_services();
        services += eta.iter().filter(|&&e| e).count() as u64;
        let clash = (0..eta.len())
            .any(|i| eta[i] && topo.interferers(i).iter().any(|&(j, _)| eta[j]));
        conflicts += u64::from(clash);
    }
    Ok(ExclusionReport {
        slots,
        conflicts,
        services,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndependenceReport {
    pub slots: u64,
    /// Largest `|r_ij| √slots` over node pairs with non-degenerate rates.
    pub max_z: f64,
}

/// Pairwise correlation of D2 services at the fixed state `x`.
pub fn d2_independence(x: &[u32], topo: &Topology, slots: u64, seed: u64) -> Result<IndependenceReport> {
    if x.len() != topo.node_count() || slots < 2 {
        return Err(Error::InvalidArgument("state length or slot count is wrong".into()));
    }
    let n = x.len();
    let psi = RateFamily::Sir.rates(x, topo);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut count = vec![0.0; n];
    let mut joint = vec![vec![0.0; n]; n];
    let mut eta = vec![0.0; n];
    for _ in 0..slots {
        for i in 0..n {
            eta[i] = f64::from(u8::from(x[i] > 0 && open01(&mut rng) < psi[i]));
            count[i] += eta[i];
        }
        for i in 0..n {
            if eta[i] == 0.0 {
                continue;
            }
            for j in i + 1..n {
                joint[i][j] += eta[j];
            }
        }
    }
    let k = slots as f64;
    let mut max_z = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            let (pi, pj) = (count[i] / k, count[j] / k);
            let (vi, vj) = (pi * (1.0 - pi), pj * (1.0 - pj));
            if vi == 0.0 || vj == 0.0 {
                continue;
            }
            let r = (joint[i][j] / k - pi * pj) / (vi * vj).sqrt();
            max_z = max_z.max(r.abs() * k.sqrt());
        }
    }
    Ok(IndependenceReport { slots, max_z })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FairnessSuiteReport {
    pub states: usize,
    pub trials: usize,
    pub violations: usize,
    pub max_violation: f64,
    pub max_equality_gap: f64,
}

impl FairnessSuiteReport {
    pub fn passes(&self) -> bool {
        self.violations == 0 && self.max_equality_gap <= FAIRNESS_TOL
    }
}

/// SIR fairness at `states` random non-zero states (entries up to
/// `max_queue`), each against `trials` random witnesses.
pub fn fairness_suite(
    topo: &Topology,
    states: usize,
    trials: usize,
    max_queue: u32,
    seed: u64,
) -> Result<FairnessSuiteReport> {
    if max_queue == 0 {
        return Err(Error::InvalidArgument("max_queue must be positive".into()));
    }
    let n = topo.node_count();
    let reports = replication_seeds(seed, states)
        .par_iter()
        .map(|&s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let mut x: Vec<u32> = (0..n).map(|_| rng.gen_range(0..=max_queue)).collect();
            if x.iter().all(|&v| v == 0) {
                let i = rng.gen_range(0..n);
                x[i] = 1;
            }
            verify_fairness(&x, topo, trials, WitnessSampler::default(), &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FairnessSuiteReport {
        states,
        trials,
        violations: reports.iter().map(|r| r.violations).sum(),
        max_violation: reports.iter().map(|r| r.max_violation).fold(f64::NEG_INFINITY, f64::max),
        max_equality_gap: reports.iter().map(|r| r.equality_gap).fold(0.0, f64::max),
    })
}
