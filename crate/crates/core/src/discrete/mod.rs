//! Slotted dynamics `X(k+1) = X(k) - η(k) + routed(k) + ξ(k)`: services are
//! decided on the slot-start state, then arrivals (and relayed jobs) land.

mod routing;
mod schedule;

pub use routing::{route_multihop, Destination};
pub(crate) use routing::destination;
pub(crate) use schedule::d1_from_priorities;
pub use schedule::{priorities, schedule_d1, schedule_d2, schedule_d2_with};

use crate::error::{Error, Result};
use crate::model::{QueueState, Routing, Scenario, Scheduler, TimeModel};
use crate::rng::{open01, SimRng};
use crate::stats::{Recorder, RunStats};

/// What happened in one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotOutcome {
    pub services: Vec<bool>,
    pub arrivals: Vec<u32>,
    /// Jobs relayed into each node (multi-hop only).
    pub routed_in: Option<Vec<u32>>,
    /// Access priorities (D1 only).
    pub priorities: Option<Vec<f64>>,
}

/// Scratch buffers reused across slots.
#[derive(Debug, Clone)]
struct Workspace {
    u: Vec<f64>,
    psi: Vec<f64>,
    tau: Vec<f64>,
    eta: Vec<bool>,
    xi: Vec<u32>,
    routed: Vec<u32>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self {
            u: vec![0.0; n],
            psi: vec![0.0; n],
            tau: vec![0.0; n],
            eta: vec![false; n],
            xi: vec![0; n],
            routed: vec![0; n],
        }
    }
}

/// One slot in place. Every stream advances by exactly `N` draws per slot
/// regardless of the state, which is what keeps coupled runs aligned.
fn advance(x: &mut [u32], sc: &Scenario, rng: &mut SimRng, ws: &mut Workspace) {
    let topo = &sc.topology;
    for u in ws.u.iter_mut() {
        *u = open01(&mut rng.scheduling);
    }
    match sc.scheduler {
        Scheduler::D1 => {
            schedule::priorities(x, &ws.u, &mut ws.tau);
            schedule::d1_from_priorities(&ws.tau, topo, &mut ws.eta);
        }
        Scheduler::D2 => {
            sc.rates.rates_into(x, topo, &mut ws.psi);
            schedule::d2_from_rates(x, &ws.psi, &ws.u, &mut ws.eta);
        }
    }
    for (i, xi) in ws.xi.iter_mut().enumerate() {
        *xi = sc.arrivals.dist(i).sample(open01(&mut rng.arrivals));
    }
    ws.routed.iter_mut().for_each(|r| *r = 0);
    if let Routing::MultiHop {
        exit_probability: q,
        degree,
    } = sc.routing
    {
        let dim = topo.dimension().unwrap_or(1);
        for i in 0..x.len() {
            let u = open01(&mut rng.routing);
            if !ws.eta[i] {
                continue;
            }
            let neighbours = topo.lattice_neighbours(i).unwrap_or(&[]);
            if let Destination::Node(j) = routing::destination(neighbours, q, degree, dim, u) {
                ws.routed[j] += 1;
            }
        }
    }
    for (i, xi) in x.iter_mut().enumerate() {
        *xi = *xi - u32::from(ws.eta[i]) + ws.routed[i] + ws.xi[i];
    }
}

/// One slot from `x`, returning the new state and the slot's draws.
pub fn step(x: &QueueState, scenario: &Scenario, rng: &mut SimRng) -> Result<(QueueState, SlotOutcome)> {
    if x.len() != scenario.node_count() {
        return Err(Error::InvalidArgument(format!(
            "state has {} entries for {} nodes",
            x.len(),
            scenario.node_count()
        )));
    }
    let mut ws = Workspace::new(x.len());
    let mut next = x.clone();
    advance(&mut next, scenario, rng, &mut ws);
    let outcome = SlotOutcome {
        services: ws.eta,
        arrivals: ws.xi,
        routed_in: matches!(scenario.routing, Routing::MultiHop { .. }).then_some(ws.routed),
        priorities: (scenario.scheduler == Scheduler::D1).then_some(ws.tau),
    };
    Ok((next, outcome))
}

/// A running discrete-time trajectory.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    scenario: &'a Scenario,
    x: Vec<u32>,
    rng: SimRng,
    ws: Workspace,
    slot: u64,
}

impl<'a> Simulator<'a> {
    pub fn new(scenario: &'a Scenario, initial: QueueState, seed: u64) -> Result<Self> {
        scenario.validate()?;
        if initial.len() != scenario.node_count() {
            return Err(Error::InvalidArgument(format!(
                "initial state has {} entries for {} nodes",
                initial.len(),
                scenario.node_count()
            )));
        }
        Ok(Self {
            scenario,
            ws: Workspace::new(initial.len()),
            x: initial.0,
            rng: SimRng::new(seed),
            slot: 0,
        })
    }

    pub fn advance(&mut self) {
        advance(&mut self.x, self.scenario, &mut self.rng, &mut self.ws);
        self.slot += 1;
    }

    pub fn state(&self) -> &[u32] {
        &self.x
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    /// Services decided in the last slot.
    pub fn last_services(&self) -> &[bool] {
        &self.ws.eta
    }
}

/// Simulate one replication from the empty state.
pub fn run(scenario: &Scenario, seed: u64) -> Result<RunStats> {
    run_from(scenario, QueueState::zeros(scenario.node_count()), seed)
}

pub fn run_from(scenario: &Scenario, initial: QueueState, seed: u64) -> Result<RunStats> {
    let slots = match scenario.time {
        TimeModel::Discrete { slots } => slots,
        TimeModel::Continuous { .. } => {
            return Err(Error::InvalidScenario("expected a discrete-time scenario".into()))
        }
    };
    let mut sim = Simulator::new(scenario, initial, seed)?;
    let r = &scenario.run;
    let mut rec = Recorder::new(sim.x.len(), slots as f64, r.burn_in, r.batches, r.trace_stride)?;
    for k in 0..slots {
        let t = k as f64;
        rec.hold(&sim.x, t, t + 1.0);
        sim.advance();
        for (i, &served) in sim.ws.eta.iter().enumerate() {
            if served {
                rec.service(i, t);
            }
        }
    }
    Ok(rec.finish(seed, sim.x, slots, 0))
}
