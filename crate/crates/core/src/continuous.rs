//! Continuous-time dynamics by uniformization: a Poisson clock of rate
//! `Λ = Σ_i λ_i + N ψ_max` proposes events, each accepted as an arrival, a
//! departure or a self-loop.

use serde::Serialize;

use crate::discrete::{destination, Destination};
use crate::error::{Error, Result};
use crate::model::{QueueState, Routing, Scenario, TimeModel};
use crate::rng::{open01, SimRng};
use crate::stats::{Recorder, RunStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Arrival { node: usize },
    Departure { node: usize, to: Option<usize> },
    SelfLoop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventRecord {
    pub time: f64,
    pub kind: EventKind,
}

/// Clock rate and exogenous arrival rates of a continuous scenario.
#[derive(Debug, Clone)]
pub struct Uniformization {
    pub rate: f64,
    pub arrival_total: f64,
    pub psi_max: f64,
    arrival_cum: Vec<f64>,
}

impl Uniformization {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        let mut acc = 0.0;
        let arrival_cum: Vec<f64> = scenario
            .arrivals
            .means()
            .into_iter()
            .map(|l| {
                acc += l;
                acc
            })
            .collect();
        let psi_max = scenario.rates.max_rate();
        let rate = acc + scenario.node_count() as f64 * psi_max;
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidScenario(format!("uniformization rate {rate} is not positive")));
        }
        Ok(Self {
            rate,
            arrival_total: acc,
            psi_max,
            arrival_cum,
        })
    }
}

/// Pick and apply the event proposed by one clock tick.
fn apply(x: &mut [u32], sc: &Scenario, uni: &Uniformization, rng: &mut SimRng) -> EventKind {
    let v = open01(&mut rng.scheduling) * uni.rate;
    if v < uni.arrival_total {
        let node = uni
            .arrival_cum
            .partition_point(|&c| c <= v)
            .min(x.len() - 1);
        x[node] += 1;
        return EventKind::Arrival { node };
    }
    let w = v - uni.arrival_total;
    let node = ((w / uni.psi_max) as usize).min(x.len() - 1);
    let r = w - node as f64 * uni.psi_max;
    if r >= sc.rates.rate(x, &sc.topology, node) {
        return EventKind::SelfLoop;
    }
    x[node] -= 1;
    let to = match sc.routing {
        Routing::SingleHop => None,
        Routing::MultiHop {
            exit_probability: q,
            degree,
        } => {
            let u = open01(&mut rng.routing);
            let neighbours = sc.topology.lattice_neighbours(node).unwrap_or(&[]);
            let dim = sc.topology.dimension().unwrap_or(1);
            match destination(neighbours, q, degree, dim, u) {
                Destination::Node(j) => {
                    x[j] += 1;
                    Some(j)
                }
                Destination::Exit => None,
            }
        }
    };
    EventKind::Departure { node, to }
}

/// One uniformized transition from `x` at time `t`.
pub fn uniformized_step(
    x: &QueueState,
    scenario: &Scenario,
    rng: &mut SimRng,
    t: f64,
) -> Result<(QueueState, EventRecord)> {
    let uni = Uniformization::new(scenario)?;
    if x.len() != scenario.node_count() {
        return Err(Error::InvalidArgument(format!(
            "state has {} entries for {} nodes",
            x.len(),
            scenario.node_count()
        )));
    }
    let dt = -open01(&mut rng.arrivals).ln() / uni.rate;
    let mut next = x.clone();
    let kind = apply(&mut next, scenario, &uni, rng);
    Ok((next, EventRecord { time: t + dt, kind }))
}

/// Simulate one replication from the empty state.
pub fn run_ct(scenario: &Scenario, seed: u64) -> Result<RunStats> {
    run_ct_from(scenario, QueueState::zeros(scenario.node_count()), seed)
}

pub fn run_ct_from(scenario: &Scenario, initial: QueueState, seed: u64) -> Result<RunStats> {
    let horizon = match scenario.time {
        TimeModel::Continuous { horizon } => horizon,
        TimeModel::Discrete { .. } => {
            return Err(Error::InvalidScenario("expected a continuous-time scenario".into()))
        }
    };
    scenario.validate()?;
    if initial.len() != scenario.node_count() {
        return Err(Error::InvalidArgument("initial state has the wrong length".into()));
    }
    let uni = Uniformization::new(scenario)?;
    let r = &scenario.run;
    let mut rec = Recorder::new(initial.len(), horizon, r.burn_in, r.batches, r.trace_stride)?;
    let mut rng = SimRng::new(seed);
    let mut x = initial.0;
    let (mut t, mut events, mut loops) = (0.0, 0u64, 0u64);
    loop {
        let next = t - open01(&mut rng.arrivals).ln() / uni.rate;
        rec.hold(&x, t, next.min(horizon));
        if next >= horizon {
            break;
        }
        t = next;
        events += 1;
        match apply(&mut x, scenario, &uni, &mut rng) {
            EventKind::Departure { node, .. } => rec.service(node, t),
            EventKind::SelfLoop => loops += 1,
            EventKind::Arrival { .. } => {}
        }
    }
    Ok(rec.finish(seed, x, events, loops))
}
