use crate::error::{Error, Result};
use crate::model::{ArrivalSpec, Topology};
use crate::rates::RateFamily;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheduler {
    /// Exponential priority race: exclusive, correlated transmissions.
    D1,
    /// Independent thinning with probability `ψ_i(x)`.
    #[default]
    D2,
}

/// Number of lattice neighbours a relayed job chooses among.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RoutingDegree {
    /// The true lattice degree `2d`.
    #[default]
    Lattice,
    /// Each of the `2d` neighbours with probability `(1-q)/2^d`; the
    /// remaining mass exits. Identical to `Lattice` for `d <= 2`.
    PowerOfTwo,
}

impl RoutingDegree {
    /// The degree `D` entering `(1-q)/D` and the `1/(D+1)` threshold.
    pub fn degree(&self, dim: usize) -> usize {
        match self {
            Self::Lattice => 2 * dim,
            Self::PowerOfTwo => 1 << dim,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Routing {
    #[default]
    SingleHop,
    /// A served job exits with probability `exit_probability`, otherwise
    /// moves to a uniformly chosen lattice neighbour.
    MultiHop {
        exit_probability: f64,
        degree: RoutingDegree,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeModel {
    Discrete { slots: u64 },
    Continuous { horizon: f64 },
}

/// Horizon-independent run parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunControl {
    /// Fraction of the horizon discarded before statistics are collected.
    pub burn_in: f64,
    pub replications: usize,
    /// Number of equal batches the post-burn-in horizon is split into.
    pub batches: usize,
    pub seed: u64,
    /// Record `X(k)` every `trace_stride` slots, if set.
    pub trace_stride: Option<u64>,
}

impl Default for RunControl {
    fn default() -> Self {
        Self {
            burn_in: 0.1,
            replications: 1,
            batches: 20,
            seed: 0,
            trace_stride: None,
        }
    }
}

/// Everything needed to simulate one network.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub topology: Topology,
    pub arrivals: ArrivalSpec,
    pub rates: RateFamily,
    pub scheduler: Scheduler,
    pub routing: Routing,
    pub time: TimeModel,
    pub run: RunControl,
}

impl Scenario {
    pub fn discrete(topology: Topology, arrivals: ArrivalSpec, slots: u64) -> Self {
        Self {
            topology,
            arrivals,
            rates: RateFamily::Sir,
            scheduler: Scheduler::D2,
            routing: Routing::SingleHop,
            time: TimeModel::Discrete { slots },
            run: RunControl::default(),
        }
    }

    pub fn continuous(topology: Topology, arrivals: ArrivalSpec, horizon: f64) -> Self {
        Self {
            time: TimeModel::Continuous { horizon },
            ..Self::discrete(topology, arrivals, 0)
        }
    }

    pub fn with_rates(mut self, rates: RateFamily) -> Self {
        self.rates = rates;
        self
    }

    pub fn with_scheduler(mut self, scheduler: Scheduler) -> Self {
        self.scheduler = scheduler;
        self
    }

    pub fn with_routing(mut self, routing: Routing) -> Self {
        self.routing = routing;
        self
    }

    pub fn with_run(mut self, run: RunControl) -> Self {
        self.run = run;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.run.seed = seed;
        self
    }

    pub fn with_burn_in(mut self, burn_in: f64) -> Self {
        self.run.burn_in = burn_in;
        self
    }

    pub fn with_batches(mut self, batches: usize) -> Self {
        self.run.batches = batches;
        self
    }

    pub fn with_replications(mut self, replications: usize) -> Self {
        self.run.replications = replications;
        self
    }

    pub fn node_count(&self) -> usize {
        self.topology.node_count()
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self.time, TimeModel::Continuous { .. })
    }

    /// Exit probability `q` for multi-hop routing.
    pub fn exit_probability(&self) -> Option<f64> {
        match self.routing {
            Routing::MultiHop {
                exit_probability, ..
            } => Some(exit_probability),
            Routing::SingleHop => None,
        }
    }

    /// Long-run per-node throughput: `λ_i` single-hop, `λq / q` multi-hop.
    pub fn throughput(&self) -> Vec<f64> {
        let means = self.arrivals.means();
        match self.exit_probability() {
            Some(q) => means.iter().map(|m| m / q).collect(),
            None => means,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.node_count();
        if self.arrivals.len() != n {
            return Err(Error::InvalidScenario(format!(
                "{} arrival streams for {n} nodes",
                self.arrivals.len()
            )));
        }
        if self.scheduler == Scheduler::D1 && self.rates != RateFamily::Sir && !self.is_continuous()
        {
            return Err(Error::InvalidScenario(
                "scheduler D1 realizes SIR rates only".into(),
            ));
        }
        match self.time {
            TimeModel::Discrete { slots: 0 } => {
                return Err(Error::InvalidScenario("horizon must be at least one slot".into()));
            }
            TimeModel::Continuous { horizon } if !(horizon.is_finite() && horizon > 0.0) => {
                return Err(Error::InvalidScenario(format!(
                    "continuous horizon must be positive, got {horizon}"
                )));
            }
            TimeModel::Continuous { .. } if !self.arrivals.is_poisson() => {
                return Err(Error::InvalidScenario(
                    "continuous time needs poisson arrivals".into(),
                ));
            }
            _ => {}
        }
        if let Routing::MultiHop {
            exit_probability: q,
            ..
        } = self.routing
        {
            if !(q > 0.0 && q <= 1.0) {
                return Err(Error::InvalidScenario(format!(
                    "exit probability must lie in (0, 1], got {q}"
                )));
            }
            if !self.topology.is_lattice_torus() {
                return Err(Error::InvalidScenario(
                    "multi-hop routing needs a torus with the 0/1 lattice kernel".into(),
                ));
            }
            if !self.arrivals.is_symmetric() {
                return Err(Error::InvalidScenario(
                    "multi-hop routing needs the same arrival mean at every node".into(),
                ));
            }
        }
        let r = &self.run;
        if !(0.0..1.0).contains(&r.burn_in) {
            return Err(Error::InvalidScenario(format!(
                "burn-in fraction must lie in [0, 1), got {}",
                r.burn_in
            )));
        }
        if r.replications == 0 || r.batches == 0 {
            return Err(Error::InvalidScenario(
                "replications and batches must be positive".into(),
            ));
        }
        if r.trace_stride == Some(0) {
            return Err(Error::InvalidScenario("trace stride must be positive".into()));
        }
        Ok(())
    }
}
