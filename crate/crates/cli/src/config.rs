//! Scenario configuration: parsing, overrides, canonical digest and the
//! mapping onto library types.

use std::path::Path;

use anyhow::{Context, Result};
use latqueue::analysis::SolveMethod;
use latqueue::model::{
    ArrivalSpec, InterferenceKernel, LyapunovSpec, Routing, RoutingDegree,
    RunControl, Scenario, Scheduler, Topology, UtilityPair,
};
use latqueue::rates::RateFamily;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

/// A config that failed to parse or validate. Always maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn invalid<T>(field: &str, msg: impl std::fmt::Display) -> Result<T> {
    Err(ConfigError(format!("{field}: {msg}")).into())
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub topology: TopologyConfig,
    pub arrivals: ArrivalsConfig,
    #[serde(default)]
    pub rates: RatesConfig,
    #[serde(default)]
    pub scheduler: SchedulerConfig,
    #[serde(default)]
    pub routing: RoutingConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub run: RunConfig,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologyConfig {
    Torus {
        #[serde(default)]
        sides: Option<Vec<usize>>,
        #[serde(default)]
        half_widths: Option<Vec<usize>>,
        #[serde(default)]
        kernel: KernelConfig,
    },
    Line {
        length: usize,
        #[serde(default)]
        kernel: KernelConfig,
    },
    Graph {
        nodes: usize,
        /// `[i, j, weight]` triples.
        edges: Vec<(usize, usize, f64)>,
    },
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    #[default]
    Lattice,
    Isolated,
    /// One-dimensional symmetric profile `[a_0, a_1, ...]`.
    Profile { profile: Vec<f64> },
    Custom { entries: Vec<KernelEntry> },
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct KernelEntry {
    pub offset: Vec<i64>,
    pub weight: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArrivalsConfig {
    Bernoulli {
        #[serde(default)]
        mean: Option<f64>,
        /// One mean per node, overriding `mean`.
        #[serde(default)]
        means: Option<Vec<f64>>,
    },
    Pmf {
        pmf: Vec<f64>,
        #[serde(default)]
        truncate: Option<u32>,
    },
    Poisson {
        rate: f64,
        #[serde(default)]
        truncate: Option<u32>,
    },
}

#[derive(Debug, Clone, Copy, Default, Deserialize, Serialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum RatesConfig {
    #[default]
    Sir,
    Shannon,
    Sinr { noise: f64 },
}

#[derive(Debug, Clone, Copy, Default, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerConfig {
    D1,
    #[default]
    D2,
}

#[derive(Debug, Clone, Copy, Default, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RoutingConfig {
    #[default]
    SingleHop,
    MultiHop {
        exit_probability: f64,
        #[serde(default)]
        degree: DegreeConfig,
    },
}

#[derive(Debug, Clone, Copy, Default, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DegreeConfig {
    #[default]
    Lattice,
    PowerOfTwo,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeConfig {
    Discrete { slots: u64 },
    Continuous { horizon: f64 },
}

fn default_burn_in() -> f64 {
    0.1
}
fn default_one() -> usize {
    1
}
fn default_batches() -> usize {
    20
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_one")]
    pub replications: usize,
    #[serde(default = "default_batches")]
    pub batches: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: f64,
    #[serde(default)]
    pub trace_stride: Option<u64>,
    #[serde(default)]
    pub bounds: Option<BoundsConfig>,
    #[serde(default)]
    pub verify: Vec<SuiteConfig>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub exact: ExactConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            replications: 1,
            batches: 20,
            burn_in: default_burn_in(),
            trace_stride: None,
            bounds: None,
            verify: Vec::new(),
            sweep: None,
            exact: ExactConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    #[default]
    Simulation,
    Exact,
}

/// A scalar applied to every node, or one value per node.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
pub enum PerNode {
    Uniform(f64),
    Each(Vec<f64>),
}

impl PerNode {
    fn expand(&self, n: usize, field: &str) -> Result<Vec<f64>> {
        match self {
            Self::Uniform(v) => Ok(vec![*v; n]),
            Self::Each(v) if v.len() == n => Ok(v.clone()),
            Self::Each(v) => invalid(field, format!("{} values for {n} nodes", v.len())),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub theorems: Vec<String>,
    #[serde(default)]
    pub estimator: Estimator,
    #[serde(default)]
    pub lyapunov: LyapunovConfig,
}

/// Reference rates `ν`, slack `ε` and utility pair for drift-based checks.
/// Missing `nu` defaults to the rates at the all-ones witness, and missing
/// `epsilon` to `min_i (ν_i - λ_i)`.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovConfig {
    #[serde(default)]
    pub nu: Option<PerNode>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub utility: UtilityConfig,
}

#[derive(Debug, Clone, Copy, Default, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum UtilityConfig {
    #[default]
    QuadraticInverse,
    AlphaFair {
        alpha: f64,
    },
    ExpLogPower {
        beta: f64,
    },
    StretchedExp {
        gamma: f64,
    },
    ShannonCompanion,
}

impl UtilityConfig {
    pub fn build(&self) -> Result<UtilityPair> {
        let u = match *self {
            Self::QuadraticInverse => UtilityPair::quadratic_inverse(),
            Self::AlphaFair { alpha } => UtilityPair::alpha_fair(alpha)?,
            Self::ExpLogPower { beta } => UtilityPair::exp_log_power(beta)?,
            Self::StretchedExp { gamma } => UtilityPair::stretched_exp(gamma)?,
            Self::ShannonCompanion => UtilityPair::shannon_companion(),
        };
        Ok(u)
    }
}

impl LyapunovConfig {
    /// `None` when the defaulted slack is not positive.
    pub fn build(&self, topo: &Topology, lambda: &[f64]) -> Result<Option<LyapunovSpec>> {
        let n = topo.node_count();
        let nu = match &self.nu {
            Some(v) => v.expand(n, "run.bounds.lyapunov.nu")?,
            None => RateFamily::Sir.rates(&vec![1.0; n], topo),
        };
        let eps = match self.epsilon {
            Some(e) => e,
            None => nu.iter().zip(lambda).map(|(v, l)| v - l).fold(f64::INFINITY, f64::min),
        };
        if !(eps > 0.0) {
            return Ok(None);
        }
        Ok(Some(LyapunovSpec::new(nu, eps, self.utility.build()?)?))
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub lambdas: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExactConfig {
    /// Truncation level; chosen automatically from the tail mass when absent.
    #[serde(default)]
    pub cap: Option<u32>,
    #[serde(default)]
    pub method: MethodConfig,
}

#[derive(Debug, Clone, Copy, Default, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodConfig {
    #[default]
    Auto,
    Dense,
    GaussSeidel,
}

impl From<MethodConfig> for SolveMethod {
    fn from(m: MethodConfig) -> Self {
        match m {
            MethodConfig::Auto => SolveMethod::Auto,
            MethodConfig::Dense => SolveMethod::Dense,
            MethodConfig::GaussSeidel => SolveMethod::GaussSeidel,
        }
    }
}

fn d_states() -> usize {
    100
}
fn d_trials() -> usize {
    1000
}
fn d_max_queue() -> u32 {
    20
}
fn d_pairs() -> usize {
    1000
}
fn d_slots_short() -> u64 {
    1000
}
fn d_max_initial() -> u32 {
    10
}
fn d_slots_marginal() -> u64 {
    100_000
}
fn d_slots_long() -> u64 {
    1_000_000
}
fn d_max_coordinate() -> u32 {
    60
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "suite", rename_all = "snake_case", deny_unknown_fields)]
pub enum SuiteConfig {
    Fairness {
        #[serde(default = "d_states")]
        states: usize,
        #[serde(default = "d_trials")]
        trials: usize,
        #[serde(default = "d_max_queue")]
        max_queue: u32,
    },
    Drift {
        #[serde(default = "d_max_coordinate")]
        max_coordinate: u32,
        #[serde(default)]
        lyapunov: LyapunovConfig,
    },
    Coupling {
        #[serde(default = "d_pairs")]
        pairs: usize,
        #[serde(default = "d_slots_short")]
        slots: u64,
        #[serde(default = "d_max_initial")]
        max_initial: u32,
    },
    Marginals {
        states: Vec<Vec<u32>>,
        #[serde(default = "d_slots_marginal")]
        slots: u64,
    },
    Exclusion {
        #[serde(default = "d_slots_long")]
        slots: u64,
    },
    Independence {
        state: Vec<u32>,
        #[serde(default = "d_slots_marginal")]
        slots: u64,
    },
    Feasibility {
        lambda: Vec<f64>,
        cell: Vec<usize>,
    },
}

impl SuiteConfig {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Fairness { .. } => "fairness",
            Self::Drift { .. } => "drift",
            Self::Coupling { .. } => "coupling",
            Self::Marginals { .. } => "marginals",
            Self::Exclusion { .. } => "exclusion",
            Self::Independence { .. } => "independence",
            Self::Feasibility { .. } => "feasibility",
        }
    }
}

/// Command-line values that replace config entries before hashing.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trace_stride: Option<u64>,
}

/// A parsed config together with its canonical form.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: Config,
    pub canonical: String,
    pub digest: String,
}

/// Serialize with object keys sorted at every level and no whitespace.
pub fn canonicalize(value: &Value) -> String {
    let mut out = String::new();
    write_canonical(value, &mut out);
    out
}

fn write_canonical(value: &Value, out: &mut String) {
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (k, key) in keys.into_iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(key.clone()).to_string());
                out.push(':');
                write_canonical(&map[key], out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (k, item) in items.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        scalar => out.push_str(&scalar.to_string()),
    }
}

pub fn digest(canonical: &str) -> String {
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

pub fn parse(text: &str, overrides: Overrides) -> Result<Loaded> {
    let mut value: Value =
        serde_json::from_str(text).map_err(|e| ConfigError(format!("malformed JSON: {e}")))?;
    if !value.is_object() {
        return invalid("config", "expected a JSON object");
    }
    let run = value
        .as_object_mut()
        .unwrap()
        .entry("run")
        .or_insert_with(|| Value::Object(Default::default()));
    if let Some(run) = run.as_object_mut() {
        if let Some(seed) = overrides.seed {
            run.insert("seed".into(), seed.into());
        }
        if let Some(stride) = overrides.trace_stride {
            run.insert("trace_stride".into(), stride.into());
        }
    }
    let config: Config = serde_path_to_error::deserialize(&value).map_err(|e| {
        let path = e.path().to_string();
        ConfigError(format!("{path}: {}", e.into_inner()))
    })?;
    config.check()?;
    let canonical = canonicalize(&value);
    let digest = digest(&canonical);
    Ok(Loaded {
        config,
        canonical,
        digest,
    })
}

pub fn load(path: &Path, overrides: Overrides) -> Result<Loaded> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    parse(&text, overrides).with_context(|| format!("in {}", path.display()))
}

impl KernelConfig {
    fn build(&self, dim: usize) -> Result<InterferenceKernel> {
        let k = match self {
            Self::Lattice => InterferenceKernel::lattice(dim),
            Self::Isolated => InterferenceKernel::isolated(dim),
            Self::Profile { profile } => {
                if dim != 1 {
                    return invalid("topology.kernel.profile", "profiles are one-dimensional");
                }
                InterferenceKernel::symmetric_1d(profile)?
            }
            Self::Custom { entries } => {
                InterferenceKernel::new(dim, entries.iter().map(|e| (e.offset.clone(), e.weight)))?
            }
        };
        Ok(k)
    }
}

impl Config {
    /// Semantic checks that serde cannot express.
    fn check(&self) -> Result<()> {
        if let ArrivalsConfig::Bernoulli { mean, means } = &self.arrivals {
            let values: Vec<f64> = match (mean, means) {
                (_, Some(m)) => m.clone(),
                (Some(m), None) => vec![*m],
                (None, None) => return invalid("arrivals", "bernoulli needs `mean` or `means`"),
            };
            if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && **v < 1.0)) {
                return invalid("arrivals.mean", format!("bernoulli mean must lie in [0, 1), got {v}"));
            }
        }
        if let TopologyConfig::Torus {
            sides, half_widths, ..
        } = &self.topology
        {
            if sides.is_some() == half_widths.is_some() {
                return invalid("topology", "a torus needs exactly one of `sides` or `half_widths`");
            }
        }
        if let Some(b) = &self.run.bounds {
            for t in &b.theorems {
                if latqueue::analysis::BoundKind::from_tag(t).is_none() {
                    return invalid(
                        "run.bounds.theorems",
                        format!("unknown theorem `{t}`, expected one of thm22, thm23, thm41, thm55"),
                    );
                }
            }
        }
        if let Some(s) = &self.run.sweep {
            if s.lambdas.is_empty() {
                return invalid("run.sweep.lambdas", "at least one value is needed");
            }
        }
        self.scenario().map(|_| ())
    }

    pub fn topology(&self) -> Result<Topology> {
        let t = match &self.topology {
            TopologyConfig::Torus {
                sides: Some(s),
                kernel,
                ..
            } => Topology::torus(s, kernel.build(s.len())?)?,
            TopologyConfig::Torus {
                half_widths: Some(h),
                kernel,
                ..
            } => Topology::torus_half_widths(h, kernel.build(h.len())?)?,
            TopologyConfig::Torus { .. } => return invalid("topology", "missing torus size"),
            TopologyConfig::Line { length, kernel } => Topology::line(*length, kernel.build(1)?)?,
            TopologyConfig::Graph { nodes, edges } => Topology::graph(*nodes, edges)?,
        };
        Ok(t)
    }

    pub fn arrivals(&self, n: usize) -> Result<ArrivalSpec> {
        let a = match &self.arrivals {
            ArrivalsConfig::Bernoulli { means: Some(m), .. } => ArrivalSpec::bernoulli_each(m)?,
            ArrivalsConfig::Bernoulli { mean, .. } => ArrivalSpec::bernoulli(n, mean.unwrap_or(0.0))?,
            ArrivalsConfig::Pmf { pmf, truncate } => {
                let a = ArrivalSpec::pmf(n, pmf.clone())?;
                truncate.map_or(Ok(a.clone()), |k| a.truncated(k))?
            }
            ArrivalsConfig::Poisson { rate, truncate } => {
                let a = ArrivalSpec::poisson(n, *rate)?;
                truncate.map_or(Ok(a.clone()), |k| a.truncated(k))?
            }
        };
        Ok(a)
    }

    /// Rebuild the arrivals with every node's mean set to `lambda`, keeping
    /// the family.
    pub fn arrivals_with_mean(&self, n: usize, lambda: f64) -> Result<ArrivalSpec> {
        let a = match &self.arrivals {
            ArrivalsConfig::Poisson { .. } => ArrivalSpec::poisson(n, lambda)?,
            ArrivalsConfig::Bernoulli { .. } => ArrivalSpec::bernoulli(n, lambda)?,
            ArrivalsConfig::Pmf { .. } => {
                return invalid("arrivals", "a sweep needs bernoulli or poisson arrivals")
            }
        };
        Ok(a)
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let topo = self.topology()?;
        let arrivals = self.arrivals(topo.node_count())?;
        let rates = match self.rates {
            RatesConfig::Sir => RateFamily::Sir,
            RatesConfig::Shannon => RateFamily::Shannon,
            RatesConfig::Sinr { noise } => RateFamily::sinr(noise)?,
        };
        let scheduler = match self.scheduler {
            SchedulerConfig::D1 => Scheduler::D1,
            SchedulerConfig::D2 => Scheduler::D2,
        };
        let routing = match self.routing {
            RoutingConfig::SingleHop => Routing::SingleHop,
            RoutingConfig::MultiHop {
                exit_probability,
                degree,
            } => Routing::MultiHop {
                exit_probability,
                degree: match degree {
                    DegreeConfig::Lattice => RoutingDegree::Lattice,
                    DegreeConfig::PowerOfTwo => RoutingDegree::PowerOfTwo,
                },
            },
        };
        let r = &self.run;
        let run = RunControl {
            burn_in: r.burn_in,
            replications: r.replications,
            batches: r.batches,
            seed: r.seed,
            trace_stride: r.trace_stride,
        };
        let sc = match self.time {
            TimeConfig::Discrete { slots } => Scenario::discrete(topo, arrivals, slots),
            TimeConfig::Continuous { horizon } => Scenario::continuous(topo, arrivals, horizon),
        }
        .with_rates(rates)
        .with_scheduler(scheduler)
        .with_routing(routing)
        .with_run(run);
        sc.validate()?;
        Ok(sc)
    }
}
