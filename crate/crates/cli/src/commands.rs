use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use latqueue::analysis::{
    bound_multihop_continuous, bound_multihop_discrete, bound_second_moment,
    bound_weighted_moment, drift_scan, exact_stationary_auto, exact_stationary_with, node_average,
    properties, stability_sweep, window_verdict, BoundKind, BoundReport, Marginals, MomentEstimate,
    MomentSource, StationaryDistribution, Verdict,
};
use latqueue::model::{Routing, Scenario, Scheduler, TimeModel};
use latqueue::rates::{periodic_feasibility, RateFamily};
use latqueue::stats::RunStats;
use serde::Serialize;

use crate::config::{ConfigError, Estimator, Loaded, SuiteConfig};
use crate::record::{Artifacts, Header, Record};

/// What the process should report through its exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Clean,
    Violation,
}

pub struct Ctx {
    pub loaded: Loaded,
    pub out: PathBuf,
    pub command: &'static str,
}

impl Ctx {
    fn header(&self, record: &'static str) -> Header {
        Header {
            record,
            command: self.command,
            digest: self.loaded.digest.clone(),
            version: crate::record::VERSION,
            master_seed: self.loaded.config.run.seed,
        }
    }

    fn record<T: Serialize>(&self, record: &'static str, body: T) -> Record<T> {
        Record {
            header: self.header(record),
            body,
        }
    }

    fn artifacts(&self) -> Result<Artifacts> {
        let mut a = Artifacts::new(&self.out, &self.loaded.digest)?;
        a.write_config(&self.loaded.canonical)?;
        Ok(a)
    }
}

fn mean_queue(m: &dyn Marginals) -> f64 {
    node_average(m, &|v| f64::from(v))
}

fn mean_square(m: &dyn Marginals) -> f64 {
    node_average(m, &|v| f64::from(v).powi(2))
}

fn throughput(m: &dyn Marginals) -> f64 {
    (0..m.node_count()).map(|i| m.service_rate(i)).sum::<f64>() / m.node_count() as f64
}

/// An estimate, or `None` when there are too few batches.
fn estimate(source: &dyn MomentSource, f: &dyn Fn(&dyn Marginals) -> f64) -> Result<Option<MomentEstimate>> {
    match source.estimate(f) {
        Ok(e) => Ok(Some(e)),
        Err(latqueue::Error::InsufficientData(_)) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn show(e: &Option<MomentEstimate>) -> String {
    match e {
        Some(e) if e.is_exact() => format!("{:.6}", e.mean),
        Some(e) => format!("{:.6} ± {:.6}", e.mean, e.half_width),
        None => "n/a (too few batches)".into(),
    }
}

#[derive(Serialize)]
struct ReplicationStats {
    replication: usize,
    seed: u64,
    horizon: f64,
    burn_in: f64,
    events: u64,
    self_loops: u64,
    max_queue: u32,
    mean_queue: f64,
    mean_square: f64,
    throughput: f64,
    quarter_means: [f64; 4],
    node_means: Vec<f64>,
    final_state: Vec<u32>,
}

impl ReplicationStats {
    fn new(replication: usize, r: &RunStats) -> Self {
        let n = r.node_count();
        let node_means: Vec<f64> = (0..n).map(|i| r.expect(i, &|v| f64::from(v))).collect();
        Self {
            replication,
            seed: r.seed,
            horizon: r.horizon,
            burn_in: r.burn_in,
            events: r.events,
            self_loops: r.self_loops,
            max_queue: r.max_queue,
            mean_queue: node_means.iter().sum::<f64>() / n as f64,
            mean_square: (0..n).map(|i| r.expect(i, &|v| f64::from(v).powi(2))).sum::<f64>() / n as f64,
            throughput: (0..n).map(|i| r.service_rate(i)).sum::<f64>() / n as f64,
            quarter_means: r.quarter_means,
            node_means,
            final_state: r.final_state.clone(),
        }
    }
}

#[derive(Serialize)]
struct ReplicationBody {
    statistics: ReplicationStats,
}

#[derive(Serialize)]
struct SummaryStats {
    replications: usize,
    mean_queue: Option<MomentEstimate>,
    mean_square: Option<MomentEstimate>,
    throughput: Option<MomentEstimate>,
    max_queue: u32,
}

#[derive(Serialize)]
struct SummaryBody {
    seeds: Vec<u64>,
    statistics: SummaryStats,
    bounds: Vec<BoundRow>,
    wall_clock_seconds: f64,
    artifacts: Vec<String>,
}

fn default_stride(sc: &Scenario) -> u64 {
    let horizon = match sc.time {
        TimeModel::Discrete { slots } => slots as f64,
        TimeModel::Continuous { horizon } => horizon,
    };
    ((horizon / 1000.0).ceil() as u64).max(1)
}

pub fn simulate(ctx: &Ctx) -> Result<Outcome> {
    let start = Instant::now();
    let cfg = &ctx.loaded.config;
    let mut sc = cfg.scenario()?;
    if sc.run.trace_stride.is_none() {
        sc.run.trace_stride = Some(default_stride(&sc));
    }
    let runs = latqueue::simulate(&sc)?;
    let mut art = ctx.artifacts()?;

    let trace_rows = runs[0].trace.iter().flatten().flat_map(|p| {
        p.state
            .iter()
            .enumerate()
            .map(move |(i, v)| vec![p.slot.to_string(), i.to_string(), v.to_string()])
    });
    let trace = art.write_csv_raw("trace", &["slot", "node", "queue_len"], trace_rows)?;

    let bounds = match &cfg.run.bounds {
        Some(b) if b.estimator == Estimator::Simulation => bound_rows(ctx, &sc, &runs)?,
        _ => Vec::new(),
    };
    let stats = SummaryStats {
        replications: runs.len(),
        mean_queue: estimate(&runs, &mean_queue)?,
        mean_square: estimate(&runs, &mean_square)?,
        throughput: estimate(&runs, &throughput)?,
        max_queue: runs.iter().map(|r| r.max_queue).max().unwrap_or(0),
    };
    println!("scenario {}", ctx.loaded.digest);
    println!("  E X   {}", show(&stats.mean_queue));
    println!("  E X²  {}", show(&stats.mean_square));
    println!("  E η   {}", show(&stats.throughput));
    let outcome = print_bounds(&bounds);

    let replications: Vec<_> = runs
        .iter()
        .enumerate()
        .map(|(k, r)| {
            ctx.record(
                "replication",
                serde_json::to_value(ReplicationBody {
                    statistics: ReplicationStats::new(k, r),
                })
                .expect("serializable"),
            )
        })
        .collect();
    let summary = ctx.record(
        "summary",
        serde_json::to_value(SummaryBody {
            seeds: runs.iter().map(|r| r.seed).collect(),
            statistics: stats,
            bounds,
            wall_clock_seconds: start.elapsed().as_secs_f64(),
            artifacts: art.written(),
        })?,
    );
    let mut records = replications;
    records.push(summary);
    let path = art.write_jsonl("run", &records)?;
    println!("wrote {} and {}", path.display(), trace.display());
    Ok(outcome)
}

/// One line of the bounds table.
#[derive(Debug, Clone, Serialize)]
pub struct BoundRow {
    pub name: String,
    pub theoretical: Option<f64>,
    pub empirical: Option<f64>,
    pub ci: Option<f64>,
    pub verdict: String,
    pub note: Option<String>,
    #[serde(skip)]
    violated: bool,
}

impl BoundRow {
    fn inapplicable(name: &str, note: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            theoretical: None,
            empirical: None,
            ci: None,
            verdict: "inapplicable".into(),
            note: Some(note.into()),
            violated: false,
        }
    }

    fn from_report(name: String, r: &BoundReport) -> Self {
        let multihop = matches!(r.kind, BoundKind::MultiHopDiscrete | BoundKind::MultiHopContinuous);
        Self {
            name,
            theoretical: if multihop { r.theoretical } else { Some(r.rhs.mean) },
            empirical: Some(r.lhs.mean),
            ci: Some(r.lhs.half_width),
            verdict: r.verdict.as_str().into(),
            note: r.note.clone(),
            violated: r.verdict == Verdict::Violated,
        }
    }
}

fn push_report(rows: &mut Vec<BoundRow>, tag: &str, r: &BoundReport) {
    rows.push(BoundRow::from_report(tag.into(), r));
    if let Some(s) = r.secondary.as_deref() {
        rows.push(BoundRow::from_report(format!("{tag}/per_node"), s));
    }
}

fn bound_rows(ctx: &Ctx, sc: &Scenario, source: &dyn MomentSource) -> Result<Vec<BoundRow>> {
    let Some(cfg) = &ctx.loaded.config.run.bounds else {
        return Ok(Vec::new());
    };
    let topo = &sc.topology;
    let lambda = sc.arrivals.means();
    let multihop = matches!(sc.routing, Routing::MultiHop { .. });
    let mut rows = Vec::new();
    for tag in &cfg.theorems {
        let kind = BoundKind::from_tag(tag).expect("checked at load");
        let single_hop_discrete = || -> Option<&'static str> {
            if multihop {
                Some("needs single-hop routing")
            } else if sc.is_continuous() {
                Some("needs discrete time")
            } else {
                None
            }
        };
        match kind {
            BoundKind::WeightedMoment | BoundKind::SecondMoment => {
                if let Some(why) = single_hop_discrete() {
                    rows.push(BoundRow::inapplicable(tag, why));
                    continue;
                }
                if kind == BoundKind::WeightedMoment && !sc.arrivals.is_bernoulli() {
                    rows.push(BoundRow::inapplicable(tag, "needs bernoulli arrivals"));
                    continue;
                }
                let Some(spec) = cfg.lyapunov.build(topo, &lambda)? else {
                    rows.push(BoundRow::inapplicable(tag, "arrival rates leave no slack below ν"));
                    continue;
                };
                let report = if kind == BoundKind::WeightedMoment {
                    bound_weighted_moment(source, &lambda, &spec)?
                } else {
                    let moments: Vec<_> = (0..topo.node_count()).map(|i| sc.arrivals.moments(i)).collect();
                    bound_second_moment(source, &moments, spec.nu(), spec.epsilon())?
                };
                push_report(&mut rows, tag, &report);
            }
            BoundKind::MultiHopDiscrete | BoundKind::MultiHopContinuous => {
                let Routing::MultiHop {
                    exit_probability: q,
                    degree,
                } = sc.routing
                else {
                    rows.push(BoundRow::inapplicable(tag, "needs multi-hop routing"));
                    continue;
                };
                let continuous = kind == BoundKind::MultiHopContinuous;
                if continuous != sc.is_continuous() {
                    let want = if continuous { "continuous" } else { "discrete" };
                    rows.push(BoundRow::inapplicable(tag, format!("needs {want} time")));
                    continue;
                }
                let d = degree.degree(topo.dimension().unwrap_or(1));
                let l = sc.throughput()[0];
                let report = if continuous {
                    bound_multihop_continuous(l, q, d, Some(source))
                } else {
                    bound_multihop_discrete(sc.arrivals.moments(0).second, l, q, d, Some(source))
                };
                match report {
                    Ok(r) => push_report(&mut rows, tag, &r),
                    Err(e) => rows.push(BoundRow::inapplicable(tag, e.to_string())),
                }
            }
        }
    }
    Ok(rows)
}

fn print_bounds(rows: &[BoundRow]) -> Outcome {
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.6}"));
    for r in rows {
        println!(
            "  {:<14} theoretical {:>14}  empirical {:>12} ± {:<10} {}",
            r.name,
            fmt(r.theoretical),
            fmt(r.empirical),
            fmt(r.ci),
            r.verdict
        );
    }
    if rows.iter().any(|r| r.violated) {
        Outcome::Violation
    } else {
        Outcome::Clean
    }
}

fn solve(ctx: &Ctx, sc: &Scenario) -> Result<StationaryDistribution> {
    let e = &ctx.loaded.config.run.exact;
    let sol = match e.cap {
        Some(cap) => exact_stationary_with(sc, cap, e.method.into())?,
        None => exact_stationary_auto(sc, 8)?,
    };
    Ok(sol)
}

pub fn bounds(ctx: &Ctx) -> Result<Outcome> {
    let start = Instant::now();
    let cfg = &ctx.loaded.config;
    let Some(b) = &cfg.run.bounds else {
        return Err(ConfigError("run.bounds: the bounds command needs a theorem list".into()).into());
    };
    let sc = cfg.scenario()?;
    let (rows, seeds) = match b.estimator {
        Estimator::Simulation => {
            let runs = latqueue::simulate(&sc)?;
            (bound_rows(ctx, &sc, &runs)?, runs.iter().map(|r| r.seed).collect())
        }
        Estimator::Exact => (bound_rows(ctx, &sc, &solve(ctx, &sc)?)?, Vec::new()),
    };
    println!("scenario {}", ctx.loaded.digest);
    let outcome = print_bounds(&rows);
    let mut art = ctx.artifacts()?;
    let table = art.write_csv("bounds", &rows)?;
    #[derive(Serialize)]
    struct Body<'a> {
        estimator: Estimator,
        seeds: Vec<u64>,
        bounds: &'a [BoundRow],
        wall_clock_seconds: f64,
    }
    let rec = ctx.record(
        "summary",
        Body {
            estimator: b.estimator,
            seeds,
            bounds: &rows,
            wall_clock_seconds: start.elapsed().as_secs_f64(),
        },
    );
    let path = art.write_jsonl("bounds", &[rec])?;
    println!("wrote {} and {}", table.display(), path.display());
    Ok(outcome)
}

#[derive(Serialize)]
struct SuiteResult {
    suite: &'static str,
    passed: bool,
    detail: serde_json::Value,
}

fn run_suite(sc: &Scenario, suite: &SuiteConfig, seed: u64) -> Result<(bool, serde_json::Value, String)> {
    let topo = &sc.topology;
    let out = match suite {
        SuiteConfig::Fairness {
            states,
            trials,
            max_queue,
        } => {
            let r = properties::fairness_suite(topo, *states, *trials, *max_queue, seed)?;
            let line = format!(
                "{} states x {} witnesses, {} violations, equality gap {:.1e}",
                r.states, r.trials, r.violations, r.max_equality_gap
            );
            (r.passes(), serde_json::to_value(&r)?, line)
        }
        SuiteConfig::Drift {
            max_coordinate,
            lyapunov,
        } => {
            if !sc.arrivals.is_bernoulli() || sc.is_continuous() {
                bail!(ConfigError("run.verify.drift: needs bernoulli arrivals in discrete time".into()));
            }
            let lambda = sc.arrivals.means();
            let spec = lyapunov
                .build(topo, &lambda)?
                .ok_or_else(|| ConfigError("run.verify.drift: ε must be positive".into()))?;
            let r = drift_scan(topo, &lambda, sc.rates, &spec, *max_coordinate)?;
            let line = format!(
                "{} states, {} with non-negative drift, X0 = {}{}",
                r.states,
                r.nonnegative,
                r.x0,
                if r.certified { "" } else { " (outside the scanned box)" }
            );
            (r.certified, serde_json::to_value(&r)?, line)
        }
        SuiteConfig::Coupling {
            pairs,
            slots,
            max_initial,
        } => {
            let r = properties::coupling_suite(sc, *pairs, *slots, *max_initial, seed)?;
            let line = format!("{} pairs x {} slots, {} violations", r.pairs, r.slots, r.violations);
            (r.violations == 0, serde_json::to_value(&r)?, line)
        }
        SuiteConfig::Marginals { states, slots } => {
            let mut reports = Vec::new();
            let mut worst = 0.0f64;
            for (k, x) in states.iter().enumerate() {
                let r = properties::scheduler_marginals(x, topo, *slots, seed.wrapping_add(k as u64))?;
                worst = worst.max(r.max_z_d1).max(r.max_z_diff);
                reports.push(r);
            }
            let line = format!("{} states, largest z-score {worst:.2}", states.len());
            (worst <= 4.0, serde_json::to_value(&reports)?, line)
        }
        SuiteConfig::Exclusion { slots } => {
            let d1 = sc.clone().with_scheduler(Scheduler::D1);
            let r = properties::exclusion_check(&d1, *slots, seed)?;
            let line = format!("{} slots, {} conflicts", r.slots, r.conflicts);
            (r.conflicts == 0, serde_json::to_value(&r)?, line)
        }
        SuiteConfig::Independence { state, slots } => {
            let r = properties::d2_independence(state, topo, *slots, seed)?;
            let line = format!("{} slots, largest pairwise z {:.2}", r.slots, r.max_z);
            (r.max_z <= 4.0, serde_json::to_value(&r)?, line)
        }
        SuiteConfig::Feasibility { lambda, cell } => {
            let Some(kernel) = topo.kernel() else {
                bail!(ConfigError("run.verify.feasibility: needs a lattice kernel".into()));
            };
            let c = periodic_feasibility(lambda, cell, kernel)?;
            // the witness must certify every cell
            let consistent = match (&c.witness, c.feasible) {
                (Some(p), true) => {
                    let folded = latqueue::model::Topology::torus(cell, kernel.clone());
                    let ok_rates = match folded {
                        Ok(t) => RateFamily::Sir.rates(p, &t).iter().zip(lambda).all(|(r, l)| l < r),
                        // cells too small to host the kernel: trust the certificate's own rates
                        Err(_) => c.rates.as_ref().is_some_and(|r| r.iter().zip(lambda).all(|(r, l)| l < r)),
                    };
                    c.spectral_radius < 1.0 && ok_rates
                }
                (None, false) => c.spectral_radius >= 1.0,
                _ => false,
            };
            let line = match &c.witness {
                Some(p) if c.feasible => format!("feasible, ρ = {:.6}, witness p = {p:?}", c.spectral_radius),
                _ => format!("infeasible, ρ = {:.6}", c.spectral_radius),
            };
            (consistent, serde_json::to_value(&c)?, line)
        }
    };
    Ok(out)
}

pub fn verify(ctx: &Ctx) -> Result<Outcome> {
    let cfg = &ctx.loaded.config;
    if cfg.run.verify.is_empty() {
        return Err(ConfigError("run.verify: the verify command needs at least one suite".into()).into());
    }
    let sc = cfg.scenario()?;
    println!("scenario {}", ctx.loaded.digest);
    let mut results = Vec::new();
    for (k, suite) in cfg.run.verify.iter().enumerate() {
        let seed = cfg.run.seed.wrapping_add(k as u64);
        let (passed, detail, line) =
            run_suite(&sc, suite, seed).with_context(|| format!("suite {}", suite.name()))?;
        println!("  {:<13} {}  {line}", suite.name(), if passed { "PASS" } else { "FAIL" });
        results.push(ctx.record(
            "suite",
            SuiteResult {
                suite: suite.name(),
                passed,
                detail,
            },
        ));
    }
    let failed = results.iter().any(|r| !r.body.passed);
    let mut art = ctx.artifacts()?;
    let path = art.write_jsonl("verify", &results)?;
    println!("wrote {}", path.display());
    Ok(if failed { Outcome::Violation } else { Outcome::Clean })
}

pub fn sweep(ctx: &Ctx) -> Result<Outcome> {
    let cfg = &ctx.loaded.config;
    let Some(s) = &cfg.run.sweep else {
        return Err(ConfigError("run.sweep: the sweep command needs `lambdas`".into()).into());
    };
    let sc = cfg.scenario()?;
    // probe each value up front so a bad one is reported as a config error
    for &l in &s.lambdas {
        cfg.arrivals_with_mean(sc.node_count(), l)
            .map_err(|e| ConfigError(format!("run.sweep.lambdas: {e:#}")))?;
    }
    let points = stability_sweep(&sc, &s.lambdas)?;
    println!("scenario {}", ctx.loaded.digest);
    let mut rows = Vec::new();
    for p in &points {
        println!("  λ = {:<8} {:?}", p.lambda, p.verdict);
        for (k, &(early, late)) in p.windows.iter().enumerate() {
            rows.push(vec![
                p.lambda.to_string(),
                k.to_string(),
                early.to_string(),
                late.to_string(),
                serde_json::to_value(window_verdict(early, late))?
                    .as_str()
                    .unwrap_or_default()
                    .to_string(),
            ]);
        }
    }
    let mut art = ctx.artifacts()?;
    let csv = art.write_csv_raw(
        "sweep",
        &["lambda", "replication", "early_mean", "late_mean", "verdict"],
        rows.into_iter(),
    )?;
    let records: Vec<_> = points.iter().map(|p| ctx.record("sweep_point", p)).collect();
    let path = art.write_jsonl("sweep", &records)?;
    println!("wrote {} and {}", csv.display(), path.display());
    Ok(Outcome::Clean)
}

#[derive(Serialize)]
struct ExactBody {
    cap: u32,
    states: usize,
    method: latqueue::analysis::SolveMethod,
    iterations: usize,
    residual: f64,
    tail_mass: f64,
    mean_queue: Vec<f64>,
    mean_square: Vec<f64>,
    service: Vec<f64>,
    /// `max_i |E ψ_i - λ_i|` for single-hop scenarios.
    flow_gap: Option<f64>,
    bounds: Vec<BoundRow>,
}

pub fn exact(ctx: &Ctx) -> Result<Outcome> {
    let cfg = &ctx.loaded.config;
    let sc = cfg.scenario()?;
    let sol = solve(ctx, &sc)?;
    let n = sol.nodes;
    let lambda = sc.arrivals.means();
    let body = ExactBody {
        cap: sol.cap,
        states: sol.pi.len(),
        method: sol.method,
        iterations: sol.iterations,
        residual: sol.residual,
        tail_mass: sol.tail_mass,
        mean_queue: (0..n).map(|i| sol.expect(i, &|v| f64::from(v))).collect(),
        mean_square: (0..n).map(|i| sol.expect(i, &|v| f64::from(v).powi(2))).collect(),
        service: sol.service.clone(),
        flow_gap: matches!(sc.routing, Routing::SingleHop).then(|| {
            sol.service.iter().zip(&lambda).map(|(s, l)| (s - l).abs()).fold(0.0, f64::max)
        }),
        bounds: match &cfg.run.bounds {
            Some(b) if b.estimator == Estimator::Exact => bound_rows(ctx, &sc, &sol)?,
            _ => Vec::new(),
        },
    };
    println!("scenario {}", ctx.loaded.digest);
    println!(
        "  cap {}, {} states, {:?}, residual {:.2e}, tail mass {:.2e}",
        body.cap, body.states, body.method, body.residual, body.tail_mass
    );
    println!("  E X   {:.9}", body.mean_queue.iter().sum::<f64>() / n as f64);
    println!("  E X²  {:.9}", body.mean_square.iter().sum::<f64>() / n as f64);
    if let Some(g) = body.flow_gap {
        println!("  flow balance gap {g:.2e}");
    }
    let outcome = print_bounds(&body.bounds);
    let mut art = ctx.artifacts()?;
    let rows = sol.marginals.iter().enumerate().flat_map(|(i, m)| {
        m.iter()
            .enumerate()
            .map(move |(v, p)| vec![i.to_string(), v.to_string(), p.to_string()])
    });
    let csv = art.write_csv_raw("marginals", &["node", "queue_len", "probability"], rows)?;
    let path = art.write_jsonl("exact", &[ctx.record("summary", body)])?;
    println!("wrote {} and {}", csv.display(), path.display());
    Ok(outcome)
}
