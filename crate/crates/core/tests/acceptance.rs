//! End-to-end acceptance criteria. Runs as a plain binary so every criterion
//! prints one PASS/FAIL line, then exits non-zero if any failed.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use latqueue::analysis::{
    bound_multihop_continuous, bound_multihop_discrete, bound_second_moment,
    bound_weighted_moment, drift_exact, drift_scan, exact_stationary, node_average,
    properties, second_moment_constants, stability_sweep, Marginals, MomentSource,
    StabilityVerdict, Verdict,
};
use latqueue::model::{
    ArrivalSpec, InterferenceKernel, LyapunovSpec, Moments, Routing, RoutingDegree, RunControl,
    Scenario, Scheduler, Topology, UtilityPair,
};
use latqueue::rates::{periodic_feasibility, RateFamily};
use latqueue::simulate;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn ring(n: usize) -> Topology {
    Topology::torus(&[n], InterferenceKernel::lattice(1)).unwrap()
}

fn single_node() -> Topology {
    Topology::torus(&[1], InterferenceKernel::isolated(1)).unwrap()
}

fn run_control(seed: u64, replications: usize) -> RunControl {
    RunControl {
        burn_in: 0.1,
        replications,
        batches: 20,
        seed,
        trace_stride: None,
    }
}

fn mean_x(m: &dyn Marginals) -> f64 {
    node_average(m, &|v| f64::from(v))
}

fn single_queue_oracle() -> Check {
    let sc = Scenario::discrete(single_node(), ArrivalSpec::bernoulli(1, 0.5).unwrap(), 1_000_000)
        .with_run(run_control(1, 1));
    let exact = exact_stationary(&sc, 8).map_err(|e| e.to_string())?;
    let ex = exact.expect(0, &|v| f64::from(v));
    ensure((ex - 0.5).abs() < 1e-12, format!("exact E X = {ex}"))?;
    let runs = simulate(&sc).map_err(|e| e.to_string())?;
    let est = runs.estimate(&mean_x).map_err(|e| e.to_string())?;
    ensure(est.batches == 20, "expected 20 batches")?;
    ensure(est.covers(ex), format!("simulated {} ± {} misses {ex}", est.mean, est.half_width))?;
    Ok(format!("exact {ex}, simulated {:.4} ± {:.4}", est.mean, est.half_width))
}

fn mm1_oracle() -> Check {
    let sc = Scenario::continuous(single_node(), ArrivalSpec::poisson(1, 0.5).unwrap(), 1_000_000.0)
        .with_run(run_control(2, 1));
    let exact = exact_stationary(&sc, 60).map_err(|e| e.to_string())?;
    let ex = exact.expect(0, &|v| f64::from(v));
    ensure((ex - 1.0).abs() < 1e-6, format!("exact E X = {ex}"))?;
    let runs = simulate(&sc).map_err(|e| e.to_string())?;
    let est = runs.estimate(&mean_x).map_err(|e| e.to_string())?;
    ensure(est.covers(ex), format!("simulated {} ± {} misses {ex}", est.mean, est.half_width))?;
    Ok(format!(
        "exact {ex:.9}, simulated {:.4} ± {:.4}, self-loops {:.3}",
        est.mean,
        est.half_width,
        runs[0].self_loop_fraction()
    ))
}

fn fairness() -> Check {
    let r = properties::fairness_suite(&ring(8), 100, 1000, 20, 3).map_err(|e| e.to_string())?;
    ensure(r.violations == 0, format!("{} violations", r.violations))?;
    ensure(r.max_equality_gap < 1e-9, format!("equality gap {:e}", r.max_equality_gap))?;
    Ok(format!(
        "{} states x {} witnesses, 0 violations, max relative excess {:.2e}, equality gap {:.1e}",
        r.states, r.trials, r.max_violation, r.max_equality_gap
    ))
}

/// `E[F(X') - F(X)]` by summing over every arrival and service outcome with
/// D2 (independent) probabilities.
fn brute_force_drift(x: &[u32], lambda: f64, psi: &[f64], spec: &LyapunovSpec) -> f64 {
    let n = x.len();
    let f = |y: &[u32]| spec.lyapunov(y);
    let base = f(x);
    let mut total = 0.0;
    for arrivals in 0..1u32 << n {
        for services in 0..1u32 << n {
            let mut p = 1.0;
            let mut y = x.to_vec();
            for i in 0..n {
                let a = arrivals >> i & 1 == 1;
                let s = services >> i & 1 == 1;
                p *= if a { lambda } else { 1.0 - lambda };
                p *= if s { psi[i] } else { 1.0 - psi[i] };
                if s && y[i] == 0 {
                    p = 0.0;
                }
                y[i] = y[i] + u32::from(a) - u32::from(s && x[i] > 0);
            }
            if p > 0.0 {
                total += p * (f(&y) - base);
            }
        }
    }
    total
}

fn drift() -> Check {
    let topo = ring(3);
    let spec = LyapunovSpec::uniform(3, 1.0 / 3.0, 1.0 / 12.0, UtilityPair::quadratic_inverse())
        .map_err(|e| e.to_string())?;
    let lambda = [0.25; 3];
    let mut worst = 0.0f64;
    for a in 0..=4 {
        for b in 0..=4 {
            for c in 0..=4 {
                let x = [a, b, c];
                let psi = RateFamily::Sir.rates(&x, &topo);
                let d = drift_exact(&x, &lambda, &psi, &spec).map_err(|e| e.to_string())?;
                let oracle = brute_force_drift(&x, 0.25, &psi, &spec);
                let err = (d - oracle).abs() / oracle.abs().max(1.0);
                worst = worst.max(err);
                ensure(err <= 1e-12, format!("x = {x:?}: {d} vs enumeration {oracle}"))?;
            }
        }
    }
    let scan = drift_scan(&topo, &lambda, RateFamily::Sir, &spec, 60).map_err(|e| e.to_string())?;
    ensure(scan.certified, format!("no X0 inside the box: {scan:?}"))?;
    Ok(format!(
        "enumeration agrees to {worst:.1e} on 125 states; drift < 0 whenever max x >= X0 = {} \
         ({} of {} states non-negative)",
        scan.x0, scan.nonnegative, scan.states
    ))
}

/// Two sites whose left and right neighbours coincide: the 2-site folding of
/// the ring, with pair weight 2 and symmetric threshold 1/3.
fn two_site_ring() -> Topology {
    Topology::graph(2, &[(0, 1, 2.0)]).unwrap()
}

fn exact_bounds() -> Check {
    let arrivals = ArrivalSpec::bernoulli(2, 0.3).unwrap();
    let sc = Scenario::discrete(two_site_ring(), arrivals.clone(), 1);
    let sol = exact_stationary(&sc, 40).map_err(|e| e.to_string())?;
    let spec = LyapunovSpec::uniform(2, 1.0 / 3.0, 1.0 / 30.0, UtilityPair::quadratic_inverse())
        .map_err(|e| e.to_string())?;
    let weighted = bound_weighted_moment(&sol, &arrivals.means(), &spec).map_err(|e| e.to_string())?;
    let moments: Vec<Moments> = (0..2).map(|i| arrivals.moments(i)).collect();
    let second =
        bound_second_moment(&sol, &moments, spec.nu(), spec.epsilon()).map_err(|e| e.to_string())?;
    assert_eq!(weighted.verdict, Verdict::Holds, "{weighted:?}");
    assert_eq!(second.overall(), Verdict::Holds, "{second:?}");
    let per_node = second.secondary.as_deref().unwrap();
    Ok(format!(
        "residual {:.1e}, tail {:.1e}; weighted {:.3} <= {:.3}; second moment {:.3} <= {:.3}, \
         per-node {:.3} <= {:.3}",
        sol.residual,
        sol.tail_mass,
        weighted.lhs.mean,
        weighted.rhs.mean,
        second.lhs.mean,
        second.rhs.mean,
        per_node.lhs.mean,
        per_node.rhs.mean
    ))
}

fn simulated_second_moment() -> Check {
    let lambda = 0.3;
    let arrivals = ArrivalSpec::bernoulli(16, lambda).unwrap();
    let sc = Scenario::discrete(ring(16), arrivals.clone(), 2_000_000).with_run(run_control(6, 1));
    let bern = arrivals.moments(0);
    let pmf = Moments::of_pmf(&[1.0 - lambda, lambda]);
    let (a, b) = second_moment_constants(&bern);
    let (a2, b2) = second_moment_constants(&pmf);
    ensure(
        (a - 6.0 * lambda * (1.0 - lambda)).abs() < 1e-14 && (b - 6.0 * lambda.powi(3)).abs() < 1e-14,
        format!("A_i = {a}, B_i = {b}"),
    )?;
    ensure((a - a2).abs() < 1e-14 && (b - b2).abs() < 1e-14, "pmf moments disagree")?;
    let runs = simulate(&sc).map_err(|e| e.to_string())?;
    let r = bound_second_moment(&runs, &vec![bern; 16], &[1.0 / 3.0; 16], 1.0 / 30.0)
        .map_err(|e| e.to_string())?;
    let per_node = r.secondary.as_deref().unwrap();
    ensure(r.verdict == Verdict::Holds, format!("{r:?}"))?;
    ensure(per_node.verdict == Verdict::Holds, format!("{per_node:?}"))?;
    Ok(format!(
        "A_i = {a:.4}, B_i = {b:.4}; {:.2} ± {:.2} <= {:.1} ± {:.1}; per-node {:.2} ± {:.2} <= {:.2} ± {:.2}",
        r.lhs.mean,
        r.lhs.half_width,
        r.rhs.mean,
        r.rhs.half_width,
        per_node.lhs.mean,
        per_node.lhs.half_width,
        per_node.rhs.mean,
        per_node.rhs.half_width
    ))
}

fn multi_hop(q: f64) -> Routing {
    Routing::MultiHop {
        exit_probability: q,
        degree: RoutingDegree::Lattice,
    }
}

fn multihop_discrete() -> Check {
    let (lambda, q) = (0.25, 0.5);
    let arrivals = ArrivalSpec::bernoulli(16, lambda * q).unwrap();
    let sc = Scenario::discrete(ring(16), arrivals.clone(), 1_000_000)
        .with_routing(multi_hop(q))
        .with_run(run_control(7, 1));
    let runs = simulate(&sc).map_err(|e| e.to_string())?;
    let second = arrivals.moments(0).second;
    let r = bound_multihop_discrete(second, lambda, q, 2, Some(&runs))
        .map_err(|e| e.to_string())?;
    ensure(r.theoretical.is_some_and(|b| (b - 7.125).abs() < 1e-12), format!("bound {:?}", r.theoretical))?;
    ensure(r.lhs.mean <= 7.125 + r.lhs.half_width, format!("E X = {:?}", r.lhs))?;
    let flow = runs
        .estimate(&|m| (0..m.node_count()).map(|i| m.service_rate(i)).sum::<f64>() / 16.0)
        .map_err(|e| e.to_string())?;
    ensure(flow.covers(lambda), format!("E η = {} ± {}", flow.mean, flow.half_width))?;
    Ok(format!(
        "bound 7.125, E X = {:.3} ± {:.3}, E η = {:.4} ± {:.4}",
        r.lhs.mean, r.lhs.half_width, flow.mean, flow.half_width
    ))
}

fn multihop_continuous() -> Check {
    let (lambda, q) = (0.25, 0.5);
    let sc = Scenario::continuous(ring(16), ArrivalSpec::poisson(16, lambda * q).unwrap(), 200_000.0)
        .with_routing(multi_hop(q))
        .with_run(run_control(8, 1));
    let runs = simulate(&sc).map_err(|e| e.to_string())?;
    let r = bound_multihop_continuous(lambda, q, 2, Some(&runs)).map_err(|e| e.to_string())?;
    ensure(r.theoretical.is_some_and(|b| (b - 6.0).abs() < 1e-12), format!("bound {:?}", r.theoretical))?;
    ensure(r.lhs.mean <= 6.0 + r.lhs.half_width, format!("E X = {:?}", r.lhs))?;
    Ok(format!("bound 6.0, time-averaged E X = {:.3} ± {:.3}", r.lhs.mean, r.lhs.half_width))
}

fn uniform_in_n() -> Check {
    let sizes = [8usize, 16, 32, 64];
    let mut points = Vec::new();
    for (k, &n) in sizes.iter().enumerate() {
        let sc = Scenario::discrete(ring(n), ArrivalSpec::bernoulli(n, 0.3).unwrap(), 4_000_000)
            .with_run(run_control(90 + k as u64, 1));
        let runs = simulate(&sc).map_err(|e| e.to_string())?;
        let e = runs
            .estimate(&|m| node_average(m, &|v| f64::from(v).powi(2)))
            .map_err(|e| e.to_string())?;
        // standard error from the 95% half-width of 20 batches
        points.push(((n as f64).log2(), e.mean, e.half_width / 2.093_024));
    }
    // weighted least squares of E X² on log2 n
    let w: Vec<f64> = points.iter().map(|p| 1.0 / (p.2 * p.2)).collect();
    let sw: f64 = w.iter().sum();
    let xbar = points.iter().zip(&w).map(|(p, w)| w * p.0).sum::<f64>() / sw;
    let ybar = points.iter().zip(&w).map(|(p, w)| w * p.1).sum::<f64>() / sw;
    let sxx: f64 = points.iter().zip(&w).map(|(p, w)| w * (p.0 - xbar).powi(2)).sum();
    let slope = points.iter().zip(&w).map(|(p, w)| w * (p.0 - xbar) * (p.1 - ybar)).sum::<f64>() / sxx;
    let se = (1.0 / sxx).sqrt();
    let z = slope / se;
    ensure(z <= 1.645, format!("slope {slope:.4} ± {se:.4} per doubling (z = {z:.2}); points {points:?}"))?;
    let table: Vec<String> = sizes
        .iter()
        .zip(&points)
        .map(|(n, p)| format!("n={n}: {:.3}±{:.3}", p.1, 1.96 * p.2))
        .collect();
    Ok(format!("{}; slope per doubling {slope:.4} (se {se:.4}, z = {z:.2})", table.join(", ")))
}

fn schedulers() -> Check {
    let weighted = Topology::torus(&[6], InterferenceKernel::symmetric_1d(&[1.0, 0.5, 0.25]).unwrap())
        .unwrap();
    let cases = [
        (ring(3), vec![1, 1, 1]),
        (ring(8), vec![3, 0, 1, 7, 2, 2, 0, 5]),
        (ring(5), vec![1, 4, 0, 0, 9]),
        (weighted, vec![2, 1, 0, 3, 3, 1]),
    ];
    let mut worst = 0.0f64;
    for (k, (topo, x)) in cases.iter().enumerate() {
        let r = properties::scheduler_marginals(x, topo, 100_000, 100 + k as u64)
            .map_err(|e| e.to_string())?;
        ensure(r.max_z_d1 <= 4.0, format!("D1 at {x:?}: {r:?}"))?;
        ensure(r.max_z_diff <= 4.0, format!("D1 vs D2 at {x:?}: {r:?}"))?;
        worst = worst.max(r.max_z_d1).max(r.max_z_diff);
    }
    let sc = Scenario::discrete(ring(16), ArrivalSpec::bernoulli(16, 0.3).unwrap(), 1)
        .with_scheduler(Scheduler::D1);
    let ex = properties::exclusion_check(&sc, 1_000_000, 10).map_err(|e| e.to_string())?;
    ensure(ex.conflicts == 0, format!("{} neighbour conflicts", ex.conflicts))?;
    Ok(format!(
        "max marginal z = {worst:.2} over 4 states; 0 conflicts in {} slots ({} services)",
        ex.slots, ex.services
    ))
}

fn coupling() -> Check {
    let base = Scenario::discrete(ring(8), ArrivalSpec::bernoulli(8, 0.3).unwrap(), 1);
    let mut parts = Vec::new();
    for s in [Scheduler::D1, Scheduler::D2] {
        let r = properties::coupling_suite(&base.clone().with_scheduler(s), 1000, 1000, 10, 11)
            .map_err(|e| e.to_string())?;
        ensure(r.violations == 0, format!("{s:?}: {} violations", r.violations))?;
        parts.push(format!("{s:?}: {} pairs x {} slots, 0 violations", r.pairs, r.slots));
    }
    Ok(parts.join("; "))
}

fn stability_edges() -> Check {
    let template = Scenario::discrete(ring(16), ArrivalSpec::bernoulli(16, 0.3).unwrap(), 200_000)
        .with_run(run_control(12, 2));
    let pts = stability_sweep(&template, &[0.30, 0.40]).map_err(|e| e.to_string())?;
    ensure(pts[0].verdict == StabilityVerdict::Stabilizing, format!("λ = 0.30: {:?}", pts[0]))?;
    ensure(pts[1].verdict == StabilityVerdict::Growing, format!("λ = 0.40: {:?}", pts[1]))?;

    let k = InterferenceKernel::lattice(1);
    let (l1, l2) = (0.9, 0.01);
    let cert = periodic_feasibility(&[l1, l2], &[2], &k).map_err(|e| e.to_string())?;
    ensure(cert.feasible, "period-2 pattern reported infeasible")?;
    // eigenvalue of [[l1, 2 l1], [2 l2, l2]]
    let (tr, det) = (l1 + l2, -3.0 * l1 * l2);
    let rho = (tr + (tr * tr - 4.0 * det).sqrt()) / 2.0;
    ensure((cert.spectral_radius - rho).abs() < 1e-9, format!("ρ = {} vs {rho}", cert.spectral_radius))?;
    let p = cert.witness.clone().unwrap();
    ensure(l1 < p[0] / (p[0] + 2.0 * p[1]) && l2 < p[1] / (p[1] + 2.0 * p[0]), "witness fails")?;
    let delta = 0.03;
    ensure(l1 < 1.0 / (1.0 + 2.0 * delta) && l2 < delta / (delta + 2.0), "p = (1, δ) fails")?;
    let edge = periodic_feasibility(&[1.0 / 3.0], &[1], &k).map_err(|e| e.to_string())?;
    ensure(!edge.feasible && edge.spectral_radius == 1.0, format!("{edge:?}"))?;
    Ok(format!(
        "λ=0.30 {:?} windows {:?}; λ=0.40 {:?} windows {:?}; (0.9, 0.01) feasible ρ = {:.6}; 1/3 infeasible ρ = {}",
        pts[0].verdict, pts[0].windows, pts[1].verdict, pts[1].windows, cert.spectral_radius, edge.spectral_radius
    ))
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Check,
}

fn main() {
    let secs = |s| Some(Duration::from_secs(s));
    let criteria = [
        Criterion { id: 1, name: "single-queue oracle", budget: secs(5), run: single_queue_oracle },
        Criterion { id: 2, name: "M/M/1 oracle", budget: secs(10), run: mm1_oracle },
        Criterion { id: 3, name: "SIR 2-fairness", budget: secs(30), run: fairness },
        Criterion { id: 4, name: "drift exactness and negativity", budget: secs(60), run: drift },
        Criterion { id: 5, name: "moment bounds, exact regime", budget: secs(60), run: exact_bounds },
        Criterion { id: 6, name: "second-moment bound, simulated", budget: secs(120), run: simulated_second_moment },
        Criterion { id: 7, name: "multi-hop bound, discrete", budget: secs(120), run: multihop_discrete },
        Criterion { id: 8, name: "multi-hop bound, continuous", budget: secs(120), run: multihop_continuous },
        Criterion { id: 9, name: "second moment uniform in n", budget: secs(300), run: uniform_in_n },
        Criterion { id: 10, name: "D1 marginals and exclusion", budget: None, run: schedulers },
        Criterion { id: 11, name: "monotone coupling", budget: None, run: coupling },
        Criterion { id: 12, name: "stability region edges", budget: None, run: stability_edges },
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in criteria.iter().filter(|c| filter.is_empty() || filter.contains(&c.id)) {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let elapsed = start.elapsed();
        let outcome = match (outcome, c.budget) {
            (Ok(_), Some(b)) if elapsed > b => Err(format!("took {elapsed:.1?}, budget {b:?}")),
            (o, _) => o,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d.clone()),
            Err(d) => {
                failed += 1;
                ("FAIL", d.clone())
            }
        };
        println!("criterion {:>2} {tag} [{:>6.1?}] {}: {detail}", c.id, elapsed, c.name);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
