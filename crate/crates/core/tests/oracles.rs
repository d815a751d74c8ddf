//! Solver and simulator outputs checked against independently computed values.

use latqueue::analysis::{
    exact_stationary, generator_stationary, multihop_continuous_value, multihop_discrete_value,
    Marginals, MomentSource,
};
use latqueue::model::{ArrivalSpec, InterferenceKernel, RunControl, Scenario, Topology};
use latqueue::rates::{periodic_feasibility, symmetric_threshold};
use latqueue::simulate;

fn single_node() -> Topology {
    Topology::torus(&[1], InterferenceKernel::isolated(1)).unwrap()
}

fn mean_queue(m: &dyn Marginals) -> f64 {
    (0..m.node_count()).map(|i| m.expect(i, &|v| f64::from(v))).sum::<f64>() / m.node_count() as f64
}

// X' = X - 1{X>0} + A has E X = (λ + E A² - 2λ²) / (2(1-λ)).
#[test]
fn slotted_queue_with_batch_arrivals() {
    let pmf = vec![0.5, 0.3, 0.2];
    let (l, a2) = (0.7, 0.3 + 4.0 * 0.2);
    let closed = (l + a2 - 2.0 * l * l) / (2.0 * (1.0 - l));
    let sc = Scenario::discrete(single_node(), ArrivalSpec::pmf(1, pmf).unwrap(), 1);
    let sol = exact_stationary(&sc, 120).unwrap();
    assert!(sol.tail_mass < 1e-12, "{}", sol.tail_mass);
    assert!((sol.expect(0, &|v| f64::from(v)) - closed).abs() < 1e-9);
    assert!((sol.service[0] - l).abs() < 1e-9);
}

#[test]
fn mm1_mean_and_idle_probability() {
    for rho in [0.3, 0.6] {
        let sc = Scenario::continuous(single_node(), ArrivalSpec::poisson(1, rho).unwrap(), 1.0);
        let sol = exact_stationary(&sc, 120).unwrap();
        assert!((sol.expect(0, &|v| f64::from(v)) - rho / (1.0 - rho)).abs() < 1e-8, "ρ = {rho}");
        assert!((sol.marginals[0][0] - (1.0 - rho)).abs() < 1e-9);
    }
}

/// Stationary law of the two-node D2 chain by plain power iteration, with
/// transitions enumerated from scratch.
fn two_node_power_iteration(weight: f64, lambda: f64, cap: u32) -> Vec<f64> {
    let k = cap as usize + 1;
    let idx = |a: usize, b: usize| a * k + b;
    let sir = |own: f64, other: f64| if own == 0.0 { 0.0 } else { own / (own + weight * other) };
    let mut pi = vec![0.0; k * k];
    pi[0] = 1.0;
    for _ in 0..100_000 {
        let mut next = vec![0.0; k * k];
        for a in 0..k {
            for b in 0..k {
                let p = pi[idx(a, b)];
                if p == 0.0 {
                    continue;
                }
                let (fa, fb) = (a as f64, b as f64);
                let (sa, sb) = (sir(fa, fb), sir(fb, fa));
                for (ea, pa) in [(1usize, sa), (0, 1.0 - sa)] {
                    for (eb, pb) in [(1usize, sb), (0, 1.0 - sb)] {
                        for (xa, qa) in [(1usize, lambda), (0, 1.0 - lambda)] {
                            for (xb, qb) in [(1usize, lambda), (0, 1.0 - lambda)] {
                                let w = p * pa * pb * qa * qb;
                                if w == 0.0 {
                                    continue;
                                }
                                let na = (a - ea + xa).min(cap as usize);
                                let nb = (b - eb + xb).min(cap as usize);
                                next[idx(na, nb)] += w;
                            }
                        }
                    }
                }
            }
        }
        let change: f64 = next.iter().zip(&pi).map(|(x, y)| (x - y).abs()).sum();
        pi = next;
        if change < 1e-14 {
            break;
        }
    }
    pi
}

#[test]
fn two_node_exact_matches_power_iteration() {
    let cap = 20;
    for weight in [1.0, 2.0] {
        let topo = Topology::graph(2, &[(0, 1, weight)]).unwrap();
        let sc = Scenario::discrete(topo, ArrivalSpec::bernoulli(2, 0.2).unwrap(), 1);
        let sol = exact_stationary(&sc, cap).unwrap();
        let oracle = two_node_power_iteration(weight, 0.2, cap);
        for (s, p) in sol.pi.iter().enumerate() {
            let x = sol.state(s);
            let q = oracle[x[0] as usize * (cap as usize + 1) + x[1] as usize];
            assert!((p - q).abs() < 1e-10, "weight {weight}, state {x:?}: {p} vs {q}");
        }
    }
}

#[test]
fn frozen_two_node_moments() {
    // from two_node_power_iteration at cap 40
    let topo = Topology::graph(2, &[(0, 1, 2.0)]).unwrap();
    let sc = Scenario::discrete(topo, ArrivalSpec::bernoulli(2, 0.3).unwrap(), 1);
    let sol = exact_stationary(&sc, 40).unwrap();
    let ex = mean_queue(&sol);
    assert!((ex - FROZEN_FOLDED_RING_MEAN).abs() < 1e-9, "{ex}");
    let est = sol.estimate(&mean_queue).unwrap();
    assert!(est.is_exact() && est.mean == ex);
}

const FROZEN_FOLDED_RING_MEAN: f64 = 1.693_858_591_683;

#[test]
fn generator_and_uniformized_agree_on_two_nodes() {
    let topo = Topology::graph(2, &[(0, 1, 1.0)]).unwrap();
    let sc = Scenario::continuous(topo, ArrivalSpec::poisson(2, 0.3).unwrap(), 1.0);
    let a = exact_stationary(&sc, 30).unwrap();
    let b = generator_stationary(&sc, 30).unwrap();
    let gap = a.pi.iter().zip(&b.pi).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(gap < 1e-10, "{gap}");
}

#[test]
fn continuous_simulation_matches_exact() {
    let topo = Topology::graph(2, &[(0, 1, 1.0)]).unwrap();
    let sc = Scenario::continuous(topo, ArrivalSpec::poisson(2, 0.3).unwrap(), 200_000.0).with_run(
        RunControl {
            seed: 17,
            ..RunControl::default()
        },
    );
    let exact = mean_queue(&exact_stationary(&sc, 40).unwrap());
    let est = simulate(&sc).unwrap().estimate(&mean_queue).unwrap();
    assert!(
        (est.mean - exact).abs() <= 3.0 * est.half_width,
        "{} ± {} vs {exact}",
        est.mean,
        est.half_width
    );
}

#[test]
fn multihop_closed_forms() {
    assert!((multihop_discrete_value(0.125, 0.25, 0.5, 2).unwrap() - 7.125).abs() < 1e-12);
    assert!((multihop_continuous_value(0.25, 0.5, 2).unwrap() - 6.0).abs() < 1e-12);
    // square lattice, D = 4: (0.05 + 0.2 + 0.1 - 0.005) / 0.1
    assert!((multihop_discrete_value(0.05, 0.1, 0.5, 4).unwrap() - 3.45).abs() < 1e-12);
    // 0.1 / (0.5 * 0.1)
    assert!((multihop_continuous_value(0.1, 0.5, 4).unwrap() - 2.0).abs() < 1e-12);
    assert!(multihop_continuous_value(0.2, 0.5, 4).is_err());
}

#[test]
fn lattice_thresholds() {
    assert!((symmetric_threshold(&InterferenceKernel::lattice(1)) - 1.0 / 3.0).abs() < 1e-15);
    assert!((symmetric_threshold(&InterferenceKernel::lattice(2)) - 0.2).abs() < 1e-15);
    let k = InterferenceKernel::lattice(2);
    let inside = periodic_feasibility(&[0.19], &[1, 1], &k).unwrap();
    let outside = periodic_feasibility(&[0.21], &[1, 1], &k).unwrap();
    assert!(inside.feasible && !outside.feasible);
    assert!((inside.spectral_radius - 0.95).abs() < 1e-9);
}

