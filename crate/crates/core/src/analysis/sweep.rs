use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ArrivalSpec, Scenario};
use crate::simulate;

/// Relative change between the two late windows below which a run counts as
/// stabilizing.
pub const STABLE_CHANGE: f64 = 0.10;
/// Ratio of the last window to the one before it from which a run counts as
/// growing. Linear growth from an empty start gives exactly 7/5.
pub const GROWTH_RATIO: f64 = 1.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityVerdict {
    Stabilizing,
    Growing,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub verdict: StabilityVerdict,
    /// Per replication: mean queue over `[T/2, 3T/4]` and `[3T/4, T]`.
    pub windows: Vec<(f64, f64)>,
}

/// Heuristic two-window verdict for one replication.
pub fn window_verdict(early: f64, late: f64) -> StabilityVerdict {
    if early == 0.0 && late == 0.0 {
        return StabilityVerdict::Stabilizing;
    }
    if late >= GROWTH_RATIO * early {
        return StabilityVerdict::Growing;
    }
    if (late - early).abs() < STABLE_CHANGE * early {
        return StabilityVerdict::Stabilizing;
    }
    StabilityVerdict::Inconclusive
}

/// Run `template` with symmetric arrival mean `λ` for every `λ` in the grid
/// and classify each as stabilizing or growing. A verdict is only issued
/// when every replication agrees.
pub fn stability_sweep(template: &Scenario, lambdas: &[f64]) -> Result<Vec<SweepPoint>> {
    if !template.arrivals.is_symmetric() {
        return Err(Error::InvalidScenario("stability sweep needs symmetric arrivals".into()));
    }
    let n = template.node_count();
    lambdas
        .par_iter()
        .map(|&lambda| {
            let arrivals = if template.is_continuous() {
                ArrivalSpec::poisson(n, lambda)?
            } else {
                ArrivalSpec::bernoulli(n, lambda)?
            };
            let sc = Scenario {
                arrivals,
                ..template.clone()
            };
            let runs = simulate(&sc)?;
            let windows: Vec<(f64, f64)> = runs
                .iter()
                .map(|r| (r.quarter_means[2], r.quarter_means[3]))
                .collect();
            let verdicts: Vec<_> = windows.iter().map(|&(a, b)| window_verdict(a, b)).collect();
            let verdict = if verdicts.iter().all(|v| *v == verdicts[0]) {
                verdicts[0]
            } else {
                StabilityVerdict::Inconclusive
            };
            Ok(SweepPoint {
                lambda,
                verdict,
                windows,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{InterferenceKernel, Topology};

    #[test]
    fn window_rules() {
        assert_eq!(window_verdict(0.0, 0.0), StabilityVerdict::Stabilizing);
        assert_eq!(window_verdict(5.0, 7.0), StabilityVerdict::Growing);
        assert_eq!(window_verdict(5.0, 5.2), StabilityVerdict::Stabilizing);
        assert_eq!(window_verdict(5.0, 4.0), StabilityVerdict::Inconclusive);
        assert_eq!(window_verdict(5.0, 5.9), StabilityVerdict::Inconclusive);
    }

    #[test]
    fn zero_load_is_stable() {
        let t = Topology::torus(&[4], InterferenceKernel::lattice(1)).unwrap();
        let sc = Scenario::discrete(t, ArrivalSpec::bernoulli(4, 0.1).unwrap(), 1000);
        let pts = stability_sweep(&sc, &[0.0]).unwrap();
        assert_eq!(pts[0].verdict, StabilityVerdict::Stabilizing);
    }
}
