use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::stats::{BatchStats, RunStats};

/// Fewest batches for which a confidence interval is reported.
pub const MIN_BATCHES: usize = 20;

/// Point estimate with a 95% half-width; `batches == 0` marks an exact value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub mean: f64,
    pub half_width: f64,
    pub batches: usize,
    pub burn_in: f64,
}

impl MomentEstimate {
    pub fn exact(value: f64) -> Self {
        Self {
            mean: value,
            half_width: 0.0,
            batches: 0,
            burn_in: 0.0,
        }
    }

    pub fn is_exact(&self) -> bool {
        self.batches == 0
    }

    pub fn lower(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.half_width
    }

    pub fn covers(&self, value: f64) -> bool {
        self.lower() <= value && value <= self.upper()
    }
}

/// Batch-means estimate with a Student-t 95% interval.
pub fn batch_means(values: &[f64], burn_in: f64) -> Result<MomentEstimate> {
    let n = values.len();
    if n < MIN_BATCHES {
        return Err(Error::InsufficientData(format!(
            "{n} batches, at least {MIN_BATCHES} needed for an interval"
        )));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(MomentEstimate {
        mean,
        half_width: t * (var / n as f64).sqrt(),
        batches: n,
        burn_in,
    })
}

/// Split a raw series into `batches` contiguous batches and estimate its mean.
pub fn series_batch_means(series: &[f64], batches: usize) -> Result<MomentEstimate> {
    if batches == 0 || series.len() < batches {
        return Err(Error::InsufficientData(format!(
            "{} points cannot fill {batches} batches",
            series.len()
        )));
    }
    let means: Vec<f64> = (0..batches)
        .map(|b| {
            let lo = b * series.len() / batches;
            let hi = (b + 1) * series.len() / batches;
            series[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    batch_means(&means, 0.0)
}

/// Per-node stationary (or time-averaged) marginals.
pub trait Marginals {
    fn node_count(&self) -> usize;
    /// `E f(X_i)`.
    fn expect(&self, node: usize, f: &dyn Fn(u32) -> f64) -> f64;
    /// Departures per unit time (per slot in discrete time).
    fn service_rate(&self, node: usize) -> f64;
}

impl Marginals for BatchStats {
    fn node_count(&self) -> usize {
        BatchStats::node_count(self)
    }

    fn expect(&self, node: usize, f: &dyn Fn(u32) -> f64) -> f64 {
        BatchStats::expect(self, node, f)
    }

    fn service_rate(&self, node: usize) -> f64 {
        BatchStats::service_rate(self, node)
    }
}

/// `(1/N) Σ_i E f(X_i)`.
pub fn node_average(m: &dyn Marginals, f: &dyn Fn(u32) -> f64) -> f64 {
    let n = m.node_count();
    (0..n).map(|i| m.expect(i, f)).sum::<f64>() / n as f64
}

/// Anything that can estimate a functional of the marginals.
pub trait MomentSource {
    fn estimate(&self, functional: &dyn Fn(&dyn Marginals) -> f64) -> Result<MomentEstimate>;
    fn node_count(&self) -> usize;
}

impl MomentSource for [RunStats] {
    fn estimate(&self, functional: &dyn Fn(&dyn Marginals) -> f64) -> Result<MomentEstimate> {
        let values: Vec<f64> = self
            .iter()
            .flat_map(|r| r.batches.iter())
            .map(|b| functional(b))
            .collect();
        let burn_in = self.first().map_or(0.0, |r| r.burn_in);
        batch_means(&values, burn_in)
    }

    fn node_count(&self) -> usize {
        self.first().map_or(0, RunStats::node_count)
    }
}

impl MomentSource for Vec<RunStats> {
    fn estimate(&self, functional: &dyn Fn(&dyn Marginals) -> f64) -> Result<MomentEstimate> {
        self.as_slice().estimate(functional)
    }

    fn node_count(&self) -> usize {
        self.as_slice().node_count()
    }
}

impl MomentSource for RunStats {
    fn estimate(&self, functional: &dyn Fn(&dyn Marginals) -> f64) -> Result<MomentEstimate> {
        std::slice::from_ref(self).estimate(functional)
    }

    fn node_count(&self) -> usize {
        RunStats::node_count(self)
    }
}
