//! Trajectory statistics shared by the discrete and continuous simulators.
//!
//! Occupancy is kept as per-batch, per-node histograms weighted by time, so
//! any marginal functional `E f(X_i)` can be estimated after the run.

use serde::Serialize;

use crate::error::{Error, Result};

/// One batch of the post-burn-in horizon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchStats {
    pub duration: f64,
    /// `occupancy[i][v]`: time node `i` spent with `v` jobs.
    pub occupancy: Vec<Vec<f64>>,
    /// Completed services (departures) per node.
    pub services: Vec<u64>,
}

impl BatchStats {
    fn new(nodes: usize) -> Self {
        Self {
            duration: 0.0,
            occupancy: vec![Vec::new(); nodes],
            services: vec![0; nodes],
        }
    }

    pub fn node_count(&self) -> usize {
        self.occupancy.len()
    }

    /// Time average of `f(X_i)` over the batch.
    pub fn expect(&self, node: usize, f: &dyn Fn(u32) -> f64) -> f64 {
        if self.duration == 0.0 {
            return 0.0;
        }
        let total: f64 = self.occupancy[node]
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(v, &w)| w * f(v as u32))
            .sum();
        total / self.duration
    }

    /// Services per unit time at `node`.
    pub fn service_rate(&self, node: usize) -> f64 {
        if self.duration == 0.0 {
            0.0
        } else {
            self.services[node] as f64 / self.duration
        }
    }
}

/// State snapshot for CSV traces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TracePoint {
    pub slot: u64,
    pub state: Vec<u32>,
}

/// Everything recorded by one replication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunStats {
    pub seed: u64,
    pub horizon: f64,
    pub burn_in: f64,
    pub batches: Vec<BatchStats>,
    /// Node-averaged mean queue over each quarter of `[0, horizon]`, burn-in
    /// included.
    pub quarter_means: [f64; 4],
    pub final_state: Vec<u32>,
    pub max_queue: u32,
    /// Clock ticks: slots in discrete time, uniformized events in continuous time.
    pub events: u64,
    /// Uniformized self-loops (always zero in discrete time).
    pub self_loops: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TracePoint>>,
}

impl RunStats {
    pub fn node_count(&self) -> usize {
        self.final_state.len()
    }

    pub fn self_loop_fraction(&self) -> f64 {
        if self.events == 0 {
            0.0
        } else {
            self.self_loops as f64 / self.events as f64
        }
    }

    /// Time average of `f(X_i)` over the whole post-burn-in horizon.
    pub fn expect(&self, node: usize, f: &dyn Fn(u32) -> f64) -> f64 {
        let total: f64 = self.batches.iter().map(|b| b.expect(node, f) * b.duration).sum();
        let time: f64 = self.batches.iter().map(|b| b.duration).sum();
        if time == 0.0 {
            0.0
        } else {
            total / time
        }
    }

    pub fn service_rate(&self, node: usize) -> f64 {
        let served: u64 = self.batches.iter().map(|b| b.services[node]).sum();
        let time: f64 = self.batches.iter().map(|b| b.duration).sum();
        if time == 0.0 {
            0.0
        } else {
            served as f64 / time
        }
    }
}

/// Splits a piecewise-constant trajectory into batches, quarters and trace
/// points as it is fed.
#[derive(Debug)]
pub(crate) struct Recorder {
    horizon: f64,
    burn_in: f64,
    batch_len: f64,
    batches: Vec<BatchStats>,
    quarter_area: [f64; 4],
    trace_stride: Option<u64>,
    next_trace: u64,
    trace: Vec<TracePoint>,
    max_queue: u32,
}

impl Recorder {
    pub fn new(
        nodes: usize,
        horizon: f64,
        burn_in_fraction: f64,
        batches: usize,
        trace_stride: Option<u64>,
    ) -> Result<Self> {
        let burn_in = horizon * burn_in_fraction;
        let span = horizon - burn_in;
        if !(span > 0.0) || batches == 0 {
            return Err(Error::InsufficientData(format!(
                "nothing to record after a burn-in of {burn_in} on a horizon of {horizon}"
            )));
        }
        Ok(Self {
            horizon,
            burn_in,
            batch_len: span / batches as f64,
            batches: (0..batches).map(|_| BatchStats::new(nodes)).collect(),
            quarter_area: [0.0; 4],
            trace_stride,
            next_trace: 0,
            trace: Vec::new(),
            max_queue: 0,
        })
    }

    fn batch_of(&self, t: f64) -> Option<usize> {
        if t < self.burn_in || t >= self.horizon {
            return None;
        }
        let b = ((t - self.burn_in) / self.batch_len) as usize;
        Some(b.min(self.batches.len() - 1))
    }

    /// State `x` held over `[t0, t1)`.
    pub fn hold(&mut self, x: &[u32], t0: f64, t1: f64) {
        let t1 = t1.min(self.horizon);
        if t1 <= t0 {
            return;
        }
        if let Some(stride) = self.trace_stride {
            while (self.next_trace as f64) < t1 {
                self.trace.push(TracePoint {
                    slot: self.next_trace,
                    state: x.to_vec(),
                });
                self.next_trace += stride;
            }
        }
        let mut total = 0u64;
        for &v in x {
            total += u64::from(v);
            self.max_queue = self.max_queue.max(v);
        }
        let mean = total as f64 / x.len() as f64;
        let quarter = self.horizon / 4.0;
        let mut t = t0;
        while t < t1 {
            let q = ((t / quarter) as usize).min(3);
            let end = if q == 3 { t1 } else { t1.min(quarter * (q + 1) as f64) };
            self.quarter_area[q] += mean * (end - t);
            t = end;
        }

        let mut t = t0.max(self.burn_in);
        while t < t1 {
            let b = match self.batch_of(t) {
                Some(b) => b,
                None => break,
            };
            let end = if b + 1 == self.batches.len() {
                t1
            } else {
                t1.min(self.burn_in + self.batch_len * (b + 1) as f64)
            };
            let dt = end - t;
            let batch = &mut self.batches[b];
            batch.duration += dt;
            for (occ, &v) in batch.occupancy.iter_mut().zip(x) {
                let v = v as usize;
                if occ.len() <= v {
                    occ.resize(v + 1, 0.0);
                }
                occ[v] += dt;
            }
            t = end;
        }
    }

    /// A service completion at `node` at time `t`.
    pub fn service(&mut self, node: usize, t: f64) {
        if let Some(b) = self.batch_of(t) {
            self.batches[b].services[node] += 1;
        }
    }

    pub fn finish(self, seed: u64, final_state: Vec<u32>, events: u64, self_loops: u64) -> RunStats {
        let quarter = self.horizon / 4.0;
        let max_queue = final_state.iter().copied().fold(self.max_queue, u32::max);
        RunStats {
            seed,
            horizon: self.horizon,
            burn_in: self.burn_in,
            batches: self.batches,
            quarter_means: self.quarter_area.map(|a| a / quarter),
            final_state,
            max_queue,
            events,
            self_loops,
            trace: self.trace_stride.map(|_| self.trace),
        }
    }
}
