//! Exact oracles, estimators, bound calculators and property suites.

pub mod bounds;
pub mod drift;
pub mod estimate;
pub mod exact;
pub mod properties;
pub mod sweep;

pub use bounds::{
    bound_multihop_continuous, bound_multihop_discrete, bound_second_moment,
    bound_weighted_moment, multihop_continuous_value, multihop_discrete_value,
    second_moment_constants, BoundKind, BoundReport, Verdict,
};
pub use drift::{
    aggregated_fairness, bound_crossover, drift_bound, drift_chain, drift_correction,
    drift_exact, drift_exact_for, drift_intermediate, drift_scan, DriftChain, DriftScan,
};
pub use estimate::{
    batch_means, node_average, series_batch_means, Marginals, MomentEstimate, MomentSource,
    MIN_BATCHES,
};
pub use exact::{
    exact_stationary, exact_stationary_auto, exact_stationary_with, generator_stationary,
    SolveMethod, StationaryDistribution,
};
pub use sweep::{stability_sweep, window_verdict, StabilityVerdict, SweepPoint};
