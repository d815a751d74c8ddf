//! Weight functions `g` and concave utilities `h` of the fairness objective
//! `Σ_i g(x_i) h(μ_i)`, plus sampled checks of the growth and concavity
//! conditions they must satisfy.

use crate::error::{Error, Result};

/// Horizon of the sampled growth check on `g`.
pub const CONDITION_G_HORIZON: u64 = 10_000;
/// Relative tolerance used by the sampled condition checks.
pub const CONDITION_TOL: f64 = 1e-9;

/// The queue-length weight `g: Z+ -> [0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight {
    /// `g(y) = y^α`.
    Power { alpha: f64 },
    /// `g(y) = exp((ln y)^β)` for `y >= 1`, `g(0) = 0`.
    ExpLogPower { beta: f64 },
    /// `g(y) = exp(y^γ)` with `0 < γ < 1`.
    StretchedExp { gamma: f64 },
}

impl Weight {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Power { alpha } => alpha.is_finite() && alpha > 0.0,
            Self::ExpLogPower { beta } => beta.is_finite() && beta > 0.0,
            Self::StretchedExp { gamma } => gamma > 0.0 && gamma < 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidUtility(format!("parameter out of range in {self:?}")))
        }
    }

    pub fn g(&self, y: u64) -> f64 {
        match *self {
            Self::Power { alpha } => (y as f64).powf(alpha),
            _ => self.ln_g(y).exp(),
        }
    }

    /// `ln g(y)`, finite where `g` would overflow.
    pub fn ln_g(&self, y: u64) -> f64 {
        let yf = y as f64;
        match *self {
            Self::Power { alpha } => alpha * yf.ln(),
            Self::ExpLogPower { .. } if y == 0 => f64::NEG_INFINITY,
            Self::ExpLogPower { beta } => yf.ln().powf(beta),
            Self::StretchedExp { gamma } => yf.powf(gamma),
        }
    }

    /// `Δ(y) = g(y+1) - g(y)`.
    pub fn delta(&self, y: u64) -> f64 {
        self.g(y + 1) - self.g(y)
    }

    /// `G(z) = Σ_{y=0}^{z} g(y)`.
    pub fn partial_sum(&self, z: u64) -> f64 {
        (0..=z).map(|y| self.g(y)).sum()
    }

    fn sample_start(&self) -> u64 {
        match self {
            Self::StretchedExp { .. } => 0,
            _ => 1,
        }
    }
}

/// The concave rate utility `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Concave {
    /// `h(y) = y^(1-α) / (1-α)`, `α > 0`, `α ≠ 1`.
    Power { alpha: f64 },
    /// `h(y) = ln y`.
    Log,
    /// `h̃(y) = -1 / (e^y - 1)`, the companion of Shannon-type rates.
    ShannonCompanion,
}

impl Concave {
    fn validate(&self) -> Result<()> {
        match *self {
            Self::Power { alpha } if !(alpha.is_finite() && alpha > 0.0 && alpha != 1.0) => Err(
                Error::InvalidUtility(format!("power utility needs α > 0, α ≠ 1, got {alpha}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn h(&self, y: f64) -> f64 {
        match *self {
            Self::Power { alpha } => y.powf(1.0 - alpha) / (1.0 - alpha),
            Self::Log => y.ln(),
            Self::ShannonCompanion => -1.0 / y.exp_m1(),
        }
    }

    pub fn h_prime(&self, y: f64) -> f64 {
        match *self {
            Self::Power { alpha } => y.powf(-alpha),
            Self::Log => 1.0 / y,
            Self::ShannonCompanion => {
                let em1 = y.exp_m1();
                y.exp() / (em1 * em1)
            }
        }
    }
}

/// Outcome of a sampled condition check.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub holds: bool,
    /// For the growth check: the point beyond which `g(y+1)/g(y) - 1` never increases.
    pub settle_point: u64,
    pub detail: String,
}

/// A weight/utility pair `(g, h)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityPair {
    pub weight: Weight,
    pub utility: Concave,
}

impl UtilityPair {
    pub fn new(weight: Weight, utility: Concave) -> Result<Self> {
        weight.validate()?;
        utility.validate()?;
        Ok(Self { weight, utility })
    }

    /// α-fair: `g = y^α` with `h = y^(1-α)/(1-α)`, or `h = ln` at `α = 1`.
    pub fn alpha_fair(alpha: f64) -> Result<Self> {
        let utility = if alpha == 1.0 {
            Concave::Log
        } else {
            Concave::Power { alpha }
        };
        Self::new(Weight::Power { alpha }, utility)
    }

    /// `g = y²`, `h = -1/y`: the 2-fair pair.
    pub fn quadratic_inverse() -> Self {
        Self::alpha_fair(2.0).expect("2-fair pair is valid")
    }

    pub fn exp_log_power(beta: f64) -> Result<Self> {
        Self::new(Weight::ExpLogPower { beta }, Concave::Log)
    }

    pub fn stretched_exp(gamma: f64) -> Result<Self> {
        Self::new(Weight::StretchedExp { gamma }, Concave::Log)
    }

    /// `g = y²` with `h̃(y) = -1/(e^y - 1)`.
    pub fn shannon_companion() -> Self {
        Self {
            weight: Weight::Power { alpha: 2.0 },
            utility: Concave::ShannonCompanion,
        }
    }

    pub fn g(&self, y: u64) -> f64 {
        self.weight.g(y)
    }

    pub fn delta(&self, y: u64) -> f64 {
        self.weight.delta(y)
    }

    pub fn h(&self, y: f64) -> f64 {
        self.utility.h(y)
    }

    pub fn h_prime(&self, y: f64) -> f64 {
        self.utility.h_prime(y)
    }

    /// Sampled growth check on `g` over `0..=horizon`: strictly increasing,
    /// finite ratios, and `g(y+1)/g(y) - 1` non-increasing beyond a settle
    /// point in the first half of the horizon.
    pub fn check_condition_g(&self, horizon: u64) -> ConditionReport {
        let w = self.weight;
        if w.g(1) <= w.g(0) {
            return ConditionReport {
                holds: false,
                settle_point: 0,
                detail: "g(1) <= g(0)".into(),
            };
        }
        let start = w.sample_start();
        let mut settle = start;
        let mut prev: Option<f64> = None;
        for y in start..horizon {
            let step = w.ln_g(y + 1) - w.ln_g(y);
            if !(step.is_finite() && step > 0.0) {
                return ConditionReport {
                    holds: false,
                    settle_point: y,
                    detail: format!("ln g(y+1) - ln g(y) = {step} at y = {y}"),
                };
            }
            let distance = step.exp_m1();
            if let Some(p) = prev {
                if distance > p * (1.0 + CONDITION_TOL) {
                    settle = y;
                }
            }
            prev = Some(distance);
        }
        let holds = settle < horizon / 2;
        ConditionReport {
            holds,
            settle_point: settle,
            detail: format!(
                "ratio distance settles at y = {settle}, final distance {:e}",
                prev.unwrap_or(f64::NAN)
            ),
        }
    }

    /// Sampled check that `h` is strictly increasing and concave on a
    /// geometric grid over `[lo, hi]`.
    pub fn check_condition_h(&self, lo: f64, hi: f64, points: usize) -> ConditionReport {
        let ratio = (hi / lo).powf(1.0 / (points - 1) as f64);
        let grid: Vec<f64> = (0..points).map(|k| lo * ratio.powi(k as i32)).collect();
        let mut failures = Vec::new();
        for w in grid.windows(3) {
            let (a, b, c) = (w[0], w[1], w[2]);
            let (ha, hb, hc) = (self.h(a), self.h(b), self.h(c));
            let scale = ha.abs().max(hb.abs()).max(hc.abs()).max(1.0);
            if hb <= ha || self.h_prime(b) <= 0.0 {
                failures.push(format!("not increasing near {b}"));
            }
            // Secant slopes of a concave function are non-increasing.
            let left = (hb - ha) / (b - a);
            let right = (hc - hb) / (c - b);
            if right > left + CONDITION_TOL * scale / (c - a) {
                failures.push(format!("not concave near {b}"));
            }
        }
        ConditionReport {
            holds: failures.is_empty(),
            settle_point: 0,
            detail: if failures.is_empty() {
                format!("{points} grid points on [{lo}, {hi}]")
            } else {
                failures.join("; ")
            },
        }
    }
}
