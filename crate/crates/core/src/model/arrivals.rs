use crate::error::{Error, Result};

const PMF_TOL: f64 = 1e-12;

/// Per-slot (or, for `Poisson`, per-unit-time) arrival distribution of one node.
#[derive(Debug, Clone, PartialEq)]
pub enum ArrivalDist {
    Bernoulli(f64),
    /// Probability mass over `0..pmf.len()`.
    Pmf(Vec<f64>),
    Poisson(f64),
}

/// First three raw moments `E ξ`, `E ξ²`, `E ξ³`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Moments {
    pub first: f64,
    pub second: f64,
    pub third: f64,
}

impl Moments {
    pub fn order(&self, order: u32) -> Result<f64> {
        match order {
            1 => Ok(self.first),
            2 => Ok(self.second),
            3 => Ok(self.third),
            k => Err(Error::MomentOrder(k)),
        }
    }

    pub fn of_pmf(pmf: &[f64]) -> Self {
        let mut m = Self {
            first: 0.0,
            second: 0.0,
            third: 0.0,
        };
        for (n, &p) in pmf.iter().enumerate() {
            let n = n as f64;
            m.first += p * n;
            m.second += p * n * n;
            m.third += p * n * n * n;
        }
        m
    }
}

impl ArrivalDist {
    fn validate(&self) -> Result<()> {
        match self {
            Self::Bernoulli(l) if !(0.0..=1.0).contains(l) => Err(Error::InvalidArrivals(format!(
                "bernoulli mean must lie in [0, 1], got {l}"
            ))),
            Self::Poisson(r) if !(r.is_finite() && *r >= 0.0) => Err(Error::InvalidArrivals(
                format!("poisson rate must be finite and non-negative, got {r}"),
            )),
            Self::Pmf(p) => {
                if p.is_empty() {
                    return Err(Error::InvalidArrivals("pmf is empty".into()));
                }
                if p.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                    return Err(Error::InvalidArrivals(
                        "pmf entries must be finite and non-negative".into(),
                    ));
                }
                let total: f64 = p.iter().sum();
                if (total - 1.0).abs() > PMF_TOL {
                    return Err(Error::InvalidArrivals(format!(
                        "pmf sums to {total}, expected 1"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Closed-form or pmf-computed raw moments.
    pub fn moments(&self) -> Moments {
        match *self {
            Self::Bernoulli(l) => Moments {
                first: l,
                second: l,
                third: l,
            },
            Self::Poisson(r) => Moments {
                first: r,
                second: r + r * r,
                third: r + 3.0 * r * r + r * r * r,
            },
            Self::Pmf(ref p) => Moments::of_pmf(p),
        }
    }

    /// The distribution of `min(ξ, cap)`.
    pub fn truncated(&self, cap: u32) -> Self {
        match self {
            Self::Bernoulli(l) if cap >= 1 => Self::Bernoulli(*l),
            Self::Bernoulli(_) => Self::Pmf(vec![1.0]),
            Self::Pmf(p) if p.len() <= cap as usize + 1 => Self::Pmf(p.clone()),
            Self::Pmf(p) => {
                let cap = cap as usize;
                let mut out = p[..cap].to_vec();
                out.push(p[cap..].iter().sum());
                Self::Pmf(out)
            }
            Self::Poisson(r) => {
                let mut out = Vec::with_capacity(cap as usize + 1);
                let mut term = (-r).exp();
                let mut below = 0.0;
                for n in 0..cap {
                    out.push(term);
                    below += term;
                    term *= r / f64::from(n + 1);
                }
                out.push((1.0 - below).max(0.0));
                Self::Pmf(out)
            }
        }
    }

    /// Inverse-CDF draw from a uniform `u ∈ [0, 1)`.
    pub fn sample(&self, u: f64) -> u32 {
        match self {
            Self::Bernoulli(l) => u32::from(u < *l),
            Self::Pmf(p) => {
                let mut acc = 0.0;
                for (n, &pn) in p.iter().enumerate() {
                    acc += pn;
                    if u < acc {
                        return n as u32;
                    }
                }
                // u landed in the rounding gap above the accumulated mass
                p.iter().rposition(|&pn| pn > 0.0).unwrap_or(0) as u32
            }
            Self::Poisson(r) => {
                let mut term = (-r).exp();
                let mut acc = term;
                let mut n = 0u32;
                while u >= acc && term > 0.0 {
                    n += 1;
                    term *= r / f64::from(n);
                    acc += term;
                }
                n
            }
        }
    }
}

/// Arrival law for every node of a scenario, with cached moments.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalSpec {
    dists: Vec<ArrivalDist>,
    moments: Vec<Moments>,
    truncation: Option<u32>,
}

impl ArrivalSpec {
    pub fn from_nodes(dists: Vec<ArrivalDist>) -> Result<Self> {
        for d in &dists {
            d.validate()?;
        }
        let moments = dists.iter().map(ArrivalDist::moments).collect();
        Ok(Self {
            dists,
            moments,
            truncation: None,
        })
    }

    pub fn bernoulli(nodes: usize, mean: f64) -> Result<Self> {
        Self::from_nodes(vec![ArrivalDist::Bernoulli(mean); nodes])
    }

    pub fn bernoulli_each(means: &[f64]) -> Result<Self> {
        Self::from_nodes(means.iter().map(|&m| ArrivalDist::Bernoulli(m)).collect())
    }

    pub fn pmf(nodes: usize, pmf: Vec<f64>) -> Result<Self> {
        Self::from_nodes(vec![ArrivalDist::Pmf(pmf); nodes])
    }

    pub fn poisson(nodes: usize, rate: f64) -> Result<Self> {
        Self::from_nodes(vec![ArrivalDist::Poisson(rate); nodes])
    }

    /// Clip every node's arrivals at `cap`: `ξ^(M) = min(ξ, M)`.
    pub fn truncated(&self, cap: u32) -> Result<Self> {
        if cap == 0 {
            return Err(Error::InvalidArrivals("truncation level must be positive".into()));
        }
        let mut out = Self::from_nodes(self.dists.iter().map(|d| d.truncated(cap)).collect())?;
        out.truncation = Some(cap);
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.dists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dists.is_empty()
    }

    pub fn truncation(&self) -> Option<u32> {
        self.truncation
    }

    pub fn dist(&self, i: usize) -> &ArrivalDist {
        &self.dists[i]
    }

    pub fn moments(&self, i: usize) -> Moments {
        self.moments[i]
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.moments[i].first
    }

    pub fn means(&self) -> Vec<f64> {
        self.moments.iter().map(|m| m.first).collect()
    }

    /// Moment of the given order for every node.
    pub fn moments_of(&self, order: u32) -> Result<Vec<f64>> {
        self.moments.iter().map(|m| m.order(order)).collect()
    }

    pub fn is_bernoulli(&self) -> bool {
        self.dists.iter().all(|d| matches!(d, ArrivalDist::Bernoulli(_)))
    }

    pub fn is_poisson(&self) -> bool {
        self.dists.iter().all(|d| matches!(d, ArrivalDist::Poisson(_)))
    }

    /// Every node has the same mean (to 1e-12).
    pub fn is_symmetric(&self) -> bool {
        let m = self.means();
        m.iter().all(|x| (x - m[0]).abs() <= 1e-12)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bernoulli_moments_are_all_lambda() {
        let a = ArrivalSpec::bernoulli(2, 0.3).unwrap();
        assert_eq!(a.moments_of(2).unwrap(), vec![0.3, 0.3]);
        assert_eq!(a.moments_of(3).unwrap(), vec![0.3, 0.3]);
    }

    #[test]
    fn two_point_pmf_moments() {
        let a = ArrivalSpec::pmf(1, vec![0.5, 0.0, 0.5]).unwrap();
        assert_eq!(a.moments_of(1).unwrap(), vec![1.0]);
        assert_eq!(a.moments_of(3).unwrap(), vec![4.0]);
    }

    #[test]
    fn bad_order_is_an_error() {
        let a = ArrivalSpec::bernoulli(1, 0.3).unwrap();
        assert_eq!(a.moments_of(4), Err(Error::MomentOrder(4)));
        assert_eq!(a.moments_of(0), Err(Error::MomentOrder(0)));
    }

    #[test]
    fn validation() {
        assert!(ArrivalSpec::bernoulli(1, 1.2).is_err());
        assert!(ArrivalSpec::bernoulli(1, -0.1).is_err());
        assert!(ArrivalSpec::pmf(1, vec![0.5, 0.4]).is_err());
        assert!(ArrivalSpec::pmf(1, vec![1.5, -0.5]).is_err());
        assert!(ArrivalSpec::poisson(1, f64::NAN).is_err());
    }

    #[test]
    fn truncation_lumps_the_tail() {
        let a = ArrivalSpec::pmf(1, vec![0.25, 0.25, 0.25, 0.25]).unwrap();
        let t = a.truncated(1).unwrap();
        assert_eq!(t.dist(0), &ArrivalDist::Pmf(vec![0.25, 0.75]));
        assert_eq!(t.truncation(), Some(1));
        let p = ArrivalSpec::poisson(1, 2.0).unwrap().truncated(60).unwrap();
        let m = p.moments(0);
        assert!((m.first - 2.0).abs() < 1e-12);
        assert!((m.second - 6.0).abs() < 1e-12);
        assert!((m.third - 22.0).abs() < 1e-10);
    }

    #[test]
    fn inverse_cdf_sampling() {
        let d = ArrivalDist::Pmf(vec![0.5, 0.0, 0.5]);
        assert_eq!(d.sample(0.1), 0);
        assert_eq!(d.sample(0.5), 2);
        assert_eq!(d.sample(0.999_999_999), 2);
        assert_eq!(ArrivalDist::Bernoulli(0.3).sample(0.29), 1);
        assert_eq!(ArrivalDist::Bernoulli(0.3).sample(0.3), 0);
        let p = ArrivalDist::Poisson(1.0);
        assert_eq!(p.sample(0.0), 0);
        assert_eq!(p.sample((-1.0f64).exp() + 1e-9), 1);
    }
}
