use std::collections::BTreeMap;

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;

/// A lattice offset in `dim` dimensions.
pub type Offset = Vec<i64>;

/// Symmetric interference coefficients `a_j` on the integer lattice.
///
/// The kernel always carries `a_0 = 1`, satisfies `a_j = a_{-j} >= 0` and has
/// finite support. Only strictly positive coefficients are stored, so the
/// support doubles as the neighbourhood shape.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceKernel {
    dim: usize,
    coeffs: BTreeMap<Offset, f64>,
}

impl InterferenceKernel {
    pub fn new<I>(dim: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Offset, f64)>,
    {
        if dim == 0 {
            return Err(Error::InvalidKernel("dimension must be positive".into()));
        }
        let mut coeffs = BTreeMap::new();
        for (offset, value) in entries {
            if offset.len() != dim {
                return Err(Error::InvalidKernel(format!(
                    "offset {offset:?} has {} coordinates, kernel dimension is {dim}",
                    offset.len()
                )));
            }
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidKernel(format!(
                    "coefficient at {offset:?} must be finite and non-negative, got {value}"
                )));
            }
            if coeffs.insert(offset.clone(), value).is_some() {
                return Err(Error::InvalidKernel(format!("duplicate offset {offset:?}")));
            }
        }
        let origin = vec![0; dim];
        match coeffs.get(&origin) {
            Some(a0) if (a0 - 1.0).abs() <= SYMMETRY_TOL => {}
            Some(a0) => {
                return Err(Error::InvalidKernel(format!("a_0 must equal 1, got {a0}")));
            }
            None => return Err(Error::InvalidKernel("a_0 is missing".into())),
        }
        for (offset, value) in &coeffs {
            let mirror: Offset = offset.iter().map(|c| -c).collect();
            let partner = coeffs.get(&mirror).copied().unwrap_or(0.0);
            if (partner - value).abs() > SYMMETRY_TOL {
                return Err(Error::InvalidKernel(format!(
                    "asymmetric kernel: a{offset:?} = {value} but a{mirror:?} = {partner}"
                )));
            }
        }
        coeffs.retain(|_, v| *v > 0.0);
        coeffs.insert(origin, 1.0);
        Ok(Self { dim, coeffs })
    }

    /// Only `a_0 = 1`: every node is its own sole neighbour.
    pub fn isolated(dim: usize) -> Self {
        Self::new(dim, [(vec![0; dim], 1.0)]).expect("isolated kernel is valid")
    }

    /// The 0/1 nearest-neighbour kernel: `a_0 = a_{±e_k} = 1`.
    pub fn lattice(dim: usize) -> Self {
        let mut entries = vec![(vec![0; dim], 1.0)];
        for k in 0..dim {
            for sign in [-1, 1] {
                let mut e = vec![0; dim];
                e[k] = sign;
                entries.push((e, 1.0));
            }
        }
        Self::new(dim, entries).expect("lattice kernel is valid")
    }

    /// One-dimensional kernel from the one-sided profile `[a_0, a_1, .., a_L]`.
    pub fn symmetric_1d(profile: &[f64]) -> Result<Self> {
        let mut entries = Vec::with_capacity(2 * profile.len());
        for (k, &a) in profile.iter().enumerate() {
            let k = k as i64;
            entries.push((vec![k], a));
            if k != 0 {
                entries.push((vec![-k], a));
            }
        }
        Self::new(1, entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coefficient(&self, offset: &[i64]) -> f64 {
        self.coeffs.get(offset).copied().unwrap_or(0.0)
    }

    /// Offsets with a positive coefficient, including the origin.
    pub fn iter(&self) -> impl Iterator<Item = (&Offset, f64)> {
        self.coeffs.iter().map(|(o, v)| (o, *v))
    }

    /// `L`: the largest max-norm of an offset in the support.
    pub fn range(&self) -> u64 {
        self.coeffs
            .keys()
            .flat_map(|o| o.iter().map(|c| c.unsigned_abs()))
            .max()
            .unwrap_or(0)
    }

    /// Largest `|j_k|` over the support, per coordinate.
    pub fn reach(&self) -> Vec<u64> {
        (0..self.dim)
            .map(|k| {
                self.coeffs
                    .keys()
                    .map(|o| o[k].unsigned_abs())
                    .max()
                    .unwrap_or(0)
            })
            .collect()
    }

    /// `Σ_j a_j` over the full support.
    pub fn total_weight(&self) -> f64 {
        self.coeffs.values().sum()
    }

    pub fn is_lattice_neighbour(&self) -> bool {
        *self == Self::lattice(self.dim)
    }
}
