use crate::error::{Error, Result};
use crate::model::kernel::InterferenceKernel;

/// How the node count of a torus was declared.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeConvention {
    /// Coordinates `0..side_k` per axis; `Π side_k` nodes.
    Sides,
    /// Coordinates `-N_k..N_k` per axis; `Π 2N_k` nodes.
    HalfWidths,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TopologyKind {
    Torus {
        sides: Vec<usize>,
        /// Coordinate of flat index 0 along each axis.
        origin: Vec<i64>,
        convention: NodeConvention,
    },
    Line {
        length: usize,
    },
    Graph,
}

/// A finite node set with weighted interference neighbourhoods.
///
/// `neighbourhood(i)` always starts with `(i, 1.0)`; the remaining entries
/// are the other nodes `j` with `a_{j-i} > 0`, sorted by index.
#[derive(Debug, Clone)]
pub struct Topology {
    kind: TopologyKind,
    kernel: Option<InterferenceKernel>,
    neighbourhoods: Vec<Vec<(usize, f64)>>,
    lattice: Option<Vec<Vec<usize>>>,
}

impl Topology {
    /// A torus with `sides[k]` nodes along axis `k`, indexed row-major.
    ///
    /// Every side must exceed `2 * reach_k` so that distinct kernel offsets
    /// land on distinct nodes after wrapping.
    pub fn torus(sides: &[usize], kernel: InterferenceKernel) -> Result<Self> {
        let origin = vec![0; sides.len()];
        Self::build_torus(sides.to_vec(), origin, NodeConvention::Sides, kernel)
    }

    /// The torus `{-N_k, .., N_k - 1}` per axis, requiring `N_k > L`.
    pub fn torus_half_widths(half_widths: &[usize], kernel: InterferenceKernel) -> Result<Self> {
        if half_widths.len() != kernel.dim() {
            return Err(Error::InvalidTopology(format!(
                "{} half-widths given for a {}-dimensional kernel",
                half_widths.len(),
                kernel.dim()
            )));
        }
        let range = kernel.range();
        if let Some(&n) = half_widths.iter().find(|&&n| (n as u64) <= range) {
            return Err(Error::InvalidTopology(format!(
                "half-width {n} must exceed the kernel range {range}"
            )));
        }
        let sides = half_widths.iter().map(|n| 2 * n).collect();
        let origin = half_widths.iter().map(|&n| -(n as i64)).collect();
        Self::build_torus(sides, origin, NodeConvention::HalfWidths, kernel)
    }

    fn build_torus(
        sides: Vec<usize>,
        origin: Vec<i64>,
        convention: NodeConvention,
        kernel: InterferenceKernel,
    ) -> Result<Self> {
        if sides.len() != kernel.dim() {
            return Err(Error::InvalidTopology(format!(
                "{} torus dimensions given for a {}-dimensional kernel",
                sides.len(),
                kernel.dim()
            )));
        }
        for (k, (&side, reach)) in sides.iter().zip(kernel.reach()).enumerate() {
            if side == 0 || side as u64 <= 2 * reach {
                return Err(Error::InvalidTopology(format!(
                    "side {side} along axis {k} is too small for kernel reach {reach} \
                     (need more than {})",
                    2 * reach
                )));
            }
        }
        let n: usize = sides.iter().product();
        let mut neighbourhoods = Vec::with_capacity(n);
        for i in 0..n {
            let base = unravel(i, &sides);
            let mut list = vec![(i, 1.0)];
            for (offset, a) in kernel.iter() {
                if offset.iter().all(|&c| c == 0) {
                    continue;
                }
                list.push((wrap(&base, offset, &sides), a));
            }
            list[1..].sort_by_key(|&(j, _)| j);
            neighbourhoods.push(list);
        }
        let lattice = sides.iter().all(|&s| s >= 3).then(|| {
            (0..n)
                .map(|i| {
                    let base = unravel(i, &sides);
                    let mut out = Vec::with_capacity(2 * sides.len());
                    for k in 0..sides.len() {
                        for sign in [-1, 1] {
                            let mut e = vec![0; sides.len()];
                            e[k] = sign;
                            out.push(wrap(&base, &e, &sides));
                        }
                    }
                    out
                })
                .collect()
        });
        Ok(Self {
            kind: TopologyKind::Torus {
                sides,
                origin,
                convention,
            },
            kernel: Some(kernel),
            neighbourhoods,
            lattice,
        })
    }

    /// Nodes `0..length` on a segment, interference truncated at the ends.
    pub fn line(length: usize, kernel: InterferenceKernel) -> Result<Self> {
        if kernel.dim() != 1 {
            return Err(Error::InvalidTopology(format!(
                "a line needs a 1-dimensional kernel, got dimension {}",
                kernel.dim()
            )));
        }
        if length == 0 {
            return Err(Error::InvalidTopology("line length must be positive".into()));
        }
        let neighbourhoods = (0..length)
            .map(|i| {
                let mut list = vec![(i, 1.0)];
                for (offset, a) in kernel.iter() {
                    let j = i as i64 + offset[0];
                    if offset[0] != 0 && (0..length as i64).contains(&j) {
                        list.push((j as usize, a));
                    }
                }
                list[1..].sort_by_key(|&(j, _)| j);
                list
            })
            .collect();
        Ok(Self {
            kind: TopologyKind::Line { length },
            kernel: Some(kernel),
            neighbourhoods,
            lattice: None,
        })
    }

    /// An explicit weighted graph on `n` nodes; each undirected edge
    /// `(i, j, w)` gives `weight(i→j) = weight(j→i) = w`.
    pub fn graph(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidTopology("graph must have at least one node".into()));
        }
        let mut neighbourhoods: Vec<Vec<(usize, f64)>> = (0..n).map(|i| vec![(i, 1.0)]).collect();
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidTopology(format!("edge ({i}, {j}) out of range")));
            }
            if i == j {
                return Err(Error::InvalidTopology(format!(
                    "self-edge at node {i}; self weight is fixed at 1"
                )));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidTopology(format!(
                    "edge ({i}, {j}) weight must be positive, got {w}"
                )));
            }
            if neighbourhoods[i].iter().any(|&(k, _)| k == j) {
                return Err(Error::InvalidTopology(format!("duplicate edge ({i}, {j})")));
            }
            neighbourhoods[i].push((j, w));
            neighbourhoods[j].push((i, w));
        }
        for list in &mut neighbourhoods {
            list[1..].sort_by_key(|&(j, _)| j);
        }
        Ok(Self {
            kind: TopologyKind::Graph,
            kernel: None,
            neighbourhoods,
            lattice: None,
        })
    }

    pub fn kind(&self) -> &TopologyKind {
        &self.kind
    }

    pub fn kernel(&self) -> Option<&InterferenceKernel> {
        self.kernel.as_ref()
    }

    pub fn node_count(&self) -> usize {
        self.neighbourhoods.len()
    }

    pub fn convention(&self) -> Option<NodeConvention> {
        match &self.kind {
            TopologyKind::Torus { convention, .. } => Some(*convention),
            _ => None,
        }
    }

    /// `(j, weight)` pairs with the node itself first.
    pub fn neighbourhood(&self, i: usize) -> &[(usize, f64)] {
        &self.neighbourhoods[i]
    }

    /// Interfering neighbours, excluding the node itself.
    pub fn interferers(&self, i: usize) -> &[(usize, f64)] {
        &self.neighbourhoods[i][1..]
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.neighbourhoods[i]
            .iter()
            .find(|&&(k, _)| k == j)
            .map_or(0.0, |&(_, w)| w)
    }

    /// Lattice dimension, when the topology sits on a lattice.
    pub fn dimension(&self) -> Option<usize> {
        match &self.kind {
            TopologyKind::Torus { sides, .. } => Some(sides.len()),
            TopologyKind::Line { .. } => Some(1),
            TopologyKind::Graph => None,
        }
    }

    /// `Σ_j a_{j-i}` over the neighbourhood of `i`.
    pub fn neighbourhood_weight(&self, i: usize) -> f64 {
        self.neighbourhoods[i].iter().map(|&(_, w)| w).sum()
    }

    /// The `2d` nearest lattice neighbours of `i`, for tori with every side `>= 3`.
    pub fn lattice_neighbours(&self, i: usize) -> Option<&[usize]> {
        self.lattice.as_ref().map(|l| l[i].as_slice())
    }

    /// True for a torus with the 0/1 nearest-neighbour kernel.
    pub fn is_lattice_torus(&self) -> bool {
        self.lattice.is_some() && self.kernel.as_ref().is_some_and(|k| k.is_lattice_neighbour())
    }

    /// Lattice coordinates of flat index `i` (tori only).
    pub fn coords(&self, i: usize) -> Option<Vec<i64>> {
        match &self.kind {
            TopologyKind::Torus { sides, origin, .. } => Some(
                unravel(i, sides)
                    .into_iter()
                    .zip(origin)
                    .map(|(c, o)| c + o)
                    .collect(),
            ),
            TopologyKind::Line { .. } => Some(vec![i as i64]),
            TopologyKind::Graph => None,
        }
    }

    /// Inverse of [`Topology::coords`]; coordinates are taken modulo the sides.
    pub fn flat_index(&self, coords: &[i64]) -> Option<usize> {
        match &self.kind {
            TopologyKind::Torus { sides, origin, .. } if coords.len() == sides.len() => {
                let shifted: Vec<i64> = coords.iter().zip(origin).map(|(c, o)| c - o).collect();
                Some(wrap(&vec![0; sides.len()], &shifted, sides))
            }
            TopologyKind::Line { length } if coords.len() == 1 => {
                (0..*length as i64).contains(&coords[0]).then_some(coords[0] as usize)
            }
            _ => None,
        }
    }
}

fn unravel(mut i: usize, sides: &[usize]) -> Vec<i64> {
    let mut out = vec![0; sides.len()];
    for k in (0..sides.len()).rev() {
        out[k] = (i % sides[k]) as i64;
        i /= sides[k];
    }
    out
}

fn wrap(base: &[i64], offset: &[i64], sides: &[usize]) -> usize {
    base.iter()
        .zip(offset)
        .zip(sides)
        .fold(0usize, |acc, ((b, o), &s)| {
            acc * s + (b + o).rem_euclid(s as i64) as usize
        })
}
