use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{RoutingDegree, Topology};
use crate::rng::open01;

/// Where a served job goes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Destination {
    Exit,
    Node(usize),
}

/// Destination of a job served at `node` given one uniform `u`.
pub(crate) fn destination(
    neighbours: &[usize],
    q: f64,
    degree: RoutingDegree,
    dim: usize,
    u: f64,
) -> Destination {
    if u < q {
        return Destination::Exit;
    }
    let per = (1.0 - q) / degree.degree(dim) as f64;
    let k = ((u - q) / per) as usize;
    match neighbours.get(k) {
        Some(&j) => Destination::Node(j),
        // only reachable through rounding at u -> 1 for the lattice degree,
        // or by design for the 2^d convention in d >= 3
        None if degree == RoutingDegree::Lattice => Destination::Node(neighbours[neighbours.len() - 1]),
        None => Destination::Exit,
    }
}

pub(crate) fn check_lattice(topo: &Topology, q: f64) -> Result<usize> {
    if !topo.is_lattice_torus() {
        return Err(Error::InvalidTopology(
            "multi-hop routing needs a torus with the 0/1 nearest-neighbour kernel".into(),
        ));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidArgument(format!("exit probability {q} outside (0, 1]")));
    }
    Ok(topo.dimension().unwrap_or(1))
}

/// Route every served job: exit with probability `q`, otherwise move to a
/// uniformly chosen lattice neighbour. One uniform is drawn per node whether
/// or not it served, so the stream stays aligned across states.
pub fn route_multihop<R: Rng + ?Sized>(
    eta: &[bool],
    topo: &Topology,
    q: f64,
    degree: RoutingDegree,
    rng: &mut R,
) -> Result<Vec<u32>> {
    let dim = check_lattice(topo, q)?;
    let mut routed = vec![0; eta.len()];
    for (i, &served) in eta.iter().enumerate() {
        let u = open01(rng);
        if !served {
            continue;
        }
        let neighbours = topo.lattice_neighbours(i).unwrap_or(&[]);
        if let Destination::Node(j) = destination(neighbours, q, degree, dim, u) {
            routed[j] += 1;
        }
    }
    Ok(routed)
}
