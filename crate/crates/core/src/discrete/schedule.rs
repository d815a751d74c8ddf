use crate::error::{Error, Result};
use crate::model::Topology;
use crate::rates::RateFamily;

fn check_uniforms(x: &[u32], u: &[f64]) -> Result<()> {
    if u.len() != x.len() {
        return Err(Error::InvalidArgument(format!(
            "{} uniforms for {} nodes",
            u.len(),
            x.len()
        )));
    }
    if let Some(bad) = u.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
        return Err(Error::InvalidArgument(format!("uniform {bad} outside (0, 1)")));
    }
    Ok(())
}

/// Access priorities `τ_i = -ln(u_i) / x_i`, infinite for empty queues.
pub fn priorities(x: &[u32], u: &[f64], out: &mut [f64]) {
    for ((t, &xi), &ui) in out.iter_mut().zip(x).zip(u) {
        *t = if xi == 0 {
            f64::INFINITY
        } else {
            -ui.ln() / f64::from(xi)
        };
    }
}

pub(crate) fn d1_from_priorities(tau: &[f64], topo: &Topology, eta: &mut [bool]) {
    for (i, e) in eta.iter_mut().enumerate() {
        let ti = tau[i];
        *e = ti.is_finite()
            && topo.interferers(i).iter().all(|&(j, a)| {
                let rival = tau[j] / a;
                ti < rival || (ti == rival && i < j)
            });
    }
}

/// Scheduler D1: node `i` transmits iff it is non-empty and its priority
/// beats `τ_j / a_{j-i}` for every interferer `j`. Exact ties go to the lower
/// index.
pub fn schedule_d1(x: &[u32], topo: &Topology, u: &[f64]) -> Result<Vec<bool>> {
    check_uniforms(x, u)?;
    let mut tau = vec![0.0; x.len()];
    priorities(x, u, &mut tau);
    let mut eta = vec![false; x.len()];
    d1_from_priorities(&tau, topo, &mut eta);
    Ok(eta)
}

pub(crate) fn d2_from_rates(x: &[u32], psi: &[f64], u: &[f64], eta: &mut [bool]) {
    for (((e, &xi), &p), &ui) in eta.iter_mut().zip(x).zip(psi).zip(u) {
        *e = xi > 0 && ui < p;
    }
}

/// Scheduler D2: node `i` transmits iff `x_i > 0` and `u_i < ψ_i(x)`.
pub fn schedule_d2(x: &[u32], topo: &Topology, u: &[f64]) -> Result<Vec<bool>> {
    schedule_d2_with(x, topo, u, RateFamily::Sir)
}

/// Scheduler D2 for an arbitrary rate family.
pub fn schedule_d2_with(
    x: &[u32],
    topo: &Topology,
    u: &[f64],
    rates: RateFamily,
) -> Result<Vec<bool>> {
    check_uniforms(x, u)?;
    let psi = rates.rates(x, topo);
    let mut eta = vec![false; x.len()];
    d2_from_rates(x, &psi, u, &mut eta);
    Ok(eta)
}
