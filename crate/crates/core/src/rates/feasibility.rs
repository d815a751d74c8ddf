use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::InterferenceKernel;

pub const POWER_ITERATION_TOL: f64 = 1e-10;
pub const POWER_ITERATION_MAX_ITERS: usize = 100_000;

/// Largest symmetric arrival rate the kernel can sustain: `1 / Σ_j a_j`.
pub fn symmetric_threshold(kernel: &InterferenceKernel) -> f64 {
    1.0 / kernel.total_weight()
}

/// Fold the kernel onto a periodic cell: `A[i][j] = Σ a_o` over offsets `o`
/// with `i + o ≡ j` modulo the cell dimensions. Cells are indexed row-major.
pub fn fold_kernel(kernel: &InterferenceKernel, cell: &[usize]) -> Result<DMatrix<f64>> {
    if cell.len() != kernel.dim() {
        return Err(Error::InvalidArgument(format!(
            "{}-dimensional cell for a {}-dimensional kernel",
            cell.len(),
            kernel.dim()
        )));
    }
    if cell.contains(&0) {
        return Err(Error::InvalidArgument("cell dimensions must be positive".into()));
    }
    let n: usize = cell.iter().product();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut base = vec![0i64; cell.len()];
        let mut rest = i;
        for k in (0..cell.len()).rev() {
            base[k] = (rest % cell[k]) as i64;
            rest /= cell[k];
        }
        for (offset, w) in kernel.iter() {
            let j = base
                .iter()
                .zip(offset)
                .zip(cell)
                .fold(0usize, |acc, ((b, o), &c)| {
                    acc * c + (b + o).rem_euclid(c as i64) as usize
                });
            a[(i, j)] += w;
        }
    }
    Ok(a)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerIterationResult {
    pub spectral_radius: f64,
    /// Non-negative eigenvector for the spectral radius, unit 1-norm.
    pub vector: Vec<f64>,
    pub iterations: usize,
}

/// Spectral radius of a non-negative square matrix by power iteration on
/// `M + I`; the shift keeps the iteration aperiodic for reducible or
/// bipartite patterns.
pub fn power_iteration(m: &DMatrix<f64>, tol: f64, max_iters: usize) -> Result<PowerIterationResult> {
    let n = m.nrows();
    if n == 0 || m.ncols() != n {
        return Err(Error::InvalidArgument("power iteration needs a non-empty square matrix".into()));
    }
    if m.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidArgument("matrix must be non-negative".into()));
    }
    let shifted = m + DMatrix::identity(n, n);
    let mut v = DVector::from_element(n, 1.0 / n as f64);
    let mut rho = 0.0;
    let mut change = f64::INFINITY;
    for it in 1..=max_iters {
        let w = &shifted * &v;
        let norm = w.sum();
        let next = w / norm;
        let vec_change = (&next - &v).amax();
        change = (norm - rho).abs().max(vec_change);
        v = next;
        rho = norm;
        if change < tol {
            return Ok(PowerIterationResult {
                spectral_radius: (rho - 1.0).max(0.0),
                vector: v.iter().copied().collect(),
                iterations: it,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iters,
        change,
    })
}

/// Decision on whether a periodic arrival pattern lies strictly inside the
/// witness-generated rate set.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct FeasibilityCertificate {
    pub feasible: bool,
    /// `ρ(diag(λ) A)` on the folded cell.
    pub spectral_radius: f64,
    pub perron_vector: Vec<f64>,
    /// Positive witness `p` with `λ_i < ψ_i(p)`, when feasible.
    pub witness: Option<Vec<f64>>,
    /// `ν = ψ(p)` on the cell.
    pub rates: Option<Vec<f64>>,
    /// `min_i (ν_i - λ_i)`.
    pub margin: Option<f64>,
    pub iterations: usize,
}

/// Decide feasibility of a periodic arrival table `lambda` (row-major over
/// `cell`) against the SIR witness set, via `ρ(diag(λ) A) < 1`.
///
/// The returned witness is `p = (I - diag(λ) A)^{-1} 1`, which is strictly
/// positive and satisfies `p_i - λ_i (A p)_i = 1`, hence `ψ_i(p) > λ_i` even
/// at cells with `λ_i = 0`.
pub fn periodic_feasibility(
    lambda: &[f64],
    cell: &[usize],
    kernel: &InterferenceKernel,
) -> Result<FeasibilityCertificate> {
    let a = fold_kernel(kernel, cell)?;
    if lambda.len() != a.nrows() {
        return Err(Error::InvalidArgument(format!(
            "{} rates for a cell of {} sites",
            lambda.len(),
            a.nrows()
        )));
    }
    if lambda.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::InvalidArgument("rates must be finite and non-negative".into()));
    }
    let lam = DVector::from_column_slice(lambda);
    let m = DMatrix::from_diagonal(&lam) * &a;
    let pi = power_iteration(&m, POWER_ITERATION_TOL, POWER_ITERATION_MAX_ITERS)?;
    let rho = pi.spectral_radius;
    let mut cert = FeasibilityCertificate {
        feasible: false,
        spectral_radius: rho,
        perron_vector: pi.vector,
        witness: None,
        rates: None,
        margin: None,
        iterations: pi.iterations,
    };
    if rho >= 1.0 - POWER_ITERATION_TOL {
        return Ok(cert);
    }
    let n = a.nrows();
    let system = DMatrix::identity(n, n) - &m;
    let p = system
        .lu()
        .solve(&DVector::from_element(n, 1.0))
        .ok_or_else(|| Error::SingularSolve("I - diag(λ)A is singular".into()))?;
    let load = &a * &p;
    let rates: Vec<f64> = p.iter().zip(load.iter()).map(|(pi, li)| pi / li).collect();
    let margin = rates
        .iter()
        .zip(lambda)
        .map(|(r, l)| r - l)
        .fold(f64::INFINITY, f64::min);
    cert.feasible = p.iter().all(|&v| v > 0.0) && margin > 0.0;
    cert.witness = Some(p.iter().copied().collect());
    cert.rates = Some(rates);
    cert.margin = Some(margin);
    Ok(cert)
}
