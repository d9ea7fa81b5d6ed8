//! Stationary states: Gibbs states, the closed-form two-level fixed point, and
//! numerical fixed points from the superoperator null space.

use crate::dissipators::{master_rhs, RhsSpec};
use crate::error::{Error, Result};
use crate::linalg::{self, commutator, devectorize, trace_distance, ComplexMatrix, C64};
use crate::propagate::{build_superoperator, ZERO_EIGENVALUE_TOL};
use crate::systems::TwoLevelSystem;

/// An eigenvalue further than this from zero cannot be a stationary mode.
pub const FIXED_POINT_TOL: f64 = 1e-6;

/// `exp(−H/T)/Z`. Energies are shifted by the ground energy before
/// exponentiating so that low temperatures do not underflow `Z`.
/// `T = ∞` gives the maximally mixed state.
pub fn gibbs_state(h: &ComplexMatrix, temperature: f64) -> Result<ComplexMatrix> {
    if temperature.is_nan() || temperature <= 0.0 {
        return Err(Error::param(format!("temperature must be positive, got {temperature}")));
    }
    let n = h.dim();
    if temperature.is_infinite() {
        return Ok(ComplexMatrix::identity(n).scale_real(1.0 / n as f64));
    }
    let eig = linalg::hermitian_eig(h)?;
    let e0 = eig.values[0];
    let z: f64 = eig.values.iter().map(|e| (-(e - e0) / temperature).exp()).sum();
    let g = eig.reconstruct_with(|e| (-(e - e0) / temperature).exp() / z);
    Ok(g.hermitian_part())
}

/// `I/2 + ((γp − γm)/(γp + γm)) H/E`.
pub fn two_level_stationary_analytic(sys: &TwoLevelSystem) -> Result<ComplexMatrix> {
    let total = sys.total_rate();
    if !(total > 0.0) {
        return Err(Error::param("stationary state needs γp + γm > 0"));
    }
    let lambda = (sys.gamma_p - sys.gamma_m) / total;
    let mut rho = ComplexMatrix::identity(2).scale_real(0.5);
    rho.add_scaled(C64::new(lambda / sys.energy_gap(), 0.0), &sys.hamiltonian());
    Ok(rho)
}

#[derive(Debug, Clone)]
pub struct FixedPointReport {
    pub state: ComplexMatrix,
    /// Frobenius norm of the generator applied to `state`.
    pub residual: f64,
    /// Trace distance to the Gibbs state, when the rates satisfy detailed balance.
    pub gibbs_distance: Option<f64>,
    /// Slowest decay rate among modes with `Re λ < −1e-10`.
    pub spectral_gap: f64,
    /// Number of eigenvalues with `|λ| ≤ 1e-10`.
    pub multiplicity: usize,
    /// Purely oscillating modes: `|Re λ| ≤ 1e-10` but `|λ| > 1e-10`.
    pub undamped_modes: usize,
    pub max_real_part: f64,
    /// `‖[H, ρ]‖_F`.
    pub commutator_norm: f64,
}

impl FixedPointReport {
    pub fn is_unique(&self) -> bool {
        self.multiplicity == 1
    }
}

/// Null vector of the superoperator, reshaped, symmetrized and trace-normalized.
/// With a degenerate null space the candidate with the largest trace is used.
pub fn fixed_point(spec: &RhsSpec) -> Result<FixedPointReport> {
    let n = spec.dim();
    let s = build_superoperator(spec)?;
    let eig = linalg::general_eig(&s)?;
    let values = &eig.values;

    let (kmin, lmin) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .map(|(k, z)| (k, z.norm()))
        .ok_or_else(|| Error::Decomposition("empty spectrum".into()))?;
    if lmin > FIXED_POINT_TOL {
        return Err(Error::Numerical(format!("no stationary mode: smallest |λ| is {lmin:e}")));
    }

    let column = |k: usize| -> Vec<C64> { (0..n * n).map(|r| eig.vectors[(r, k)]).collect() };
    let trace_of = |k: usize| -> C64 { (0..n).map(|i| eig.vectors[(i * n + i, k)]).sum() };
    let null: Vec<usize> = (0..values.len()).filter(|&k| values[k].norm() <= ZERO_EIGENVALUE_TOL).collect();
    let pick = null
        .iter()
        .copied()
        .max_by(|&a, &b| trace_of(a).norm().total_cmp(&trace_of(b).norm()))
        .unwrap_or(kmin);

    let tr = trace_of(pick);
    if tr.norm() < 1e-12 {
        return Err(Error::Numerical("stationary mode has zero trace".into()));
    }
    let raw = devectorize(&column(pick), n)?.scale(C64::new(1.0, 0.0) / tr);
    let sym = raw.hermitian_part();
    let state = sym.scale_real(1.0 / sym.trace().re);

    let residual = master_rhs(&state, spec)?.frobenius_norm();
    let gibbs_distance = match spec.detailed_balance_temperature() {
        Some(t) => Some(trace_distance(&state, &gibbs_state(spec.hamiltonian(), t)?)?),
        None => None,
    };
    let spectral_gap = values
        .iter()
        .filter(|z| z.re < -ZERO_EIGENVALUE_TOL)
        .map(|z| -z.re)
        .fold(f64::INFINITY, f64::min);
    let undamped_modes = values
        .iter()
        .filter(|z| z.norm() > ZERO_EIGENVALUE_TOL && z.re.abs() <= ZERO_EIGENVALUE_TOL)
        .count();
    let max_real_part = values.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let commutator_norm = commutator(spec.hamiltonian(), &state)?.frobenius_norm();

    Ok(FixedPointReport {
        state,
        residual,
        gibbs_distance,
        spectral_gap,
        multiplicity: null.len(),
        undamped_modes,
        max_real_part,
        commutator_norm,
    })
}
