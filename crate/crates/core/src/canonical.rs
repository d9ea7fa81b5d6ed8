//! Canonical-invariance diagnostics: does a ladder that starts in a Gibbs
//! state stay of Gibbs form (with a drifting temperature) while it thermalizes,
//! and does the one-variable thermalization equation track the full dynamics?

use crate::dissipators::RhsSpec;
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, C64};
use crate::propagate::{propagate, Method, PropagationOptions, Warning};
use crate::stationary::gibbs_state;
use crate::systems::{fermi, BathModel, LadderSystem, TwoLevelSystem};

/// Populations below this are excluded from log-ratios.
pub const POPULATION_FLOOR: f64 = 1e-14;
/// Populations must reach this for a ratio to count toward uniformity and `a`.
pub const CLEAN_POPULATION: f64 = 1e-6;
const NEGATIVE_POPULATION_TOL: f64 = 1e-12;
const SUM_TOL: f64 = 1e-9;

/// `r_i = ln(p_{i+1}/p_i)`, `None` where either population is below the floor.
pub fn ratio_profile(p: &[f64]) -> Result<Vec<Option<f64>>> {
    ratio_profile_with_floor(p, POPULATION_FLOOR)
}

pub fn ratio_profile_with_floor(p: &[f64], floor: f64) -> Result<Vec<Option<f64>>> {
    if let Some((i, &x)) = p.iter().enumerate().find(|(_, &x)| x < -NEGATIVE_POPULATION_TOL || x.is_nan()) {
        return Err(Error::InvalidState(format!("population p_{i} = {x:e} is negative")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > SUM_TOL {
        return Err(Error::InvalidState(format!("populations sum to {total}, not 1")));
    }
    Ok(p.windows(2)
        .map(|w| (w[0] >= floor && w[1] >= floor).then(|| (w[1] / w[0]).ln()))
        .collect())
}

/// Largest `|r_i − mean(r)|` over the present entries; zero with fewer than two.
pub fn nonuniformity(profile: &[Option<f64>]) -> f64 {
    let present: Vec<f64> = profile.iter().flatten().copied().collect();
    if present.len() < 2 {
        return 0.0;
    }
    let mean = present.iter().sum::<f64>() / present.len() as f64;
    present.iter().map(|r| (r - mean).abs()).fold(0.0, f64::max)
}

/// Mean of the present entries, `None` if there are none.
pub fn profile_mean(profile: &[Option<f64>]) -> Option<f64> {
    let present: Vec<f64> = profile.iter().flatten().copied().collect();
    (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64)
}

/// Population standard deviation of the present entries.
pub fn profile_stdev(profile: &[Option<f64>]) -> f64 {
    let present: Vec<f64> = profile.iter().flatten().copied().collect();
    if present.len() < 2 {
        return 0.0;
    }
    let mean = present.iter().sum::<f64>() / present.len() as f64;
    (present.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / present.len() as f64).sqrt()
}

fn check_ratio(a: f64) -> Result<()> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::param(format!("level ratio a must be positive, got {a}")));
    }
    Ok(())
}

/// `δ = ln(a(1 − f)/f)`: zero exactly when `a` equals the bath ratio.
pub fn delta_parameter(a: f64, bath: &BathModel, energy: f64) -> Result<f64> {
    check_ratio(a)?;
    let f = bath.fermi(energy)?;
    Ok(a.ln() + (1.0 - f).ln() - f.ln())
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceCheck {
    pub holds: bool,
    /// `γ_{i+1} − γ_i − γ_0`.
    pub defect: Vec<f64>,
}

/// Whether consecutive couplings step by exactly `γ_0` (relative 1e-12).
pub fn invariance_condition(gammas: &[f64]) -> Result<InvarianceCheck> {
    if gammas.len() < 2 {
        return Err(Error::param(format!("need at least two couplings, got {}", gammas.len())));
    }
    let g0 = gammas[0];
    if !(g0 > 0.0) {
        return Err(Error::param(format!("gamma_0 must be positive, got {g0}")));
    }
    let defect: Vec<f64> = gammas.windows(2).map(|w| w[1] - w[0] - g0).collect();
    let holds = defect.iter().all(|d| d.abs() <= 1e-12 * g0);
    Ok(InvarianceCheck { holds, defect })
}

/// `d ln a/dt = γ₀ (a(1 − f) + f/a − 1)`.
pub fn thermalization_ode_rhs(a: f64, bath: &BathModel, energy: f64, gamma0: f64) -> Result<f64> {
    check_ratio(a)?;
    if !(gamma0 > 0.0) {
        return Err(Error::param(format!("gamma_0 must be positive, got {gamma0}")));
    }
    let f = bath.fermi(energy)?;
    Ok(gamma0 * (a * (1.0 - f) + f / a - 1.0))
}

/// `dλ/dt = −(γp + γm) λ + (γp − γm)`.
pub fn lambda_ode_rhs(lambda: f64, sys: &TwoLevelSystem) -> f64 {
    -sys.total_rate() * lambda + (sys.gamma_p - sys.gamma_m)
}

/// `λ* + (λ0 − λ*) e^{−(γp+γm) t}`.
pub fn lambda_solution(lambda0: f64, sys: &TwoLevelSystem, t: f64) -> f64 {
    let total = sys.total_rate();
    if total == 0.0 {
        return lambda0;
    }
    let star = (sys.gamma_p - sys.gamma_m) / total;
    star + (lambda0 - star) * (-total * t).exp()
}

/// `ρ = I/2 + λ H/E`.
pub fn lambda_state(lambda: f64, sys: &TwoLevelSystem) -> Result<ComplexMatrix> {
    if !(lambda.abs() <= 1.0) {
        return Err(Error::param(format!("|lambda| must be at most 1, got {lambda}")));
    }
    let mut rho = ComplexMatrix::identity(2).scale_real(0.5);
    rho.add_scaled(C64::new(lambda / sys.energy_gap(), 0.0), &sys.hamiltonian());
    Ok(rho)
}

/// `λ = 2 Tr(ρH)/E`, the inverse of [`lambda_state`] on its image.
pub fn fit_lambda(rho: &ComplexMatrix, sys: &TwoLevelSystem) -> Result<f64> {
    let h = sys.hamiltonian();
    let tr = rho.try_matmul(&h)?.trace().re;
    Ok(2.0 * tr / sys.energy_gap())
}

/// Integrates `d ln a/dt = γ₀(a(1−f) + f/a − 1)` with RK4 and returns `ln a`
/// at each requested (non-decreasing) time.
pub fn integrate_thermalization(ln_a0: f64, f: f64, gamma0: f64, times: &[f64]) -> Result<Vec<f64>> {
    if !(f > 0.0 && f < 1.0) {
        return Err(Error::param(format!("occupation f must lie in (0, 1), got {f}")));
    }
    if !(gamma0 > 0.0) {
        return Err(Error::param(format!("gamma_0 must be positive, got {gamma0}")));
    }
    let rhs = |u: f64| gamma0 * (u.exp() * (1.0 - f) + f * (-u).exp() - 1.0);
    let h_max = 1e-3 / gamma0;
    let mut u = ln_a0;
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        if target < t {
            return Err(Error::param("output times must be non-decreasing"));
        }
        let span = target - t;
        let n = (span / h_max).ceil().max(1.0) as usize;
        let h = span / n as f64;
        for _ in 0..n {
            let k1 = rhs(u);
            let k2 = rhs(u + 0.5 * h * k1);
            let k3 = rhs(u + 0.5 * h * k2);
            let k4 = rhs(u + h * k3);
            u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        t = target;
        out.push(u);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct CanonicalDiagnostics {
    pub times: Vec<f64>,
    /// Floor-filtered log-ratios per recorded time.
    pub ratio_profiles: Vec<Vec<Option<f64>>>,
    /// Non-uniformity over the clean levels (both populations ≥ 1e-6).
    pub max_nonuniformity: Vec<f64>,
    /// `exp` of the mean clean log-ratio.
    pub a_series: Vec<f64>,
    pub delta_series: Vec<f64>,
    /// Thermalization ODE solution `ln a(t)` started from `−E/T0`.
    pub ode_ln_a: Vec<f64>,
    pub top_population: Vec<f64>,
    /// Top-level population below 1e-6 and at least one clean ratio.
    pub clean: Vec<bool>,
    /// `max |ln a_ODE − ln a|` over clean times.
    pub max_ode_deviation: f64,
    pub bath_temperature: f64,
    pub gamma0: f64,
    pub spacing: f64,
    pub warnings: Vec<Warning>,
}

impl CanonicalDiagnostics {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest non-uniformity over clean times.
    pub fn clean_max_nonuniformity(&self) -> f64 {
        self.max_nonuniformity
            .iter()
            .zip(&self.clean)
            .filter(|(_, &c)| c)
            .map(|(&m, _)| m)
            .fold(0.0, f64::max)
    }

    /// Largest non-uniformity over all times.
    pub fn peak_nonuniformity(&self) -> f64 {
        self.max_nonuniformity.iter().copied().fold(0.0, f64::max)
    }
}

/// Propagates `gibbs_state(H, T0)` under the multi-level EBE and records the
/// ratio profile at every step. The bath temperature and `γ₀` are read off the
/// ladder's detailed-balance rates.
pub fn canonical_experiment(sys: &LadderSystem, t0: f64, t_final: f64, dt: f64) -> Result<CanonicalDiagnostics> {
    if !(t0 > 0.0) {
        return Err(Error::param(format!("initial temperature must be positive, got {t0}")));
    }
    if !sys.is_oscillator_chain() {
        return Err(Error::param("canonical experiment needs an equally spaced nearest-neighbour ladder"));
    }
    let spacing = sys.uniform_spacing().expect("chains are equally spaced");
    let t_bath = sys
        .detailed_balance_temperature()
        .filter(|t| t.is_finite() && *t > 0.0)
        .ok_or_else(|| Error::param("canonical experiment needs detailed-balance rates at a finite temperature"))?;
    let gamma0 = sys.couplings()[0];
    let bath = BathModel::new(gamma0, t_bath)?;
    let f = fermi(spacing, t_bath)?;

    let spec = RhsSpec::ladder(sys, 0.0)?;
    let rho0 = gibbs_state(&sys.hamiltonian(), t0)?;
    let traj = propagate(&spec, &rho0, &PropagationOptions::new(t_final, dt, Method::Expm))?;

    let ode_ln_a = integrate_thermalization(-spacing / t0, f, gamma0, &traj.times)?;
    let n = traj.len();
    let mut diag = CanonicalDiagnostics {
        times: traj.times.clone(),
        ratio_profiles: Vec::with_capacity(n),
        max_nonuniformity: Vec::with_capacity(n),
        a_series: Vec::with_capacity(n),
        delta_series: Vec::with_capacity(n),
        ode_ln_a,
        top_population: Vec::with_capacity(n),
        clean: Vec::with_capacity(n),
        max_ode_deviation: 0.0,
        bath_temperature: t_bath,
        gamma0,
        spacing,
        warnings: traj.warnings.clone(),
    };
    for k in 0..n {
        let mut p = traj.populations(k);
        // round-off can leave tiny negative tails
        for x in &mut p {
            if *x < 0.0 && *x >= -NEGATIVE_POPULATION_TOL {
                *x = 0.0;
            }
        }
        let total: f64 = p.iter().sum();
        let profile = ratio_profile_with_floor(&p.iter().map(|x| x / total).collect::<Vec<_>>(), POPULATION_FLOOR)?;
        let clean_profile: Vec<Option<f64>> = profile
            .iter()
            .enumerate()
            .map(|(i, r)| r.filter(|_| p[i] >= CLEAN_POPULATION && p[i + 1] >= CLEAN_POPULATION))
            .collect();
        let top = p[p.len() - 1];
        let mean = profile_mean(&clean_profile);
        let is_clean = top < CLEAN_POPULATION && mean.is_some();
        let ln_a = mean.unwrap_or(f64::NAN);
        let a = ln_a.exp();
        diag.max_nonuniformity.push(nonuniformity(&clean_profile));
        diag.a_series.push(a);
        diag.delta_series.push(if a > 0.0 { delta_parameter(a, &bath, spacing)? } else { f64::NAN });
        diag.top_population.push(top);
        diag.clean.push(is_clean);
        if is_clean {
            diag.max_ode_deviation = diag.max_ode_deviation.max((diag.ode_ln_a[k] - ln_a).abs());
        }
        diag.ratio_profiles.push(profile);
    }
    Ok(diag)
}
