//! Time evolution: fixed-step RK4, exact propagation through the
//! superoperator exponential, and physicality diagnostics along the way.

use crate::dissipators::{check_state, RhsEvaluator, RhsSpec};
use crate::error::{Error, Result};
use crate::linalg::{self, devectorize, vectorize, ComplexMatrix, C64, ONE};
use crate::systems::LadderSystem;

/// Largest Hilbert-space dimension accepted by [`build_superoperator`].
pub const MAX_SUPEROPERATOR_DIM: usize = 64;
/// Minimum-eigenvalue threshold below which a state is flagged as unphysical.
pub const POSITIVITY_TOL: f64 = linalg::PSD_TOL;
/// Top-level population above which a truncated ladder is flagged as leaking.
pub const TRUNCATION_LEAK_TOL: f64 = 1e-6;
/// Eigenvalues with modulus below this are counted as stationary modes.
pub const ZERO_EIGENVALUE_TOL: f64 = 1e-10;

const GROWTH_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Rk4,
    Expm,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Rk4 => "rk4",
            Method::Expm => "expm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationOptions {
    pub t_final: f64,
    pub dt: f64,
    pub method: Method,
    pub record_every: usize,
}

impl PropagationOptions {
    pub fn new(t_final: f64, dt: f64, method: Method) -> Self {
        Self { t_final, dt, method, record_every: 1 }
    }

    pub fn record_every(mut self, k: usize) -> Self {
        self.record_every = k;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub trace_deviation: f64,
    pub hermiticity_deviation: f64,
    pub min_eigenvalue: f64,
    /// Population of the highest level, for truncated oscillator chains.
    pub top_population: Option<f64>,
}

impl StepDiagnostics {
    pub fn of(rho: &ComplexMatrix, ladder: bool) -> Result<Self> {
        let min_eigenvalue = linalg::hermitian_eigenvalues(&rho.hermitian_part())?[0];
        Ok(Self {
            trace_deviation: (rho.trace() - ONE).norm(),
            hermiticity_deviation: rho.hermiticity_deviation(),
            min_eigenvalue,
            top_population: ladder.then(|| rho[(rho.dim() - 1, rho.dim() - 1)].re),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Warning {
    /// Minimum eigenvalue fell below `−1e-8`; first occurrence.
    Positivity { time: f64, min_eigenvalue: f64 },
    /// Top ladder level population exceeded `1e-6`; first occurrence.
    TruncationLeak { time: f64, population: f64 },
}

/// Recorded states with per-record diagnostics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<ComplexMatrix>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub warnings: Vec<Warning>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &ComplexMatrix {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn populations(&self, k: usize) -> Vec<f64> {
        self.states[k].real_diagonal()
    }

    pub fn max_trace_deviation(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.trace_deviation).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.min_eigenvalue).fold(f64::INFINITY, f64::min)
    }

    fn record(&mut self, t: f64, rho: ComplexMatrix, ladder: bool) -> Result<()> {
        let d = StepDiagnostics::of(&rho, ladder)?;
        if d.min_eigenvalue < -POSITIVITY_TOL && !self.warnings.iter().any(|w| matches!(w, Warning::Positivity { .. })) {
            self.warnings.push(Warning::Positivity { time: t, min_eigenvalue: d.min_eigenvalue });
        }
        if let Some(p) = d.top_population {
            if p > TRUNCATION_LEAK_TOL && !self.warnings.iter().any(|w| matches!(w, Warning::TruncationLeak { .. })) {
                self.warnings.push(Warning::TruncationLeak { time: t, population: p });
            }
        }
        self.times.push(t);
        self.states.push(rho);
        self.diagnostics.push(d);
        Ok(())
    }
}

fn rk4_step(eval: &RhsEvaluator, rho: &ComplexMatrix, dt: f64) -> ComplexMatrix {
    let half = C64::new(dt / 2.0, 0.0);
    let k1 = eval.apply(rho);
    let mut y = rho.clone();
    y.add_scaled(half, &k1);
    let k2 = eval.apply(&y);
    let mut y = rho.clone();
    y.add_scaled(half, &k2);
    let k3 = eval.apply(&y);
    let mut y = rho.clone();
    y.add_scaled(C64::new(dt, 0.0), &k3);
    let k4 = eval.apply(&y);
    let mut out = rho.clone();
    out.add_scaled(C64::new(dt / 6.0, 0.0), &k1);
    out.add_scaled(C64::new(dt / 3.0, 0.0), &k2);
    out.add_scaled(C64::new(dt / 3.0, 0.0), &k3);
    out.add_scaled(C64::new(dt / 6.0, 0.0), &k4);
    out.hermitian_part()
}

/// One classical RK4 step followed by Hermitian symmetrization. The trace is
/// left as computed.
pub fn step_rk4(spec: &RhsSpec, rho: &ComplexMatrix, dt: f64) -> Result<ComplexMatrix> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::param(format!("time step must be positive, got {dt}")));
    }
    if rho.dim() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), found: rho.dim() });
    }
    let out = rk4_step(&spec.evaluator(), rho, dt);
    if !out.is_finite() {
        return Err(Error::Numerical("RK4 step produced a non-finite state".into()));
    }
    Ok(out)
}

/// Matrix `S` of the linear map `ρ ↦ dρ/dt` under column stacking:
/// `vec(master_rhs(ρ)) = S·vec(ρ)`.
pub fn build_superoperator(spec: &RhsSpec) -> Result<ComplexMatrix> {
    let n = spec.dim();
    if n > MAX_SUPEROPERATOR_DIM {
        return Err(Error::param(format!(
            "superoperator guard: dimension {n} exceeds {MAX_SUPEROPERATOR_DIM}"
        )));
    }
    let eval = spec.evaluator();
    let mut s = ComplexMatrix::zeros(n * n);
    for j in 0..n {
        for i in 0..n {
            let col = vectorize(&eval.apply(&ComplexMatrix::unit(n, i, j)));
            let c = j * n + i;
            for (r, z) in col.into_iter().enumerate() {
                s[(r, c)] = z;
            }
        }
    }
    Ok(s)
}

/// Eigenvalue summary of the superoperator.
#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<C64>,
    /// Eigenvalues with `|λ| ≤ 1e-10`.
    pub near_zero: usize,
    pub max_real_part: f64,
}

impl SpectrumReport {
    pub fn from_eigenvalues(eigenvalues: Vec<C64>) -> Self {
        let near_zero = eigenvalues.iter().filter(|z| z.norm() <= ZERO_EIGENVALUE_TOL).count();
        let max_real_part = eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        Self { eigenvalues, near_zero, max_real_part }
    }

    /// Exactly one stationary mode and no growing modes.
    pub fn is_relaxing(&self) -> bool {
        self.near_zero == 1 && self.max_real_part <= ZERO_EIGENVALUE_TOL
    }

    /// Some mode grows: the assembled generator is not a valid relaxation.
    pub fn has_growing_modes(&self) -> bool {
        self.max_real_part > ZERO_EIGENVALUE_TOL
    }
}

pub fn liouvillian_spectrum(spec: &RhsSpec) -> Result<SpectrumReport> {
    Ok(SpectrumReport::from_eigenvalues(linalg::general_eigenvalues(&build_superoperator(spec)?)?))
}

fn validate_initial_state(rho0: &ComplexMatrix, dim: usize) -> Result<()> {
    check_state(rho0, dim)?;
    let min = linalg::hermitian_eigenvalues(&rho0.hermitian_part())?[0];
    if min < -POSITIVITY_TOL {
        return Err(Error::InvalidState(format!("initial state is not positive (min eigenvalue {min:e})")));
    }
    Ok(())
}

/// Evolves `rho0` to `t_final` with `round(t_final/dt)` equal steps, recording
/// every `record_every`-th step and always the final one.
pub fn propagate(spec: &RhsSpec, rho0: &ComplexMatrix, opts: &PropagationOptions) -> Result<Trajectory> {
    validate_initial_state(rho0, spec.dim())?;
    if !(opts.t_final >= 0.0) || !opts.t_final.is_finite() {
        return Err(Error::param(format!("t_final must be non-negative, got {}", opts.t_final)));
    }
    if !(opts.dt > 0.0) || !opts.dt.is_finite() {
        return Err(Error::param(format!("dt must be positive, got {}", opts.dt)));
    }
    if opts.record_every == 0 {
        return Err(Error::param("record_every must be at least 1"));
    }
    let steps = (opts.t_final / opts.dt).round() as usize;
    let dt = if steps == 0 { opts.dt } else { opts.t_final / steps as f64 };
    let ladder = spec.ladder_system().is_some_and(LadderSystem::is_oscillator_chain);
    let n = spec.dim();

    let mut traj = Trajectory { times: vec![], states: vec![], diagnostics: vec![], warnings: vec![] };
    traj.record(0.0, rho0.clone(), ladder)?;
    let limit = GROWTH_LIMIT * rho0.max_abs().max(1.0);

    let mut advance: Box<dyn FnMut(&ComplexMatrix) -> Result<ComplexMatrix>> = match opts.method {
        Method::Rk4 => {
            let eval = spec.evaluator();
            Box::new(move |rho| Ok(rk4_step(&eval, rho, dt)))
        }
        Method::Expm => {
            let s = build_superoperator(spec)?;
            let p = linalg::matrix_exp(&s.scale_real(dt))?;
            Box::new(move |rho| devectorize(&p.mul_vec(&vectorize(rho))?, n))
        }
    };

    let mut rho = rho0.clone();
    for k in 1..=steps {
        rho = advance(&rho)?;
        if !rho.is_finite() {
            return Err(Error::Numerical(format!("non-finite state at step {k} (t = {})", k as f64 * dt)));
        }
        if rho.max_abs() > limit {
            return Err(Error::Numerical(format!("state norm grew beyond {GROWTH_LIMIT:e}x at step {k}")));
        }
        if k % opts.record_every == 0 || k == steps {
            traj.record(k as f64 * dt, rho.clone(), ladder)?;
        }
    }
    Ok(traj)
}
