//! System descriptions: two-level systems, truncated ladders, bath rate
//! models and the canonically scaled jump-operator pair.

use crate::error::{Error, Result};
use crate::linalg::{self, commutator, ComplexMatrix, C64};

/// Tolerance on `|ε| = 1` accepted by the two-level builders.
pub const UNIT_VECTOR_TOL: f64 = 1e-9;
/// Residual bound for the jump-operator identities.
pub const ALGEBRA_TOL: f64 = 1e-12;

fn check_rate(name: &str, value: f64) -> Result<()> {
    if !value.is_finite() || value < 0.0 {
        return Err(Error::param(format!("{name} must be finite and non-negative, got {value}")));
    }
    Ok(())
}

fn unit_direction(eps: [f64; 3]) -> Result<[f64; 3]> {
    let norm = eps.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !norm.is_finite() || norm == 0.0 {
        return Err(Error::param("eps must be a non-zero finite vector"));
    }
    if (norm - 1.0).abs() > UNIT_VECTOR_TOL {
        return Err(Error::param(format!(
            "eps must satisfy eps_x^2 + eps_y^2 + eps_z^2 = 1 within {UNIT_VECTOR_TOL:e} (|eps| = {norm})"
        )));
    }
    Ok([eps[0] / norm, eps[1] / norm, eps[2] / norm])
}

/// `(E/2)(ε_z σz + ε_x σx + ε_y σy)`; traceless with eigenvalues `±E/2`.
pub fn build_two_level_hamiltonian(energy_gap: f64, eps: [f64; 3]) -> Result<ComplexMatrix> {
    if !(energy_gap > 0.0) || !energy_gap.is_finite() {
        return Err(Error::param(format!("energy gap must be positive, got {energy_gap}")));
    }
    let [x, y, z] = unit_direction(eps)?;
    let half = energy_gap / 2.0;
    Ok(ComplexMatrix::from_rows(&[
        vec![C64::new(half * z, 0.0), C64::new(half * x, -half * y)],
        vec![C64::new(half * x, half * y), C64::new(-half * z, 0.0)],
    ])
    .expect("2x2 rows"))
}

/// Two-level system coupled to a bath with excitation rate `gamma_p`,
/// relaxation rate `gamma_m` and an optional pure-dephasing rate.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoLevelSystem {
    energy_gap: f64,
    direction: [f64; 3],
    pub gamma_p: f64,
    pub gamma_m: f64,
    pub dephasing_rate: f64,
}

impl TwoLevelSystem {
    pub fn new(energy_gap: f64, eps: [f64; 3], gamma_p: f64, gamma_m: f64, dephasing_rate: f64) -> Result<Self> {
        if !(energy_gap > 0.0) || !energy_gap.is_finite() {
            return Err(Error::param(format!("energy gap must be positive, got {energy_gap}")));
        }
        let direction = unit_direction(eps)?;
        check_rate("gamma_p", gamma_p)?;
        check_rate("gamma_m", gamma_m)?;
        check_rate("dephasing rate", dephasing_rate)?;
        Ok(Self { energy_gap, direction, gamma_p, gamma_m, dephasing_rate })
    }

    /// Rates from a thermal bath, `γp = γ f(E)` and `γm = γ(1 − f(E))`.
    pub fn thermal(energy_gap: f64, eps: [f64; 3], bath: &BathModel, dephasing_rate: f64) -> Result<Self> {
        let (gp, gm) = rates_from_bath(bath, energy_gap)?;
        Self::new(energy_gap, eps, gp, gm, dephasing_rate)
    }

    pub fn energy_gap(&self) -> f64 {
        self.energy_gap
    }

    pub fn direction(&self) -> [f64; 3] {
        self.direction
    }

    pub fn hamiltonian(&self) -> ComplexMatrix {
        build_two_level_hamiltonian(self.energy_gap, self.direction).expect("validated at construction")
    }

    pub fn total_rate(&self) -> f64 {
        self.gamma_p + self.gamma_m
    }

    pub fn is_closed(&self) -> bool {
        self.total_rate() == 0.0
    }

    /// Temperature at which the rates satisfy detailed balance, `γp/γm = e^{−E/T}`.
    ///
    /// `None` for a closed system or a population-inverting bath (`γp > γm`);
    /// infinite when `γp = γm`.
    pub fn detailed_balance_temperature(&self) -> Option<f64> {
        balance_temperature(self.energy_gap, self.gamma_p, self.gamma_m)
    }
}

fn balance_temperature(gap: f64, gamma_p: f64, gamma_m: f64) -> Option<f64> {
    if gamma_m <= 0.0 || gamma_p <= 0.0 || gamma_p > gamma_m {
        return None;
    }
    if gamma_p == gamma_m {
        return Some(f64::INFINITY);
    }
    Some(gap / (gamma_m / gamma_p).ln())
}

/// Canonically scaled transition operators `σp ∝ |s₁⟩⟨s₀|`, `σm = σp†`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpOperatorPair {
    pub sigma_p: ComplexMatrix,
    pub sigma_m: ComplexMatrix,
}

impl JumpOperatorPair {
    /// Builds a pair from the raising operator alone.
    pub fn from_raising(sigma_p: ComplexMatrix) -> Self {
        let sigma_m = sigma_p.adjoint();
        Self { sigma_p, sigma_m }
    }
}

/// Jump operators of a traceless, nondegenerate 2×2 Hamiltonian.
///
/// With unit eigenvectors `|s₀⟩` (energy `−E/2`) and `|s₁⟩` (`+E/2`),
/// `σp = |s₁⟩⟨s₀|` satisfies `[σp; σm] = 2H/E` and `{σp; σm} = I` without any
/// further rescaling.
pub fn jump_operators(h: &ComplexMatrix) -> Result<JumpOperatorPair> {
    if h.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: h.dim() });
    }
    let scale = h.max_abs().max(1.0);
    if !h.is_traceless(linalg::HERMITIAN_TOL * scale) {
        return Err(Error::param(format!("Hamiltonian must be traceless, trace = {}", h.trace())));
    }
    let eig = linalg::hermitian_eig(h)?;
    let gap = eig.values[1] - eig.values[0];
    if gap <= 1e-12 {
        return Err(Error::param(format!("Hamiltonian is degenerate (gap {gap:e})")));
    }
    let ground = eig.eigenvector(0);
    let excited = eig.eigenvector(1);
    Ok(JumpOperatorPair::from_raising(ComplexMatrix::outer(&excited, &ground)?))
}

/// Frobenius residuals of the jump-operator identities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgebraReport {
    /// `‖σp²‖`
    pub raising_square: f64,
    /// `‖σm²‖`
    pub lowering_square: f64,
    /// `‖[σp; σm] − 2H/E‖`
    pub commutator: f64,
    /// `‖{σp; σm} − I‖`
    pub anticommutator: f64,
    /// `‖σp σm σp − σp‖`
    pub raising_triple: f64,
    /// `‖σm σp σm − σm‖`
    pub lowering_triple: f64,
    /// `‖[H; σp] − E σp‖ / E`
    pub eigenoperator: f64,
}

impl AlgebraReport {
    pub const LABELS: [&'static str; 7] = [
        "raising_square",
        "lowering_square",
        "commutator",
        "anticommutator",
        "raising_triple",
        "lowering_triple",
        "eigenoperator",
    ];

    pub fn residuals(&self) -> [f64; 7] {
        [
            self.raising_square,
            self.lowering_square,
            self.commutator,
            self.anticommutator,
            self.raising_triple,
            self.lowering_triple,
            self.eigenoperator,
        ]
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals().into_iter().fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.residuals().iter().all(|r| r.is_finite() && *r <= ALGEBRA_TOL)
    }
}

/// Evaluates every jump-operator identity; never fails, mismatched input
/// shows up as infinite residuals.
pub fn verify_jump_algebra(pair: &JumpOperatorPair, h: &ComplexMatrix, energy_gap: f64) -> AlgebraReport {
    let (sp, sm) = (&pair.sigma_p, &pair.sigma_m);
    if sp.dim() != h.dim() || sm.dim() != h.dim() {
        let inf = f64::INFINITY;
        return AlgebraReport {
            raising_square: inf,
            lowering_square: inf,
            commutator: inf,
            anticommutator: inf,
            raising_triple: inf,
            lowering_triple: inf,
            eigenoperator: inf,
        };
    }
    let n = h.dim();
    let spsm = sp.matmul(sm);
    let smsp = sm.matmul(sp);
    let two_h_over_e = h.scale_real(2.0 / energy_gap);
    let eig_res = &commutator(h, sp).expect("same dim") - &sp.scale_real(energy_gap);
    AlgebraReport {
        raising_square: sp.matmul(sp).frobenius_norm(),
        lowering_square: sm.matmul(sm).frobenius_norm(),
        commutator: (&(&spsm - &smsp) - &two_h_over_e).frobenius_norm(),
        anticommutator: (&(&spsm + &smsp) - &ComplexMatrix::identity(n)).frobenius_norm(),
        raising_triple: (&spsm.matmul(sp) - sp).frobenius_norm(),
        lowering_triple: (&smsp.matmul(sm) - sm).frobenius_norm(),
        eigenoperator: eig_res.frobenius_norm() / energy_gap.abs(),
    }
}

/// Fermi distribution `1/(e^{E/T} + 1)`, evaluated without overflow.
pub fn fermi(energy: f64, temperature: f64) -> Result<f64> {
    if !(temperature > 0.0) {
        return Err(Error::param(format!("temperature must be positive, got {temperature}")));
    }
    let x = energy / temperature;
    if x.is_nan() {
        return Err(Error::param("energy/temperature is NaN"));
    }
    Ok(if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (x.exp() + 1.0)
    })
}

/// Thermal bath with coupling strength `γ` and temperature `T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathModel {
    pub coupling: f64,
    pub temperature: f64,
}

impl BathModel {
    pub fn new(coupling: f64, temperature: f64) -> Result<Self> {
        check_rate("bath coupling", coupling)?;
        if !(temperature > 0.0) {
            return Err(Error::param(format!("bath temperature must be positive, got {temperature}")));
        }
        Ok(Self { coupling, temperature })
    }

    pub fn fermi(&self, energy: f64) -> Result<f64> {
        fermi(energy, self.temperature)
    }
}

/// `(γp, γm) = (γ f(E), γ (1 − f(E)))`; the ratio obeys detailed balance.
pub fn rates_from_bath(bath: &BathModel, energy: f64) -> Result<(f64, f64)> {
    if !(energy > 0.0) {
        return Err(Error::param(format!("transition energy must be positive, got {energy}")));
    }
    check_rate("bath coupling", bath.coupling)?;
    let f = fermi(energy, bath.temperature)?;
    Ok((bath.coupling * f, bath.coupling * (1.0 - f)))
}

/// One allowed transition between `lower` and `upper` with its own rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionSpec {
    pub lower: usize,
    pub upper: usize,
    pub gamma_p: f64,
    pub gamma_m: f64,
    pub energy_gap: f64,
}

impl TransitionSpec {
    pub fn new(lower: usize, upper: usize, gamma_p: f64, gamma_m: f64, energies: &[f64]) -> Result<Self> {
        let n = energies.len();
        if lower >= n || upper >= n {
            return Err(Error::param(format!("transition ({lower}, {upper}) out of range for {n} levels")));
        }
        if lower == upper {
            return Err(Error::param(format!("transition ({lower}, {upper}) connects a level to itself")));
        }
        check_rate("transition gamma_p", gamma_p)?;
        check_rate("transition gamma_m", gamma_m)?;
        let energy_gap = energies[upper] - energies[lower];
        if !(energy_gap > 0.0) {
            return Err(Error::param(format!(
                "transition ({lower}, {upper}) must go up in energy, gap = {energy_gap}"
            )));
        }
        Ok(Self { lower, upper, gamma_p, gamma_m, energy_gap })
    }

    pub fn total_rate(&self) -> f64 {
        self.gamma_p + self.gamma_m
    }
}

/// Per-transition coupling strengths `γ_i` of a ladder.
#[derive(Debug, Clone, PartialEq)]
pub enum CouplingRule {
    /// `γ_i = (i + 1) γ`
    Harmonic,
    /// `γ_i = γ`
    Constant,
    /// Explicit `γ_i`, one per transition.
    Table(Vec<f64>),
}

impl CouplingRule {
    pub fn couplings(&self, transitions: usize, gamma: f64) -> Result<Vec<f64>> {
        let values = match self {
            CouplingRule::Harmonic => (0..transitions).map(|i| (i + 1) as f64 * gamma).collect(),
            CouplingRule::Constant => vec![gamma; transitions],
            CouplingRule::Table(t) => {
                if t.len() != transitions {
                    return Err(Error::param(format!(
                        "coupling table has {} entries, ladder has {transitions} transitions",
                        t.len()
                    )));
                }
                t.clone()
            }
        };
        for (i, &g) in values.iter().enumerate() {
            check_rate(&format!("coupling gamma_{i}"), g)?;
        }
        Ok(values)
    }
}

/// N-level system with a diagonal Hamiltonian and an explicit transition graph.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderSystem {
    energies: Vec<f64>,
    transitions: Vec<TransitionSpec>,
}

impl LadderSystem {
    pub fn new(energies: Vec<f64>, transitions: Vec<TransitionSpec>) -> Result<Self> {
        if energies.len() < 2 {
            return Err(Error::param("a ladder needs at least two levels"));
        }
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::param("level energies must be finite"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for t in &transitions {
            let checked = TransitionSpec::new(t.lower, t.upper, t.gamma_p, t.gamma_m, &energies)?;
            if (checked.energy_gap - t.energy_gap).abs() > 1e-12 * checked.energy_gap.max(1.0) {
                return Err(Error::param(format!(
                    "transition ({}, {}) gap {} disagrees with level energies",
                    t.lower, t.upper, t.energy_gap
                )));
            }
            let key = (t.lower.min(t.upper), t.lower.max(t.upper));
            if !seen.insert(key) {
                return Err(Error::param(format!("duplicate transition between levels {} and {}", key.0, key.1)));
            }
        }
        Ok(Self { energies, transitions })
    }

    /// Equally spaced oscillator truncated at `levels`, nearest-neighbour
    /// transitions with thermal rates `γ_i f(E)` and `γ_i (1 − f(E))`.
    pub fn oscillator(levels: usize, spacing: f64, rule: &CouplingRule, bath: &BathModel) -> Result<Self> {
        if levels < 2 {
            return Err(Error::param(format!("oscillator needs at least 2 levels, got {levels}")));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::param(format!("level spacing must be positive, got {spacing}")));
        }
        let unit = BathModel::new(1.0, bath.temperature)?;
        let (fp, fm) = rates_from_bath(&unit, spacing)?;
        let gammas = rule.couplings(levels - 1, bath.coupling)?;
        let energies: Vec<f64> = (0..levels).map(|i| i as f64 * spacing).collect();
        let transitions = gammas
            .iter()
            .enumerate()
            .map(|(i, &g)| TransitionSpec::new(i, i + 1, g * fp, g * fm, &energies))
            .collect::<Result<Vec<_>>>()?;
        Self::new(energies, transitions)
    }

    pub fn levels(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn transitions(&self) -> &[TransitionSpec] {
        &self.transitions
    }

    pub fn hamiltonian(&self) -> ComplexMatrix {
        ComplexMatrix::from_diagonal(&self.energies)
    }

    /// `γ_t = γp + γm` per transition, in transition order.
    pub fn couplings(&self) -> Vec<f64> {
        self.transitions.iter().map(TransitionSpec::total_rate).collect()
    }

    pub fn all_rates_positive(&self) -> bool {
        !self.transitions.is_empty() && self.transitions.iter().all(|t| t.gamma_p > 0.0 && t.gamma_m > 0.0)
    }

    /// True when the transition graph links every level.
    pub fn is_connected(&self) -> bool {
        let n = self.levels();
        let mut parent: Vec<usize> = (0..n).collect();
        fn root(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for t in &self.transitions {
            let (a, b) = (root(&mut parent, t.lower), root(&mut parent, t.upper));
            parent[a] = b;
        }
        let r0 = root(&mut parent, 0);
        (1..n).all(|i| root(&mut parent, i) == r0)
    }

    /// Constant level spacing, if the energies form an equally spaced ladder.
    pub fn uniform_spacing(&self) -> Option<f64> {
        let d = self.energies[1] - self.energies[0];
        let uniform = self
            .energies
            .windows(2)
            .all(|w| ((w[1] - w[0]) - d).abs() <= 1e-12 * d.abs().max(1.0));
        (uniform && d > 0.0).then_some(d)
    }

    /// Equally spaced levels joined only by `(k, k + 1)` transitions listed in
    /// level order: a truncated oscillator.
    pub fn is_oscillator_chain(&self) -> bool {
        self.uniform_spacing().is_some()
            && self.transitions.len() + 1 == self.levels()
            && self.transitions.iter().enumerate().all(|(k, t)| t.lower == k && t.upper == k + 1)
    }

    /// Common detailed-balance temperature of all transitions, if one exists
    /// (relative agreement 1e-9).
    pub fn detailed_balance_temperature(&self) -> Option<f64> {
        let mut temps = self.transitions.iter().map(|t| balance_temperature(t.energy_gap, t.gamma_p, t.gamma_m));
        let first = temps.next()??;
        for t in temps {
            let t = t?;
            let agree = if first.is_infinite() || t.is_infinite() {
                first == t
            } else {
                (t - first).abs() <= 1e-9 * first.abs()
            };
            if !agree {
                return None;
            }
        }
        Some(first)
    }
}

/// Rank-2 projector `Î_t = |i⟩⟨i| + |j⟩⟨j|` and the partial Hamiltonian `Ĥ_t = Î_t Ĥ Î_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionProjector {
    pub lower: usize,
    pub upper: usize,
    pub projector: ComplexMatrix,
    pub hamiltonian: ComplexMatrix,
}

impl TransitionProjector {
    /// `ρ_t = Î_t ρ Î_t`: keeps the four entries of the `{i, j}` block.
    pub fn project(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.projector.check_same_dim(rho)?;
        Ok(block_only(rho, self.lower, self.upper))
    }
}

fn block_only(m: &ComplexMatrix, a: usize, b: usize) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(m.dim());
    for &r in &[a, b] {
        for &c in &[a, b] {
            out[(r, c)] = m[(r, c)];
        }
    }
    out
}

pub fn transition_projector(t: &TransitionSpec, hamiltonian: &ComplexMatrix) -> Result<TransitionProjector> {
    let n = hamiltonian.dim();
    if t.lower >= n || t.upper >= n {
        return Err(Error::param(format!("transition ({}, {}) out of range for {n} levels", t.lower, t.upper)));
    }
    if t.lower == t.upper {
        return Err(Error::param("transition connects a level to itself"));
    }
    let mut projector = ComplexMatrix::zeros(n);
    projector[(t.lower, t.lower)] = linalg::ONE;
    projector[(t.upper, t.upper)] = linalg::ONE;
    Ok(TransitionProjector {
        lower: t.lower,
        upper: t.upper,
        projector,
        hamiltonian: block_only(hamiltonian, t.lower, t.upper),
    })
}
