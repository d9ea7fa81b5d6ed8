//! Right-hand-side generators.
//!
//! Two independent routes to the same two-level dynamics live here: the
//! jump-operator GKLS dissipator and the elemental Bloch form, which is
//! written directly in terms of `H` with no jump operators at all. The
//! multi-level form sums the two-level structure over transition blocks.
//!
//! The constant terms of the elemental form (`I/2` and `H/E`) are weighted by
//! `Tr ρ`, which leaves them unchanged on states and makes every generator
//! linear, so that superoperators can be built from matrix units.

use crate::error::{Error, Result};
use crate::linalg::{self, commutator, double_commutator, ComplexMatrix, C64, I, ONE, ZERO};
use crate::systems::{self, LadderSystem, TwoLevelSystem};

/// Trace tolerance for density-matrix inputs.
pub const STATE_TRACE_TOL: f64 = 1e-9;

/// Jump operator `L` with rate `γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jump {
    pub operator: ComplexMatrix,
    pub rate: f64,
}

impl Jump {
    pub fn new(operator: ComplexMatrix, rate: f64) -> Result<Self> {
        if !rate.is_finite() || rate < 0.0 {
            return Err(Error::param(format!("jump rate must be finite and non-negative, got {rate}")));
        }
        Ok(Self { operator, rate })
    }
}

pub(crate) fn check_state(rho: &ComplexMatrix, dim: usize) -> Result<()> {
    if rho.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: rho.dim() });
    }
    let scale = rho.max_abs().max(1.0);
    let dev = rho.hermiticity_deviation();
    if dev > linalg::HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian { deviation: dev });
    }
    let tr = rho.trace();
    if (tr - ONE).norm() > STATE_TRACE_TOL {
        return Err(Error::InvalidState(format!("density matrix trace is {tr}, expected 1")));
    }
    Ok(())
}

/// `Σ_j γ_j (L_j ρ L_j† − ½{L_j†L_j; ρ})`
pub fn gkls_dissipator(rho: &ComplexMatrix, jumps: &[Jump]) -> Result<ComplexMatrix> {
    for j in jumps {
        rho.check_same_dim(&j.operator)?;
        if !j.rate.is_finite() || j.rate < 0.0 {
            return Err(Error::param(format!("jump rate must be finite and non-negative, got {}", j.rate)));
        }
    }
    Ok(GklsKernel::new(jumps).apply(rho))
}

/// GKLS dissipator with `L†` and `L†L` precomputed.
#[derive(Debug, Clone)]
pub struct GklsKernel {
    terms: Vec<(ComplexMatrix, ComplexMatrix, ComplexMatrix, f64)>,
}

impl GklsKernel {
    pub fn new(jumps: &[Jump]) -> Self {
        let terms = jumps
            .iter()
            .map(|j| {
                let adj = j.operator.adjoint();
                let number = adj.matmul(&j.operator);
                (j.operator.clone(), adj, number, j.rate)
            })
            .collect();
        Self { terms }
    }

    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(rho.dim());
        for (l, adj, number, rate) in &self.terms {
            if *rate == 0.0 {
                continue;
            }
            let sandwich = l.matmul(rho).matmul(adj);
            let anti = &number.matmul(rho) + &rho.matmul(number);
            out.add_scaled(C64::new(*rate, 0.0), &sandwich);
            out.add_scaled(C64::new(-0.5 * rate, 0.0), &anti);
        }
        out
    }
}

/// Two-level elemental Bloch dissipator with `H` cached.
#[derive(Debug, Clone)]
pub struct TwoLevelEbe {
    hamiltonian: ComplexMatrix,
    energy_gap: f64,
    gamma_p: f64,
    gamma_m: f64,
}

impl TwoLevelEbe {
    pub fn new(sys: &TwoLevelSystem) -> Self {
        Self {
            hamiltonian: sys.hamiltonian(),
            energy_gap: sys.energy_gap(),
            gamma_p: sys.gamma_p,
            gamma_m: sys.gamma_m,
        }
    }

    /// `−(γp+γm)(ρ − Tr ρ·I/2) + (γp−γm)·Tr ρ·H/E + (γp+γm)[H;[H;ρ]]/(2E²)`
    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let sum = self.gamma_p + self.gamma_m;
        let diff = self.gamma_p - self.gamma_m;
        let e = self.energy_gap;
        let tr = rho.trace();
        let h = &self.hamiltonian;
        let mut out = double_commutator(h, rho).expect("2x2").scale_real(sum / (2.0 * e * e));
        out.add_scaled(C64::new(-sum, 0.0), rho);
        out.add_scaled(tr * (0.5 * sum), &ComplexMatrix::identity(2));
        out.add_scaled(tr * (diff / e), h);
        out
    }
}

/// Dissipative part of the two-level elemental Bloch equation (no `−i[H;ρ]`,
/// no pure dephasing).
pub fn ebe_two_level(rho: &ComplexMatrix, sys: &TwoLevelSystem) -> Result<ComplexMatrix> {
    check_state(rho, 2)?;
    Ok(TwoLevelEbe::new(sys).apply(rho))
}

#[derive(Clone, Copy)]
struct Block([[C64; 2]; 2]);

impl Block {
    fn gather(m: &ComplexMatrix, a: usize, b: usize) -> Self {
        Block([[m[(a, a)], m[(a, b)]], [m[(b, a)], m[(b, b)]]])
    }

    fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    fn mul(&self, o: &Block) -> Block {
        let (x, y) = (&self.0, &o.0);
        Block([
            [x[0][0] * y[0][0] + x[0][1] * y[1][0], x[0][0] * y[0][1] + x[0][1] * y[1][1]],
            [x[1][0] * y[0][0] + x[1][1] * y[1][0], x[1][0] * y[0][1] + x[1][1] * y[1][1]],
        ])
    }

    fn sub(&self, o: &Block) -> Block {
        let mut r = *self;
        for i in 0..2 {
            for j in 0..2 {
                r.0[i][j] -= o.0[i][j];
            }
        }
        r
    }

    fn commutator(&self, o: &Block) -> Block {
        self.mul(o).sub(&o.mul(self))
    }
}

/// Multi-level elemental Bloch dissipator over the transitions of a ladder.
///
/// For every transition `t` between levels `i < j`, with `ρ_t = Î_t ρ Î_t`
/// and `Ĥ_t = Î_t Ĥ Î_t`:
///
/// ```text
/// −(γp+γm)(ρ_t − Tr ρ_t·Î_t/2)
///   + (γp−γm)·(Ĥ_t − Tr Ĥ_t·Î_t/2)/E_t·Tr ρ_t
///   + (γp+γm)[Ĥ_t;[Ĥ_t;ρ_t]]/(2E_t²)
/// ```
///
/// Contributions are accumulated in transition order.
#[derive(Debug, Clone)]
pub struct MultiLevelEbe {
    hamiltonian: ComplexMatrix,
    transitions: Vec<systems::TransitionSpec>,
}

impl MultiLevelEbe {
    pub fn new(sys: &LadderSystem) -> Self {
        Self { hamiltonian: sys.hamiltonian(), transitions: sys.transitions().to_vec() }
    }

    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(rho.dim());
        for t in &self.transitions {
            let (a, b) = (t.lower, t.upper);
            let sum = t.gamma_p + t.gamma_m;
            let diff = t.gamma_p - t.gamma_m;
            let e = t.energy_gap;
            let r = Block::gather(rho, a, b);
            let h = Block::gather(&self.hamiltonian, a, b);
            let tr_r = r.trace();
            let half_tr_h = h.trace() * 0.5;
            let deph = h.commutator(&h.commutator(&r));
            let idx = [a, b];
            for (p, &row) in idx.iter().enumerate() {
                for (q, &col) in idx.iter().enumerate() {
                    let delta = if p == q { ONE } else { ZERO };
                    let mixing = -(r.0[p][q] - tr_r * 0.5 * delta) * sum;
                    let relax = (h.0[p][q] - half_tr_h * delta) * (diff / e) * tr_r;
                    let dephasing = deph.0[p][q] * (sum / (2.0 * e * e));
                    out[(row, col)] += mixing + relax + dephasing;
                }
            }
        }
        out
    }
}

pub fn ebe_multi_level(rho: &ComplexMatrix, sys: &LadderSystem) -> Result<ComplexMatrix> {
    check_state(rho, sys.levels())?;
    Ok(MultiLevelEbe::new(sys).apply(rho))
}

/// `Γ·[H;[H;ρ]]`, the pure-dephasing operator as a bare double commutator.
///
/// For diagonal `H` the coherence `ρ_ab` is multiplied by `Γ(E_a − E_b)²`, so
/// the operator damps coherences when it enters the equation of motion with a
/// minus sign; [`master_rhs`] applies it that way.
pub fn pure_dephasing(rho: &ComplexMatrix, h: &ComplexMatrix, gamma: f64) -> Result<ComplexMatrix> {
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(Error::param(format!("dephasing rate must be finite and non-negative, got {gamma}")));
    }
    Ok(double_commutator(h, rho)?.scale_real(gamma))
}

/// Jumps `σp`, `σm` of a two-level system with rates `γp`, `γm`.
pub fn canonical_jumps(sys: &TwoLevelSystem) -> Result<Vec<Jump>> {
    let pair = systems::jump_operators(&sys.hamiltonian())?;
    Ok(vec![Jump::new(pair.sigma_p, sys.gamma_p)?, Jump::new(pair.sigma_m, sys.gamma_m)?])
}

/// Pairwise GKLS alternative to the multi-level elemental form: `|j⟩⟨i|` at
/// `γp` and `|i⟩⟨j|` at `γm` for each transition. Agrees with
/// [`ebe_multi_level`] on states confined to a transition block and on
/// populations; differs on coherences reaching outside a block.
pub fn pairwise_gkls_jumps(sys: &LadderSystem) -> Vec<Jump> {
    let n = sys.levels();
    sys.transitions()
        .iter()
        .flat_map(|t| {
            [
                Jump { operator: ComplexMatrix::unit(n, t.upper, t.lower), rate: t.gamma_p },
                Jump { operator: ComplexMatrix::unit(n, t.lower, t.upper), rate: t.gamma_m },
            ]
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DissipatorKind {
    None,
    Gkls,
    Ebe2,
    EbeN,
}

impl DissipatorKind {
    pub fn label(self) -> &'static str {
        match self {
            DissipatorKind::None => "none",
            DissipatorKind::Gkls => "gkls",
            DissipatorKind::Ebe2 => "ebe2",
            DissipatorKind::EbeN => "eben",
        }
    }
}

#[derive(Debug, Clone)]
pub enum Dissipator {
    None,
    Gkls(Vec<Jump>),
    TwoLevel(TwoLevelSystem),
    MultiLevel(LadderSystem),
}

impl Dissipator {
    pub fn kind(&self) -> DissipatorKind {
        match self {
            Dissipator::None => DissipatorKind::None,
            Dissipator::Gkls(_) => DissipatorKind::Gkls,
            Dissipator::TwoLevel(_) => DissipatorKind::Ebe2,
            Dissipator::MultiLevel(_) => DissipatorKind::EbeN,
        }
    }
}

/// Everything needed to evaluate `dρ/dt`.
#[derive(Debug, Clone)]
pub struct RhsSpec {
    hamiltonian: ComplexMatrix,
    dissipator: Dissipator,
    include_unitary: bool,
    dephasing_rate: f64,
    ladder: Option<LadderSystem>,
    balance_temperature: Option<f64>,
}

impl RhsSpec {
    pub fn new(
        hamiltonian: ComplexMatrix,
        dissipator: Dissipator,
        include_unitary: bool,
        dephasing_rate: f64,
    ) -> Result<Self> {
        let n = hamiltonian.dim();
        let dev = hamiltonian.hermiticity_deviation();
        if dev > linalg::HERMITIAN_TOL * hamiltonian.max_abs().max(1.0) {
            return Err(Error::NotHermitian { deviation: dev });
        }
        if !dephasing_rate.is_finite() || dephasing_rate < 0.0 {
            return Err(Error::param(format!("dephasing rate must be finite and non-negative, got {dephasing_rate}")));
        }
        let (ladder, balance_temperature) = match &dissipator {
            Dissipator::None => (None, None),
            Dissipator::Gkls(jumps) => {
                for j in jumps {
                    hamiltonian.check_same_dim(&j.operator)?;
                    Jump::new(j.operator.clone(), j.rate)?;
                }
                (None, None)
            }
            Dissipator::TwoLevel(sys) => {
                if n != 2 {
                    return Err(Error::DimensionMismatch { expected: 2, found: n });
                }
                (None, sys.detailed_balance_temperature())
            }
            Dissipator::MultiLevel(sys) => {
                if sys.levels() != n {
                    return Err(Error::DimensionMismatch { expected: sys.levels(), found: n });
                }
                (Some(sys.clone()), sys.detailed_balance_temperature())
            }
        };
        Ok(Self { hamiltonian, dissipator, include_unitary, dephasing_rate, ladder, balance_temperature })
    }

    /// Full two-level elemental Bloch equation including the system's pure dephasing.
    pub fn two_level(sys: &TwoLevelSystem) -> Self {
        Self::new(sys.hamiltonian(), Dissipator::TwoLevel(sys.clone()), true, sys.dephasing_rate)
            .expect("two-level system is consistent")
    }

    /// The same two-level dynamics through the canonical jump operators.
    pub fn two_level_gkls(sys: &TwoLevelSystem) -> Result<Self> {
        let mut spec = Self::new(sys.hamiltonian(), Dissipator::Gkls(canonical_jumps(sys)?), true, sys.dephasing_rate)?;
        spec.balance_temperature = sys.detailed_balance_temperature();
        Ok(spec)
    }

    pub fn ladder(sys: &LadderSystem, dephasing_rate: f64) -> Result<Self> {
        Self::new(sys.hamiltonian(), Dissipator::MultiLevel(sys.clone()), true, dephasing_rate)
    }

    pub fn ladder_gkls(sys: &LadderSystem, dephasing_rate: f64) -> Result<Self> {
        let mut spec = Self::new(sys.hamiltonian(), Dissipator::Gkls(pairwise_gkls_jumps(sys)), true, dephasing_rate)?;
        spec.ladder = Some(sys.clone());
        spec.balance_temperature = sys.detailed_balance_temperature();
        Ok(spec)
    }

    pub fn closed(hamiltonian: ComplexMatrix) -> Result<Self> {
        Self::new(hamiltonian, Dissipator::None, true, 0.0)
    }

    pub fn without_unitary(mut self) -> Self {
        self.include_unitary = false;
        self
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.hamiltonian
    }

    pub fn dissipator(&self) -> &Dissipator {
        &self.dissipator
    }

    pub fn kind(&self) -> DissipatorKind {
        self.dissipator.kind()
    }

    pub fn include_unitary(&self) -> bool {
        self.include_unitary
    }

    pub fn dephasing_rate(&self) -> f64 {
        self.dephasing_rate
    }

    /// Ladder behind an EBEN or pairwise-GKLS spec, used for truncation monitoring.
    pub fn ladder_system(&self) -> Option<&LadderSystem> {
        self.ladder.as_ref()
    }

    /// Bath temperature implied by detailed-balance rates, if all transitions agree.
    pub fn detailed_balance_temperature(&self) -> Option<f64> {
        self.balance_temperature
    }

    /// Prepared evaluator with per-spec constants cached.
    pub fn evaluator(&self) -> RhsEvaluator {
        let kernel = match &self.dissipator {
            Dissipator::None => Kernel::None,
            Dissipator::Gkls(j) => Kernel::Gkls(GklsKernel::new(j)),
            Dissipator::TwoLevel(s) => Kernel::Ebe2(TwoLevelEbe::new(s)),
            Dissipator::MultiLevel(s) => Kernel::EbeN(MultiLevelEbe::new(s)),
        };
        RhsEvaluator {
            hamiltonian: self.hamiltonian.clone(),
            kernel,
            include_unitary: self.include_unitary,
            dephasing_rate: self.dephasing_rate,
        }
    }
}

#[derive(Debug, Clone)]
enum Kernel {
    None,
    Gkls(GklsKernel),
    Ebe2(TwoLevelEbe),
    EbeN(MultiLevelEbe),
}

/// Linear map `ρ ↦ dρ/dt` for one [`RhsSpec`].
#[derive(Debug, Clone)]
pub struct RhsEvaluator {
    hamiltonian: ComplexMatrix,
    kernel: Kernel,
    include_unitary: bool,
    dephasing_rate: f64,
}

impl RhsEvaluator {
    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    /// Evaluates the generator on any square matrix of the right size.
    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let h = &self.hamiltonian;
        let mut out = match &self.kernel {
            Kernel::None => ComplexMatrix::zeros(rho.dim()),
            Kernel::Gkls(k) => k.apply(rho),
            Kernel::Ebe2(k) => k.apply(rho),
            Kernel::EbeN(k) => k.apply(rho),
        };
        if self.include_unitary {
            out.add_scaled(-I, &commutator(h, rho).expect("checked dims"));
        }
        if self.dephasing_rate > 0.0 {
            out.add_scaled(C64::new(-self.dephasing_rate, 0.0), &double_commutator(h, rho).expect("checked dims"));
        }
        out
    }
}

/// `dρ/dt = −i[H;ρ] + D(ρ) − Γ[H;[H;ρ]]` for the dissipator `D` selected by `spec`.
pub fn master_rhs(rho: &ComplexMatrix, spec: &RhsSpec) -> Result<ComplexMatrix> {
    if rho.dim() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), found: rho.dim() });
    }
    Ok(spec.evaluator().apply(rho))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{pauli_x, pauli_z, trace_distance};
    use crate::sampling;
    use crate::stationary::gibbs_state;
    use crate::systems::{BathModel, CouplingRule, TransitionSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn no_jumps_no_dissipation() {
        let rho = ComplexMatrix::from_diagonal(&[0.3, 0.7]);
        assert_eq!(gkls_dissipator(&rho, &[]).unwrap(), ComplexMatrix::zeros(2));
    }

    #[test]
    fn pure_decay_from_excited_state() {
        let gamma = 0.8;
        let rho = ComplexMatrix::from_diagonal(&[1.0, 0.0]);
        let sm = ComplexMatrix::unit(2, 1, 0);
        let d = gkls_dissipator(&rho, &[Jump::new(sm, gamma).unwrap()]).unwrap();
        let expect = ComplexMatrix::from_diagonal(&[-gamma, gamma]);
        assert!((&d - &expect).max_abs() < 1e-16);
    }

    #[test]
    fn gkls_errors() {
        let rho = ComplexMatrix::identity(2).scale_real(0.5);
        let j = Jump { operator: ComplexMatrix::identity(3), rate: 1.0 };
        assert!(gkls_dissipator(&rho, &[j]).is_err());
        let j = Jump { operator: ComplexMatrix::identity(2), rate: -1.0 };
        assert!(gkls_dissipator(&rho, &[j]).is_err());
        assert!(Jump::new(ComplexMatrix::identity(2), f64::NAN).is_err());
    }

    #[test]
    fn gkls_vanishes_on_gibbs_state() {
        let mut r = rng(21);
        for _ in 0..50 {
            let (sys, bath) = sampling::random_thermal_two_level(&mut r);
            let rho = gibbs_state(&sys.hamiltonian(), bath.temperature).unwrap();
            let d = gkls_dissipator(&rho, &canonical_jumps(&sys).unwrap()).unwrap();
            assert!(d.max_abs() <= 1e-12, "{}", d.max_abs());
        }
    }

    #[test]
    fn gkls_output_is_hermitian_and_traceless() {
        let mut r = rng(22);
        for _ in 0..100 {
            let sys = sampling::random_two_level_system(&mut r);
            let rho = sampling::random_density_matrix(&mut r, 2);
            let d = gkls_dissipator(&rho, &canonical_jumps(&sys).unwrap()).unwrap();
            assert!(d.is_hermitian(1e-13));
            assert!(d.trace().norm() <= 1e-13 * sys.total_rate().max(1.0));
        }
    }

    #[test]
    fn ebe_vanishes_at_infinite_temperature_mixture() {
        let sys = TwoLevelSystem::new(1.3, [0.6, 0.0, 0.8], 0.4, 0.4, 0.0).unwrap();
        let rho = ComplexMatrix::identity(2).scale_real(0.5);
        assert!(ebe_two_level(&rho, &sys).unwrap().max_abs() < 1e-16);
    }

    #[test]
    fn ebe_on_generalized_gibbs_form() {
        let mut r = rng(23);
        for _ in 0..50 {
            let sys = sampling::random_two_level_system(&mut r);
            let lambda = r.random_range(-1.0..1.0);
            let h_over_e = sys.hamiltonian().scale_real(1.0 / sys.energy_gap());
            let mut rho = ComplexMatrix::identity(2).scale_real(0.5);
            rho.add_scaled(C64::new(lambda, 0.0), &h_over_e);
            let d = ebe_two_level(&rho, &sys).unwrap();
            let coeff = -(sys.gamma_p + sys.gamma_m) * lambda + (sys.gamma_p - sys.gamma_m);
            assert!((&d - &h_over_e.scale_real(coeff)).max_abs() < 1e-14);
        }
    }

    #[test]
    fn ebe_equals_gkls_with_canonical_jumps() {
        let mut r = rng(24);
        for _ in 0..1000 {
            let sys = sampling::random_two_level_system(&mut r);
            let rho = sampling::random_density_matrix(&mut r, 2);
            let ebe = ebe_two_level(&rho, &sys).unwrap();
            let gkls = gkls_dissipator(&rho, &canonical_jumps(&sys).unwrap()).unwrap();
            assert!((&ebe - &gkls).frobenius_norm() <= 1e-12 * sys.total_rate());
        }
    }

    #[test]
    fn ebe_rejects_bad_states() {
        let sys = TwoLevelSystem::new(1.0, [0.0, 0.0, 1.0], 0.1, 0.2, 0.0).unwrap();
        assert!(ebe_two_level(&ComplexMatrix::identity(3).scale_real(1.0 / 3.0), &sys).is_err());
        assert!(ebe_two_level(&ComplexMatrix::identity(2), &sys).is_err());
        let mut bad = ComplexMatrix::identity(2).scale_real(0.5);
        bad[(0, 1)] = C64::new(0.3, 0.0);
        assert!(matches!(ebe_two_level(&bad, &sys), Err(Error::NotHermitian { .. })));
    }

    /// Verbatim multi-level form with full-size projectors and matrix products.
    fn multi_level_oracle(rho: &ComplexMatrix, sys: &LadderSystem) -> ComplexMatrix {
        let h = sys.hamiltonian();
        let mut out = ComplexMatrix::zeros(sys.levels());
        for t in sys.transitions() {
            let p = systems::transition_projector(t, &h).unwrap();
            let rho_t = p.projector.matmul(rho).matmul(&p.projector);
            let h_t = p.projector.matmul(&h).matmul(&p.projector);
            let tr_r = rho_t.trace();
            let tr_h = h_t.trace();
            let sum = t.gamma_p + t.gamma_m;
            let diff = t.gamma_p - t.gamma_m;
            let e = t.energy_gap;
            let mut mixing = rho_t.clone();
            mixing.add_scaled(-tr_r * 0.5, &p.projector);
            let mut shifted = h_t.clone();
            shifted.add_scaled(-tr_h * 0.5, &p.projector);
            out.add_scaled(C64::new(-sum, 0.0), &mixing);
            out.add_scaled(tr_r * (diff / e), &shifted);
            out.add_scaled(C64::new(sum / (2.0 * e * e), 0.0), &double_commutator(&h_t, &rho_t).unwrap());
        }
        out
    }

    fn random_graph(r: &mut ChaCha8Rng) -> LadderSystem {
        let energies = vec![0.0, 0.7, 1.9, 2.4, 3.8];
        let pairs = [(0, 1), (1, 2), (2, 3), (3, 4), (0, 2), (1, 4)];
        let ts = pairs
            .iter()
            .map(|&(i, j)| TransitionSpec::new(i, j, r.random_range(0.0..1.0), r.random_range(0.0..1.0), &energies).unwrap())
            .collect();
        LadderSystem::new(energies, ts).unwrap()
    }

    #[test]
    fn multi_level_matches_projector_oracle() {
        let mut r = rng(25);
        for _ in 0..50 {
            let sys = random_graph(&mut r);
            let rho = sampling::random_density_matrix(&mut r, 5);
            let fast = ebe_multi_level(&rho, &sys).unwrap();
            let slow = multi_level_oracle(&rho, &sys);
            assert!((&fast - &slow).max_abs() <= 1e-14);
            assert!(fast.is_hermitian(1e-14));
            assert!(fast.trace().norm() <= 1e-13);
        }
    }

    #[test]
    fn multi_level_reduces_to_two_level_on_a_block() {
        let mut r = rng(26);
        for _ in 0..50 {
            let sys = random_graph(&mut r);
            let h = sys.hamiltonian();
            for t in sys.transitions() {
                let p = systems::transition_projector(t, &h).unwrap();
                let small = sampling::random_density_matrix(&mut r, 2);
                let mut rho = ComplexMatrix::zeros(5);
                let idx = [t.lower, t.upper];
                for a in 0..2 {
                    for b in 0..2 {
                        rho[(idx[a], idx[b])] = small[(a, b)];
                    }
                }
                assert_eq!(p.project(&rho).unwrap(), rho);
                // Block basis (lower, upper) puts the upper level second: H_block − offset = −(E/2)σz.
                let two = TwoLevelSystem::new(t.energy_gap, [0.0, 0.0, -1.0], t.gamma_p, t.gamma_m, 0.0).unwrap();
                let reference = ebe_two_level(&small, &two).unwrap();
                let full = ebe_multi_level(&rho, &sys).unwrap();
                let only_t = LadderSystem::new(sys.energies().to_vec(), vec![*t]).unwrap();
                let block_part = ebe_multi_level(&rho, &only_t).unwrap();
                for a in 0..2 {
                    for b in 0..2 {
                        assert!((block_part[(idx[a], idx[b])] - reference[(a, b)]).norm() <= 1e-12);
                    }
                }
                assert!((&block_part - &p.project(&block_part).unwrap()).max_abs() == 0.0);
                assert!(full.trace().norm() <= 1e-13);
            }
        }
    }

    #[test]
    fn multi_level_vanishes_on_oscillator_gibbs_state() {
        for rule in [CouplingRule::Harmonic, CouplingRule::Constant, CouplingRule::Table((0..9).map(|i| 1.0 + (i * i) as f64).collect())] {
            let bath = BathModel::new(0.7, 1.3).unwrap();
            let sys = LadderSystem::oscillator(10, 0.9, &rule, &bath).unwrap();
            let rho = gibbs_state(&sys.hamiltonian(), bath.temperature).unwrap();
            let d = ebe_multi_level(&rho, &sys).unwrap();
            assert!(d.max_abs() <= 1e-10, "{rule:?}: {}", d.max_abs());
        }
    }

    #[test]
    fn diagonal_state_follows_level_rate_equation() {
        let mut r = rng(27);
        let n = 7;
        let bath = BathModel::new(1.0, 0.9).unwrap();
        let table: Vec<f64> = (0..n - 1).map(|_| r.random_range(0.1..2.0)).collect();
        let sys = LadderSystem::oscillator(n, 1.1, &CouplingRule::Table(table.clone()), &bath).unwrap();
        let rho = sampling::random_populations(&mut r, n);
        let p = rho.real_diagonal();
        let d = ebe_multi_level(&rho, &sys).unwrap();
        let f = systems::fermi(1.1, 0.9).unwrap();
        let g = |i: isize| if i < 0 || i as usize >= n - 1 { 0.0 } else { table[i as usize] };
        let pop = |i: isize| if i < 0 || i as usize >= n { 0.0 } else { p[i as usize] };
        for i in 0..n as isize {
            let expect = -(f * g(i) + (1.0 - f) * g(i - 1)) * pop(i)
                + (1.0 - f) * g(i) * pop(i + 1)
                + f * g(i - 1) * pop(i - 1);
            assert!((d[(i as usize, i as usize)].re - expect).abs() <= 1e-14);
        }
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    assert!(d[(i, j)].norm() == 0.0);
                }
            }
        }
    }

    #[test]
    fn pairwise_gkls_agrees_on_blocks_and_populations() {
        let mut r = rng(28);
        let sys = random_graph(&mut r);
        let jumps = pairwise_gkls_jumps(&sys);
        let pops = sampling::random_populations(&mut r, 5);
        let a = ebe_multi_level(&pops, &sys).unwrap();
        let b = gkls_dissipator(&pops, &jumps).unwrap();
        assert!((&a - &b).max_abs() <= 1e-14);
        // A coherence between levels 0 and 3 is untouched by the elemental form
        // but damped by the pairwise jumps.
        let mut rho = ComplexMatrix::from_diagonal(&[0.5, 0.0, 0.0, 0.5, 0.0]);
        rho[(0, 3)] = C64::new(0.5, 0.0);
        rho[(3, 0)] = C64::new(0.5, 0.0);
        let a = ebe_multi_level(&rho, &sys).unwrap();
        let b = gkls_dissipator(&rho, &jumps).unwrap();
        assert_eq!(a[(0, 3)], ZERO);
        assert!(b[(0, 3)].norm() > 1e-3);
    }

    #[test]
    fn multi_level_rejects_wrong_dimension() {
        let bath = BathModel::new(1.0, 1.0).unwrap();
        let sys = LadderSystem::oscillator(3, 1.0, &CouplingRule::Harmonic, &bath).unwrap();
        assert!(ebe_multi_level(&ComplexMatrix::identity(2).scale_real(0.5), &sys).is_err());
    }

    #[test]
    fn dephasing_examples() {
        let e = 1.7;
        let h = pauli_z().scale_real(e / 2.0);
        let diag = ComplexMatrix::from_diagonal(&[0.2, 0.8]);
        assert_eq!(pure_dephasing(&diag, &h, 0.9).unwrap().max_abs(), 0.0);
        let mut rho = ComplexMatrix::identity(2);
        rho.add_scaled(ONE, &pauli_x());
        let rho = rho.scale_real(0.5);
        let d = pure_dephasing(&rho, &h, 1.0).unwrap();
        assert!((&d - &pauli_x().scale_real(e * e / 2.0)).max_abs() < 1e-14);
        assert!(d.trace().norm() < 1e-15);
        let d2 = pure_dephasing(&rho, &h.scale_real(2.0), 1.0).unwrap();
        assert!((d2.frobenius_norm() - 4.0 * d.frobenius_norm()).abs() < 1e-13);
        assert!(pure_dephasing(&rho, &h, -0.1).is_err());
    }

    #[test]
    fn closed_system_eigenprojector_is_stationary() {
        let sys = TwoLevelSystem::new(1.4, [0.3, -0.4, 0.866_025_403_784_438_6], 0.0, 0.0, 0.0).unwrap();
        let spec = RhsSpec::closed(sys.hamiltonian()).unwrap();
        let eig = linalg::hermitian_eig(&sys.hamiltonian()).unwrap();
        let v = eig.eigenvector(1);
        let proj = ComplexMatrix::outer(&v, &v).unwrap();
        assert!(master_rhs(&proj, &spec).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn ebe_and_gkls_specs_agree() {
        let mut r = rng(29);
        for _ in 0..200 {
            let sys = sampling::random_two_level_system(&mut r);
            let rho = sampling::random_density_matrix(&mut r, 2);
            let a = master_rhs(&rho, &RhsSpec::two_level(&sys)).unwrap();
            let b = master_rhs(&rho, &RhsSpec::two_level_gkls(&sys).unwrap()).unwrap();
            assert!((&a - &b).max_abs() <= 1e-12);
        }
    }

    #[test]
    fn gibbs_state_is_stationary_with_any_dephasing() {
        let mut r = rng(30);
        for _ in 0..50 {
            let (sys, bath) = sampling::random_thermal_two_level(&mut r);
            let rho = gibbs_state(&sys.hamiltonian(), bath.temperature).unwrap();
            let d = master_rhs(&rho, &RhsSpec::two_level(&sys)).unwrap();
            assert!(d.max_abs() <= 1e-12, "{}", d.max_abs());
        }
    }

    #[test]
    fn rhs_preserves_trace_and_hermiticity() {
        let mut r = rng(31);
        for _ in 0..200 {
            let sys = sampling::random_two_level_system(&mut r);
            let rho = sampling::random_density_matrix(&mut r, 2);
            let d = master_rhs(&rho, &RhsSpec::two_level(&sys)).unwrap();
            assert!(d.trace().norm() <= 1e-12);
            assert!(d.hermiticity_deviation() <= 1e-12 * d.max_abs().max(1.0));
            let lad = random_graph(&mut r);
            let rho = sampling::random_density_matrix(&mut r, 5);
            let d = master_rhs(&rho, &RhsSpec::ladder(&lad, 0.3).unwrap()).unwrap();
            assert!(d.trace().norm() <= 1e-12);
            assert!(d.hermiticity_deviation() <= 1e-12 * d.max_abs().max(1.0));
        }
    }

    #[test]
    fn dephasing_damps_coherences_in_the_equation_of_motion() {
        let h = pauli_z().scale_real(0.5);
        let spec = RhsSpec::new(h, Dissipator::None, false, 0.4).unwrap();
        let mut rho = ComplexMatrix::identity(2).scale_real(0.5);
        rho[(0, 1)] = C64::new(0.5, 0.0);
        rho[(1, 0)] = C64::new(0.5, 0.0);
        let d = master_rhs(&rho, &spec).unwrap();
        // d ρ01/dt = −Γ E² ρ01
        assert!((d[(0, 1)].re + 0.4 * 0.5).abs() < 1e-15);
        let later = &rho + &d.scale_real(0.01);
        assert!(trace_distance(&later, &ComplexMatrix::identity(2).scale_real(0.5)).unwrap() < 0.5);
    }

    #[test]
    fn spec_validation() {
        let bath = BathModel::new(1.0, 1.0).unwrap();
        let lad = LadderSystem::oscillator(3, 1.0, &CouplingRule::Harmonic, &bath).unwrap();
        let sys = TwoLevelSystem::new(1.0, [0.0, 0.0, 1.0], 0.1, 0.2, 0.0).unwrap();
        assert!(RhsSpec::new(ComplexMatrix::identity(3), Dissipator::TwoLevel(sys.clone()), true, 0.0).is_err());
        assert!(RhsSpec::new(ComplexMatrix::identity(2), Dissipator::MultiLevel(lad.clone()), true, 0.0).is_err());
        assert!(RhsSpec::new(ComplexMatrix::unit(2, 0, 1), Dissipator::None, true, 0.0).is_err());
        assert!(RhsSpec::new(ComplexMatrix::identity(2), Dissipator::None, true, -1.0).is_err());
        assert!(master_rhs(&ComplexMatrix::identity(3), &RhsSpec::two_level(&sys)).is_err());
        assert_eq!(RhsSpec::ladder(&lad, 0.0).unwrap().kind(), DissipatorKind::EbeN);
        assert!((RhsSpec::ladder(&lad, 0.0).unwrap().detailed_balance_temperature().unwrap() - 1.0).abs() < 1e-12);
    }
}
