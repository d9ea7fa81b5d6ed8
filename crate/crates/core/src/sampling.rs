//! Seeded random draws of systems and states, shared by the property tests,
//! the `verify-algebra` and `bench` subcommands.

use rand::Rng;

use crate::linalg::{ComplexMatrix, C64};
use crate::systems::{BathModel, TwoLevelSystem};

/// Energy gap in `[0.1, 10)` and a direction uniform on the unit sphere.
pub fn random_gap_and_direction<R: Rng>(rng: &mut R) -> (f64, [f64; 3]) {
    let e = rng.random_range(0.1..10.0);
    (e, random_unit_vector(rng))
}

pub fn random_unit_vector<R: Rng>(rng: &mut R) -> [f64; 3] {
    let z: f64 = rng.random_range(-1.0..1.0);
    let phi = rng.random_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).max(0.0).sqrt();
    [r * phi.cos(), r * phi.sin(), z]
}

pub fn random_bath<R: Rng>(rng: &mut R) -> BathModel {
    BathModel::new(rng.random_range(0.1..3.0), rng.random_range(0.1..10.0)).expect("valid ranges")
}

/// Arbitrary (not necessarily thermal) rates in `[0, 2)` and dephasing in `[0, 1)`.
pub fn random_two_level_system<R: Rng>(rng: &mut R) -> TwoLevelSystem {
    let (e, eps) = random_gap_and_direction(rng);
    loop {
        let gp = rng.random_range(0.0..2.0);
        let gm = rng.random_range(0.0..2.0);
        if gp + gm > 1e-3 {
            let pd = rng.random_range(0.0..1.0);
            return TwoLevelSystem::new(e, eps, gp, gm, pd).expect("valid ranges");
        }
    }
}

/// Two-level system with detailed-balance rates from a random bath.
pub fn random_thermal_two_level<R: Rng>(rng: &mut R) -> (TwoLevelSystem, BathModel) {
    let (e, eps) = random_gap_and_direction(rng);
    let bath = random_bath(rng);
    let pd = rng.random_range(0.0..1.0);
    (TwoLevelSystem::thermal(e, eps, &bath, pd).expect("valid ranges"), bath)
}

/// `G G† / Tr(G G†)` for a complex Ginibre matrix `G`: a full-rank density matrix.
pub fn random_density_matrix<R: Rng>(rng: &mut R, dim: usize) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(dim, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let m = g.matmul(&g.adjoint()).hermitian_part();
    let tr = m.trace().re;
    m.scale_real(1.0 / tr)
}

/// Random diagonal density matrix (a population vector).
pub fn random_populations<R: Rng>(rng: &mut R, dim: usize) -> ComplexMatrix {
    let p: Vec<f64> = (0..dim).map(|_| rng.random_range(0.01..1.0)).collect();
    let total: f64 = p.iter().sum();
    ComplexMatrix::from_diagonal(&p.iter().map(|x| x / total).collect::<Vec<_>>())
}
