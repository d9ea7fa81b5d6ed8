//! Timing harness comparing the EBE kernels with their GKLS counterparts on
//! identical inputs. Every timed application also feeds a checksum, so a
//! faster kernel cannot silently compute something different.

use std::hint::black_box;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{BenchConfig, BuiltSystem};
use crate::dissipators::{canonical_jumps, pairwise_gkls_jumps, GklsKernel, MultiLevelEbe, TwoLevelEbe};
use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::sampling;

/// Checksums must agree to this relative tolerance.
pub const CHECKSUM_RTOL: f64 = 1e-9;

enum Kernel {
    Ebe2(TwoLevelEbe),
    EbeN(MultiLevelEbe),
    Gkls(GklsKernel),
}

impl Kernel {
    fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        match self {
            Kernel::Ebe2(k) => k.apply(rho),
            Kernel::EbeN(k) => k.apply(rho),
            Kernel::Gkls(k) => k.apply(rho),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelTiming {
    pub kernel: &'static str,
    pub ns_per_apply: f64,
    pub checksum: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub dim: usize,
    pub transitions: usize,
    pub applications: usize,
    pub repeats: usize,
    pub ebe: KernelTiming,
    pub gkls: KernelTiming,
    /// Largest entrywise difference between the two kernels over all inputs.
    pub max_deviation: f64,
}

impl BenchReport {
    pub fn ratio(&self) -> f64 {
        self.ebe.ns_per_apply / self.gkls.ns_per_apply
    }

    pub fn checksum_relative_difference(&self) -> f64 {
        (self.ebe.checksum - self.gkls.checksum).abs() / self.ebe.checksum.abs().max(f64::MIN_POSITIVE)
    }

    pub fn checksums_agree(&self) -> bool {
        self.checksum_relative_difference() <= CHECKSUM_RTOL
    }
}

/// Kahan-compensated sum of `w_ij |out_ij|` over all applications.
struct Checksum {
    sum: f64,
    carry: f64,
}

impl Checksum {
    fn new() -> Self {
        Self { sum: 0.0, carry: 0.0 }
    }

    fn add(&mut self, m: &ComplexMatrix) {
        let n = m.dim();
        let scale = 1.0 / (n * n) as f64;
        for (k, z) in m.as_slice().iter().enumerate() {
            let y = (1.0 + k as f64 * scale) * z.norm() - self.carry;
            let t = self.sum + y;
            self.carry = (t - self.sum) - y;
            self.sum = t;
        }
    }
}

fn timed_run(kernel: &Kernel, inputs: &[ComplexMatrix], applications: usize) -> (f64, f64) {
    let mut check = Checksum::new();
    let start = Instant::now();
    for a in 0..applications {
        let out = kernel.apply(black_box(&inputs[a % inputs.len()]));
        check.add(black_box(&out));
    }
    let elapsed = start.elapsed().as_nanos() as f64;
    (elapsed / applications as f64, check.sum)
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Two-level systems are fed random full density matrices. Ladders are fed
/// random diagonal states, where the multi-level EBE and pairwise GKLS agree.
pub fn run_bench(system: &BuiltSystem, cfg: &BenchConfig, seed: u64) -> Result<BenchReport> {
    if cfg.applications == 0 || cfg.repeats == 0 || cfg.inputs == 0 {
        return Err(Error::param("bench needs applications, repeats and inputs of at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (ebe, gkls, label, inputs, transitions) = match system {
        BuiltSystem::TwoLevel(sys) => {
            let inputs: Vec<_> = (0..cfg.inputs).map(|_| sampling::random_density_matrix(&mut rng, 2)).collect();
            (Kernel::Ebe2(TwoLevelEbe::new(sys)), Kernel::Gkls(GklsKernel::new(&canonical_jumps(sys)?)), "ebe2", inputs, 1)
        }
        BuiltSystem::Ladder(lad, _) => {
            let inputs: Vec<_> = (0..cfg.inputs).map(|_| sampling::random_populations(&mut rng, lad.levels())).collect();
            (
                Kernel::EbeN(MultiLevelEbe::new(lad)),
                Kernel::Gkls(GklsKernel::new(&pairwise_gkls_jumps(lad))),
                "eben",
                inputs,
                lad.transitions().len(),
            )
        }
    };

    let max_deviation = inputs
        .iter()
        .map(|rho| (&ebe.apply(rho) - &gkls.apply(rho)).max_abs())
        .fold(0.0, f64::max);

    let mut t_ebe = Vec::with_capacity(cfg.repeats);
    let mut t_gkls = Vec::with_capacity(cfg.repeats);
    let mut sums: Option<(f64, f64)> = None;
    for _ in 0..cfg.repeats {
        let (ns_e, c_e) = timed_run(&ebe, &inputs, cfg.applications);
        let (ns_g, c_g) = timed_run(&gkls, &inputs, cfg.applications);
        t_ebe.push(ns_e);
        t_gkls.push(ns_g);
        match sums {
            None => sums = Some((c_e, c_g)),
            Some((a, b)) if a.to_bits() == c_e.to_bits() && b.to_bits() == c_g.to_bits() => {}
            Some(_) => return Err(Error::Numerical("bench checksum changed between repeats".into())),
        }
    }
    let (c_e, c_g) = sums.expect("at least one repeat");
    Ok(BenchReport {
        dim: inputs[0].dim(),
        transitions,
        applications: cfg.applications,
        repeats: cfg.repeats,
        ebe: KernelTiming { kernel: label, ns_per_apply: median(t_ebe), checksum: c_e },
        gkls: KernelTiming { kernel: "gkls", ns_per_apply: median(t_gkls), checksum: c_g },
        max_deviation,
    })
}
