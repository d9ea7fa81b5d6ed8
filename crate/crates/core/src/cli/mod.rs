//! Command-line front end. [`run_scenario`] does the work and returns file
//! contents; [`run`] adds config loading and atomic writes.

pub mod bench;
pub mod config;
pub mod output;

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::canonical::{canonical_experiment, invariance_condition};
use crate::error::Error;
use crate::linalg::{trace_distance, ComplexMatrix};
use crate::propagate::{liouvillian_spectrum, propagate, PropagationOptions, Warning};
use crate::sampling;
use crate::stationary::{fixed_point, gibbs_state, two_level_stationary_analytic};
use crate::systems::{build_two_level_hamiltonian, jump_operators, verify_jump_algebra, AlgebraReport};

use config::{load_config, BuiltSystem, InitialConfig, ScenarioConfig};
use output::{fmt_f64, format_state, parse_state, write_atomic, Table};

/// Largest dimension for which `simulate` checks the generator spectrum up front.
const SPECTRUM_CHECK_MAX_DIM: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Subcommand {
    Simulate,
    FixedPoint,
    VerifyAlgebra,
    Canonical,
    Bench,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Simulate => "simulate",
            Subcommand::FixedPoint => "fixed-point",
            Subcommand::VerifyAlgebra => "verify-algebra",
            Subcommand::Canonical => "canonical",
            Subcommand::Bench => "bench",
        }
    }

    fn default_file(self) -> &'static str {
        match self {
            Subcommand::Simulate => "trajectory.csv",
            Subcommand::FixedPoint => "fixed_point.csv",
            Subcommand::VerifyAlgebra => "algebra.csv",
            Subcommand::Canonical => "canonical.csv",
            Subcommand::Bench => "bench.csv",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Bad config, bad input files, unwritable output.
    Validation(Vec<String>),
    /// The numerics failed or a verification did not pass.
    Numerical(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }

    pub fn messages(&self) -> &[String] {
        match self {
            CliError::Validation(m) | CliError::Numerical(m) => m,
        }
    }

    /// One-line JSON record for stderr.
    pub fn record(&self, subcommand: Option<Subcommand>) -> String {
        let kind = match self {
            CliError::Validation(_) => "validation",
            CliError::Numerical(_) => "numerical",
        };
        serde_json::json!({
            "error": kind,
            "exit_code": self.exit_code(),
            "subcommand": subcommand.map(Subcommand::name),
            "messages": self.messages(),
        })
        .to_string()
    }

    fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(vec![msg.into()])
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(vec![e.to_string()])
        } else {
            CliError::Validation(vec![e.to_string()])
        }
    }
}

impl From<config::ConfigError> for CliError {
    fn from(e: config::ConfigError) -> Self {
        CliError::Validation(e.messages())
    }
}

/// Files to write plus human-readable notes. `failure` is set when the run
/// completed but a check it performs did not pass.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub files: Vec<(String, Vec<u8>)>,
    pub notes: Vec<String>,
    pub warnings: Vec<String>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub subcommand: Subcommand,
    pub config: PathBuf,
    pub seed: u64,
    pub out: PathBuf,
}

/// Loads the config, runs the subcommand and writes its files into `out`.
pub fn run(opts: &RunOptions) -> Result<Artifacts, CliError> {
    let cfg = load_config(&opts.config)?;
    let artifacts = run_scenario(opts.subcommand, &cfg, opts.seed)?;
    std::fs::create_dir_all(&opts.out)
        .map_err(|e| CliError::validation(format!("cannot create output directory {}: {e}", opts.out.display())))?;
    for (name, bytes) in &artifacts.files {
        let path = opts.out.join(name);
        write_atomic(&path, bytes).map_err(|e| CliError::validation(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(artifacts)
}

pub fn run_scenario(sub: Subcommand, cfg: &ScenarioConfig, seed: u64) -> Result<Artifacts, CliError> {
    let system = cfg.system.build()?;
    let file = cfg.output.path.clone().unwrap_or_else(|| sub.default_file().to_string());
    let mut art = match sub {
        Subcommand::Simulate => simulate(cfg, &system, seed)?,
        Subcommand::FixedPoint => fixed_point_cmd(cfg, &system, seed)?,
        Subcommand::VerifyAlgebra => verify_algebra(cfg, seed),
        Subcommand::Canonical => canonical_cmd(cfg, &system, seed)?,
        Subcommand::Bench => bench_cmd(cfg, &system, seed)?,
    };
    if let Some(first) = art.files.first_mut() {
        first.0 = file;
    }
    Ok(art)
}

fn initial_state(cfg: &ScenarioConfig, system: &BuiltSystem) -> Result<ComplexMatrix, CliError> {
    let n = system.dim();
    match &cfg.initial {
        None => Err(CliError::validation("[initial] is required for simulate")),
        Some(InitialConfig::Gibbs { temperature }) => Ok(gibbs_state(&system.hamiltonian(), *temperature)?),
        Some(InitialConfig::Level { index }) => Ok(ComplexMatrix::unit(n, *index, *index)),
        Some(InitialConfig::Matrix { path }) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
            let rho = parse_state(&text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
            if rho.dim() != n {
                return Err(CliError::validation(format!(
                    "{}: matrix is {}x{}, system has {n} levels",
                    path.display(),
                    rho.dim(),
                    rho.dim()
                )));
            }
            Ok(rho)
        }
    }
}

fn spectrum_warning(spec: &crate::dissipators::RhsSpec) -> Result<Option<String>, CliError> {
    if spec.dim() > SPECTRUM_CHECK_MAX_DIM {
        return Ok(None);
    }
    let rep = liouvillian_spectrum(spec)?;
    Ok(rep.has_growing_modes().then(|| {
        format!("generator has eigenvalues with positive real part (max {:.3e})", rep.max_real_part)
    }))
}

fn describe(w: &Warning) -> String {
    match w {
        Warning::Positivity { time, min_eigenvalue } => {
            format!("state lost positivity at t = {time}: min eigenvalue {min_eigenvalue:.3e}")
        }
        Warning::TruncationLeak { time, population } => {
            format!("top level population {population:.3e} exceeds 1e-6 at t = {time}")
        }
    }
}

fn simulate(cfg: &ScenarioConfig, system: &BuiltSystem, seed: u64) -> Result<Artifacts, CliError> {
    let integ = &cfg.integration;
    let mut missing = vec![];
    if integ.t_final.is_none() {
        missing.push("[integration] t_final is required for simulate".to_string());
    }
    if integ.dt.is_none() {
        missing.push("[integration] dt is required for simulate".to_string());
    }
    if cfg.initial.is_none() {
        missing.push("[initial] is required for simulate".to_string());
    }
    if !missing.is_empty() {
        return Err(CliError::Validation(missing));
    }
    let spec = system.spec(cfg.dissipator)?;
    let rho0 = initial_state(cfg, system)?;
    let opts = PropagationOptions::new(integ.t_final.unwrap(), integ.dt.unwrap(), integ.method)
        .record_every(integ.record_every);

    let mut art = Artifacts::default();
    art.warnings.extend(spectrum_warning(&spec)?);
    let traj = propagate(&spec, &rho0, &opts)?;
    art.warnings.extend(traj.warnings.iter().map(describe));

    let n = spec.dim();
    let what = cfg.output.what;
    let pairs: Vec<(usize, usize)> = if cfg.output.coherences.is_empty() {
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
    } else {
        cfg.output.coherences.clone()
    };
    let ladder = spec.ladder_system().is_some_and(crate::systems::LadderSystem::is_oscillator_chain);
    let mut header = vec!["t".to_string()];
    if what.populations() {
        header.extend((0..n).map(|i| format!("p_{i}")));
    }
    if what.coherences() {
        header.extend(pairs.iter().map(|(i, j)| format!("abs_rho_{i}_{j}")));
    }
    if what.diagnostics() {
        header.extend(["trace_dev".to_string(), "min_eig".to_string()]);
        if ladder {
            header.push("top_population".to_string());
        }
    }
    header.push("seed".to_string());
    let mut table = Table::new(header);
    for k in 0..traj.len() {
        let rho = &traj.states[k];
        let d = &traj.diagnostics[k];
        let mut row = vec![fmt_f64(traj.times[k])];
        if what.populations() {
            row.extend(rho.real_diagonal().into_iter().map(fmt_f64));
        }
        if what.coherences() {
            row.extend(pairs.iter().map(|&(i, j)| fmt_f64(rho[(i, j)].norm())));
        }
        if what.diagnostics() {
            row.push(fmt_f64(d.trace_deviation));
            row.push(fmt_f64(d.min_eigenvalue));
            if let Some(p) = d.top_population {
                row.push(fmt_f64(p));
            }
        }
        row.push(seed.to_string());
        table.push(row);
    }
    art.notes.push(format!(
        "{} records, {} / {}, max trace deviation {:.3e}, min eigenvalue {:.3e}",
        traj.len(),
        cfg.dissipator.label(),
        integ.method.label(),
        traj.max_trace_deviation(),
        traj.min_eigenvalue()
    ));
    art.files.push((String::new(), table.to_csv()));
    Ok(art)
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn fixed_point_cmd(cfg: &ScenarioConfig, system: &BuiltSystem, seed: u64) -> Result<Artifacts, CliError> {
    let spec = system.spec(cfg.dissipator)?;
    let rep = fixed_point(&spec)?;
    let analytic = match system {
        BuiltSystem::TwoLevel(sys) if sys.total_rate() > 0.0 && cfg.dissipator != crate::dissipators::DissipatorKind::None => {
            Some(trace_distance(&rep.state, &two_level_stationary_analytic(sys)?)?)
        }
        _ => None,
    };
    let mut table = Table::new([
        "residual",
        "gibbs_distance",
        "analytic_distance",
        "spectral_gap",
        "multiplicity",
        "undamped_modes",
        "max_real_part",
        "commutator_norm",
        "seed",
    ]);
    let gap = rep.spectral_gap.is_finite().then_some(rep.spectral_gap);
    table.push(vec![
        fmt_f64(rep.residual),
        opt(rep.gibbs_distance),
        opt(analytic),
        opt(gap),
        rep.multiplicity.to_string(),
        rep.undamped_modes.to_string(),
        fmt_f64(rep.max_real_part),
        fmt_f64(rep.commutator_norm),
        seed.to_string(),
    ]);
    let mut art = Artifacts::default();
    if rep.max_real_part > crate::propagate::ZERO_EIGENVALUE_TOL {
        art.warnings.push(format!("generator has eigenvalues with positive real part (max {:.3e})", rep.max_real_part));
    }
    if !rep.is_unique() {
        art.warnings.push(format!("stationary state is not unique (multiplicity {})", rep.multiplicity));
    }
    art.notes.push(format!(
        "residual {:.3e}, multiplicity {}, gibbs distance {}",
        rep.residual,
        rep.multiplicity,
        rep.gibbs_distance.map(|d| format!("{d:.3e}")).unwrap_or_else(|| "n/a".into())
    ));
    art.files.push((String::new(), table.to_csv()));
    art.files.push(("fixed_point_state.txt".into(), format_state(&rep.state).into_bytes()));
    Ok(art)
}

fn verify_algebra(cfg: &ScenarioConfig, seed: u64) -> Artifacts {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut header: Vec<String> = ["draw", "E", "eps_x", "eps_y", "eps_z"].iter().map(|s| s.to_string()).collect();
    header.extend(AlgebraReport::LABELS.iter().map(|s| s.to_string()));
    header.extend(["max_residual".to_string(), "seed".to_string()]);
    let mut table = Table::new(header);
    let mut worst = 0.0f64;
    let mut failures = 0usize;
    for draw in 0..cfg.verify_draws {
        let (e, eps) = sampling::random_gap_and_direction(&mut rng);
        let rep = build_two_level_hamiltonian(e, eps)
            .and_then(|h| jump_operators(&h).map(|pair| verify_jump_algebra(&pair, &h, e)));
        let residuals = match &rep {
            Ok(r) => r.residuals(),
            Err(_) => [f64::INFINITY; 7],
        };
        let max = residuals.iter().copied().fold(0.0, f64::max);
        worst = worst.max(max);
        if !rep.as_ref().map(AlgebraReport::passed).unwrap_or(false) {
            failures += 1;
        }
        let mut row = vec![draw.to_string(), fmt_f64(e), fmt_f64(eps[0]), fmt_f64(eps[1]), fmt_f64(eps[2])];
        row.extend(residuals.iter().map(|r| fmt_f64(*r)));
        row.push(fmt_f64(max));
        row.push(seed.to_string());
        table.push(row);
    }
    let mut art = Artifacts::default();
    art.notes.push(format!("{} draws, max residual {worst:.3e}, {failures} failing", cfg.verify_draws));
    if failures > 0 {
        art.failure = Some(format!("{failures} of {} draws exceed the 1e-12 residual bound", cfg.verify_draws));
    }
    art.files.push((String::new(), table.to_csv()));
    art
}

fn canonical_cmd(cfg: &ScenarioConfig, system: &BuiltSystem, seed: u64) -> Result<Artifacts, CliError> {
    let BuiltSystem::Ladder(lad, _) = system else {
        return Err(CliError::validation("canonical needs an [oscillator] or [explicit] ladder"));
    };
    let c = &cfg.canonical;
    let mut missing = vec![];
    if c.initial_temperature.is_none() {
        missing.push("[canonical] T0 is required".to_string());
    }
    let t_final = c.t_final.or(cfg.integration.t_final);
    let dt = c.dt.or(cfg.integration.dt);
    if t_final.is_none() {
        missing.push("[canonical] t_final (or [integration] t_final) is required".to_string());
    }
    if dt.is_none() {
        missing.push("[canonical] dt (or [integration] dt) is required".to_string());
    }
    if !missing.is_empty() {
        return Err(CliError::Validation(missing));
    }
    let d = canonical_experiment(lad, c.initial_temperature.unwrap(), t_final.unwrap(), dt.unwrap())?;
    let n = lad.levels();
    let mut header: Vec<String> = ["t", "a", "ln_a", "ode_ln_a", "delta", "max_nonuniformity", "top_population", "clean"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..n - 1).map(|i| format!("r_{i}")));
    header.push("seed".into());
    let mut table = Table::new(header);
    for k in 0..d.len() {
        let a = d.a_series[k];
        let mut row = vec![
            fmt_f64(d.times[k]),
            fmt_f64(a),
            fmt_f64(a.ln()),
            fmt_f64(d.ode_ln_a[k]),
            fmt_f64(d.delta_series[k]),
            fmt_f64(d.max_nonuniformity[k]),
            fmt_f64(d.top_population[k]),
            (d.clean[k] as u8).to_string(),
        ];
        row.extend(d.ratio_profiles[k].iter().map(|r| opt(*r)));
        row.push(seed.to_string());
        table.push(row);
    }
    let mut art = Artifacts::default();
    art.warnings.extend(d.warnings.iter().map(describe));
    let inv = invariance_condition(&lad.couplings())?;
    art.notes.push(format!(
        "T_B = {}, gamma_0 = {}, invariance condition {}, clean max non-uniformity {:.3e}, max ODE deviation {:.3e}",
        d.bath_temperature,
        d.gamma0,
        if inv.holds { "holds" } else { "fails" },
        d.clean_max_nonuniformity(),
        d.max_ode_deviation
    ));
    art.files.push((String::new(), table.to_csv()));
    Ok(art)
}

fn bench_cmd(cfg: &ScenarioConfig, system: &BuiltSystem, seed: u64) -> Result<Artifacts, CliError> {
    let rep = bench::run_bench(system, &cfg.bench, seed)?;
    let mut table = Table::new([
        "kernel",
        "dim",
        "transitions",
        "applications",
        "repeats",
        "ns_per_apply",
        "ratio_ebe_gkls",
        "checksum",
        "max_deviation",
        "seed",
    ]);
    for k in [&rep.ebe, &rep.gkls] {
        table.push(vec![
            k.kernel.to_string(),
            rep.dim.to_string(),
            rep.transitions.to_string(),
            rep.applications.to_string(),
            rep.repeats.to_string(),
            fmt_f64(k.ns_per_apply),
            fmt_f64(rep.ratio()),
            fmt_f64(k.checksum),
            fmt_f64(rep.max_deviation),
            seed.to_string(),
        ]);
    }
    let mut art = Artifacts::default();
    art.notes.push(format!(
        "{}: {:.1} ns/apply, gkls: {:.1} ns/apply, ratio {:.3}, checksum relative difference {:.2e}",
        rep.ebe.kernel,
        rep.ebe.ns_per_apply,
        rep.gkls.ns_per_apply,
        rep.ratio(),
        rep.checksum_relative_difference()
    ));
    if !rep.checksums_agree() {
        art.failure = Some(format!(
            "kernel checksums differ: {:e} vs {:e}",
            rep.ebe.checksum, rep.gkls.checksum
        ));
    }
    art.files.push((String::new(), table.to_csv()));
    Ok(art)
}

/// Resolves `--out`, defaulting to the current directory.
pub fn output_dir(out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."))
}
