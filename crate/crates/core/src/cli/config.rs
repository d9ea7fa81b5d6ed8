//! Scenario configuration: a TOML document with one system section and
//! optional run-control sections. Parsing collects every problem it finds
//! instead of stopping at the first.

use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::dissipators::{Dissipator, DissipatorKind, RhsSpec};
use crate::error::Error;
use crate::propagate::Method;
use crate::systems::{rates_from_bath, BathModel, CouplingRule, LadderSystem, TransitionSpec, TwoLevelSystem};

#[derive(Debug, Clone, PartialEq)]
pub enum SystemConfig {
    TwoLevel {
        energy_gap: f64,
        eps: [f64; 3],
        rates: RateSource,
        dephasing: f64,
    },
    Oscillator {
        levels: usize,
        spacing: f64,
        rule: CouplingRule,
        gamma: f64,
        bath_temperature: f64,
        dephasing: f64,
    },
    Explicit {
        energies: Vec<f64>,
        transitions: Vec<TransitionConfig>,
        dephasing: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateSource {
    Explicit { gamma_p: f64, gamma_m: f64 },
    Bath { gamma: f64, temperature: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionConfig {
    pub lower: usize,
    pub upper: usize,
    pub rates: RateSource,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialConfig {
    Gibbs { temperature: f64 },
    Level { index: usize },
    Matrix { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputWhat {
    Populations,
    Coherences,
    Diagnostics,
    All,
}

impl OutputWhat {
    pub fn populations(self) -> bool {
        matches!(self, OutputWhat::Populations | OutputWhat::All)
    }

    pub fn coherences(self) -> bool {
        matches!(self, OutputWhat::Coherences | OutputWhat::All)
    }

    pub fn diagnostics(self) -> bool {
        matches!(self, OutputWhat::Diagnostics | OutputWhat::All)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationConfig {
    pub t_final: Option<f64>,
    pub dt: Option<f64>,
    pub method: Method,
    pub record_every: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub path: Option<String>,
    pub what: OutputWhat,
    pub coherences: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalConfig {
    pub initial_temperature: Option<f64>,
    pub t_final: Option<f64>,
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub applications: usize,
    pub repeats: usize,
    pub inputs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub system: SystemConfig,
    pub dissipator: DissipatorKind,
    pub initial: Option<InitialConfig>,
    pub integration: IntegrationConfig,
    pub output: OutputConfig,
    pub verify_draws: usize,
    pub canonical: CanonicalConfig,
    pub bench: BenchConfig,
}

/// Either a syntax error (with its line) or an itemized list of violations.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Syntax { line: usize, message: String },
    Invalid(Vec<String>),
}

impl ConfigError {
    pub fn messages(&self) -> Vec<String> {
        match self {
            ConfigError::Syntax { line, message } => vec![format!("line {line}: {message}")],
            ConfigError::Invalid(m) => m.clone(),
        }
    }
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.messages().join("; "))
    }
}

impl std::error::Error for ConfigError {}

/// Built system: the dynamics spec plus whichever concrete system backs it.
#[derive(Debug, Clone)]
pub enum BuiltSystem {
    TwoLevel(TwoLevelSystem),
    Ladder(LadderSystem, f64),
}

impl BuiltSystem {
    pub fn dim(&self) -> usize {
        match self {
            BuiltSystem::TwoLevel(_) => 2,
            BuiltSystem::Ladder(l, _) => l.levels(),
        }
    }

    pub fn hamiltonian(&self) -> crate::ComplexMatrix {
        match self {
            BuiltSystem::TwoLevel(s) => s.hamiltonian(),
            BuiltSystem::Ladder(l, _) => l.hamiltonian(),
        }
    }

    pub fn dephasing_rate(&self) -> f64 {
        match self {
            BuiltSystem::TwoLevel(s) => s.dephasing_rate,
            BuiltSystem::Ladder(_, g) => *g,
        }
    }

    pub fn spec(&self, kind: DissipatorKind) -> crate::Result<RhsSpec> {
        match (self, kind) {
            (BuiltSystem::TwoLevel(s), DissipatorKind::Ebe2) => Ok(RhsSpec::two_level(s)),
            (BuiltSystem::TwoLevel(s), DissipatorKind::Gkls) => RhsSpec::two_level_gkls(s),
            (BuiltSystem::Ladder(l, g), DissipatorKind::EbeN) => RhsSpec::ladder(l, *g),
            (BuiltSystem::Ladder(l, g), DissipatorKind::Gkls) => RhsSpec::ladder_gkls(l, *g),
            (s, DissipatorKind::None) => RhsSpec::new(s.hamiltonian(), Dissipator::None, true, s.dephasing_rate()),
            (_, k) => Err(Error::param(format!("dissipator {} does not fit this system", k.label()))),
        }
    }
}

impl SystemConfig {
    pub fn build(&self) -> crate::Result<BuiltSystem> {
        match self {
            SystemConfig::TwoLevel { energy_gap, eps, rates, dephasing } => {
                let sys = match *rates {
                    RateSource::Explicit { gamma_p, gamma_m } => {
                        TwoLevelSystem::new(*energy_gap, *eps, gamma_p, gamma_m, *dephasing)?
                    }
                    RateSource::Bath { gamma, temperature } => {
                        TwoLevelSystem::thermal(*energy_gap, *eps, &BathModel::new(gamma, temperature)?, *dephasing)?
                    }
                };
                Ok(BuiltSystem::TwoLevel(sys))
            }
            SystemConfig::Oscillator { levels, spacing, rule, gamma, bath_temperature, dephasing } => {
                let bath = BathModel::new(*gamma, *bath_temperature)?;
                Ok(BuiltSystem::Ladder(LadderSystem::oscillator(*levels, *spacing, rule, &bath)?, *dephasing))
            }
            SystemConfig::Explicit { energies, transitions, dephasing } => {
                let mut ts = Vec::with_capacity(transitions.len());
                for t in transitions {
                    let (gp, gm) = match t.rates {
                        RateSource::Explicit { gamma_p, gamma_m } => (gamma_p, gamma_m),
                        RateSource::Bath { gamma, temperature } => {
                            let lo = energies.get(t.lower).copied().unwrap_or(0.0);
                            let hi = energies.get(t.upper).copied().unwrap_or(0.0);
                            rates_from_bath(&BathModel::new(gamma, temperature)?, (hi - lo).abs())?
                        }
                    };
                    ts.push(TransitionSpec::new(t.lower, t.upper, gp, gm, energies)?);
                }
                Ok(BuiltSystem::Ladder(LadderSystem::new(energies.clone(), ts)?, *dephasing))
            }
        }
    }

    pub fn is_two_level(&self) -> bool {
        matches!(self, SystemConfig::TwoLevel { .. })
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parses and validates a scenario. `base_dir` resolves relative file paths.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<ScenarioConfig, ConfigError> {
    let doc: Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax {
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(1),
        message: e.message().to_string(),
    })?;
    let mut v = Validator::default();
    let cfg = v.scenario(&doc, base_dir);
    match (cfg, v.errors.is_empty()) {
        (Some(cfg), true) => Ok(cfg),
        _ => Err(ConfigError::Invalid(v.errors)),
    }
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Invalid(vec![format!("cannot read config {}: {e}", path.display())]))?;
    parse_config(&text, path.parent().unwrap_or(Path::new(".")))
}

const TOP_KEYS: &[&str] = &[
    "dissipator", "two_level", "oscillator", "explicit", "initial", "integration", "output", "verify", "canonical",
    "bench",
];

#[derive(Default)]
struct Validator {
    errors: Vec<String>,
}

impl Validator {
    fn err(&mut self, msg: impl Into<String>) {
        self.errors.push(msg.into());
    }

    fn unknown_keys(&mut self, t: &Table, section: &str, allowed: &[&str]) {
        for k in t.keys() {
            if !allowed.contains(&k.as_str()) {
                let at = if section.is_empty() { String::new() } else { format!(" in [{section}]") };
                self.err(format!("unknown key '{k}'{at}"));
            }
        }
    }

    fn section<'a>(&mut self, doc: &'a Table, name: &str) -> Option<&'a Table> {
        match doc.get(name) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                self.err(format!("'{name}' must be a section"));
                None
            }
        }
    }

    fn float(&mut self, t: &Table, section: &str, key: &str) -> Option<f64> {
        match t.get(key)? {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            Value::String(s) if s == "inf" => Some(f64::INFINITY),
            other => {
                self.err(format!("[{section}] {key} must be a number, got {}", other.type_str()));
                None
            }
        }
    }

    fn required_float(&mut self, t: &Table, section: &str, key: &str) -> Option<f64> {
        if !t.contains_key(key) {
            self.err(format!("[{section}] {key} is required"));
            return None;
        }
        self.float(t, section, key)
    }

    fn positive(&mut self, t: &Table, section: &str, key: &str, required: bool) -> Option<f64> {
        let x = if required { self.required_float(t, section, key)? } else { self.float(t, section, key)? };
        if !(x > 0.0) || x.is_nan() {
            self.err(format!("[{section}] {key} must be positive, got {x}"));
            return None;
        }
        Some(x)
    }

    fn non_negative(&mut self, t: &Table, section: &str, key: &str) -> Option<f64> {
        let x = self.float(t, section, key)?;
        if !(x >= 0.0) || !x.is_finite() {
            self.err(format!("[{section}] {key} must be finite and non-negative, got {x}"));
            return None;
        }
        Some(x)
    }

    fn count(&mut self, t: &Table, section: &str, key: &str, min: i64) -> Option<usize> {
        match t.get(key)? {
            Value::Integer(i) if *i >= min => Some(*i as usize),
            Value::Integer(i) => {
                self.err(format!("[{section}] {key} must be at least {min}, got {i}"));
                None
            }
            other => {
                self.err(format!("[{section}] {key} must be an integer, got {}", other.type_str()));
                None
            }
        }
    }

    fn string<'a>(&mut self, t: &'a Table, section: &str, key: &str) -> Option<&'a str> {
        match t.get(key)? {
            Value::String(s) => Some(s),
            other => {
                self.err(format!("[{section}] {key} must be a string, got {}", other.type_str()));
                None
            }
        }
    }

    fn floats(&mut self, t: &Table, section: &str, key: &str) -> Option<Vec<f64>> {
        let Value::Array(items) = t.get(key)? else {
            self.err(format!("[{section}] {key} must be an array of numbers"));
            return None;
        };
        let mut out = Vec::with_capacity(items.len());
        for x in items {
            match x {
                Value::Float(f) => out.push(*f),
                Value::Integer(i) => out.push(*i as f64),
                _ => {
                    self.err(format!("[{section}] {key} must contain only numbers"));
                    return None;
                }
            }
        }
        Some(out)
    }

    fn rates(&mut self, t: &Table, section: &str, allow_table_temperature: Option<f64>) -> Option<RateSource> {
        let explicit = t.contains_key("gamma_p") || t.contains_key("gamma_m");
        let thermal = t.contains_key("gamma") || t.contains_key("bath_T");
        match (explicit, thermal) {
            (true, true) => {
                self.err(format!("[{section}] give either gamma_p/gamma_m or gamma/bath_T, not both"));
                None
            }
            (true, false) => {
                let gp = self.non_negative_required(t, section, "gamma_p");
                let gm = self.non_negative_required(t, section, "gamma_m");
                Some(RateSource::Explicit { gamma_p: gp?, gamma_m: gm? })
            }
            (false, true) | (false, false) if allow_table_temperature.is_some() || thermal => {
                let gamma = self.non_negative_required(t, section, "gamma");
                let temperature = match (t.contains_key("bath_T"), allow_table_temperature) {
                    (true, _) | (false, None) => self.positive(t, section, "bath_T", true),
                    (false, Some(tb)) => Some(tb),
                };
                Some(RateSource::Bath { gamma: gamma?, temperature: temperature? })
            }
            _ => {
                self.err(format!("[{section}] rates missing: give gamma_p and gamma_m, or gamma and bath_T"));
                None
            }
        }
    }

    fn non_negative_required(&mut self, t: &Table, section: &str, key: &str) -> Option<f64> {
        if !t.contains_key(key) {
            self.err(format!("[{section}] {key} is required"));
            return None;
        }
        self.non_negative(t, section, key)
    }

    fn dephasing(&mut self, t: &Table, section: &str) -> f64 {
        if t.contains_key("Gamma_pd") {
            self.non_negative(t, section, "Gamma_pd").unwrap_or(0.0)
        } else {
            0.0
        }
    }

    fn two_level(&mut self, t: &Table) -> Option<SystemConfig> {
        const S: &str = "two_level";
        self.unknown_keys(t, S, &["E", "eps", "gamma_p", "gamma_m", "gamma", "bath_T", "Gamma_pd"]);
        let e = self.positive(t, S, "E", true);
        let eps = match self.floats(t, S, "eps") {
            Some(v) if v.len() == 3 => {
                let norm2: f64 = v.iter().map(|x| x * x).sum();
                if (norm2.sqrt() - 1.0).abs() > crate::systems::UNIT_VECTOR_TOL {
                    self.err(format!(
                        "[{S}] eps must be a unit vector (eps_x^2 + eps_y^2 + eps_z^2 = 1), got norm {}",
                        norm2.sqrt()
                    ));
                    None
                } else {
                    Some([v[0], v[1], v[2]])
                }
            }
            Some(v) => {
                self.err(format!("[{S}] eps must have 3 components, got {}", v.len()));
                None
            }
            None => {
                if !t.contains_key("eps") {
                    self.err(format!("[{S}] eps is required"));
                }
                None
            }
        };
        let rates = self.rates(t, S, None);
        let dephasing = self.dephasing(t, S);
        Some(SystemConfig::TwoLevel { energy_gap: e?, eps: eps?, rates: rates?, dephasing })
    }

    fn oscillator(&mut self, t: &Table) -> Option<SystemConfig> {
        const S: &str = "oscillator";
        self.unknown_keys(t, S, &["N", "spacing", "coupling_rule", "couplings", "gamma", "bath_T", "Gamma_pd"]);
        let levels = if t.contains_key("N") {
            self.count(t, S, "N", 2)
        } else {
            self.err(format!("[{S}] N is required"));
            None
        };
        let spacing = if t.contains_key("spacing") { self.positive(t, S, "spacing", false) } else { Some(1.0) };
        let gamma = if t.contains_key("gamma") { self.non_negative(t, S, "gamma") } else { Some(1.0) };
        let bath_temperature = self.positive(t, S, "bath_T", true);
        let rule = match self.string(t, S, "coupling_rule").unwrap_or("harmonic") {
            "harmonic" => Some(CouplingRule::Harmonic),
            "constant" => Some(CouplingRule::Constant),
            "table" => match self.floats(t, S, "couplings") {
                Some(v) => {
                    if let Some(n) = levels {
                        if v.len() != n - 1 {
                            self.err(format!("[{S}] couplings needs N - 1 = {} entries, got {}", n - 1, v.len()));
                        }
                    }
                    if v.iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
                        self.err(format!("[{S}] couplings must be finite and non-negative"));
                    }
                    Some(CouplingRule::Table(v))
                }
                None => {
                    if !t.contains_key("couplings") {
                        self.err(format!("[{S}] coupling_rule = \"table\" requires couplings"));
                    }
                    None
                }
            },
            other => {
                self.err(format!("[{S}] coupling_rule must be harmonic, constant or table, got '{other}'"));
                None
            }
        };
        if t.contains_key("couplings") && !matches!(rule, Some(CouplingRule::Table(_))) {
            self.err(format!("[{S}] couplings is only used with coupling_rule = \"table\""));
        }
        let dephasing = self.dephasing(t, S);
        Some(SystemConfig::Oscillator {
            levels: levels?,
            spacing: spacing?,
            rule: rule?,
            gamma: gamma?,
            bath_temperature: bath_temperature?,
            dephasing,
        })
    }

    fn explicit(&mut self, t: &Table) -> Option<SystemConfig> {
        const S: &str = "explicit";
        self.unknown_keys(t, S, &["energies", "transitions", "bath_T", "Gamma_pd"]);
        let energies = self.floats(t, S, "energies");
        if !t.contains_key("energies") {
            self.err(format!("[{S}] energies is required"));
        }
        if let Some(e) = &energies {
            if e.len() < 2 {
                self.err(format!("[{S}] energies needs at least two levels"));
            }
        }
        let table_temperature = if t.contains_key("bath_T") { self.positive(t, S, "bath_T", false) } else { None };
        let mut transitions = Vec::new();
        let mut ok = true;
        match t.get("transitions") {
            Some(Value::Array(items)) => {
                for (k, item) in items.iter().enumerate() {
                    let sec = format!("explicit.transitions[{k}]");
                    let Value::Table(tt) = item else {
                        self.err(format!("[{sec}] must be a table with lower, upper and rates"));
                        ok = false;
                        continue;
                    };
                    self.unknown_keys(tt, &sec, &["lower", "upper", "gamma_p", "gamma_m", "gamma", "bath_T"]);
                    let lower = self.level_index(tt, &sec, "lower", energies.as_deref());
                    let upper = self.level_index(tt, &sec, "upper", energies.as_deref());
                    let rates = self.rates(tt, &sec, table_temperature);
                    match (lower, upper, rates) {
                        (Some(lower), Some(upper), Some(rates)) => {
                            if let Some(e) = &energies {
                                if e[upper] <= e[lower] {
                                    self.err(format!("[{sec}] upper level must lie above lower level"));
                                }
                            }
                            transitions.push(TransitionConfig { lower, upper, rates });
                        }
                        _ => ok = false,
                    }
                }
            }
            Some(_) => {
                self.err(format!("[{S}] transitions must be an array of tables"));
                ok = false;
            }
            None => {}
        }
        let dephasing = self.dephasing(t, S);
        (ok).then_some(())?;
        Some(SystemConfig::Explicit { energies: energies?, transitions, dephasing })
    }

    fn level_index(&mut self, t: &Table, section: &str, key: &str, energies: Option<&[f64]>) -> Option<usize> {
        if !t.contains_key(key) {
            self.err(format!("[{section}] {key} is required"));
            return None;
        }
        let i = self.count(t, section, key, 0)?;
        if let Some(e) = energies {
            if i >= e.len() {
                self.err(format!("[{section}] {key} = {i} is out of range for {} levels", e.len()));
                return None;
            }
        }
        Some(i)
    }

    fn scenario(&mut self, doc: &Table, base_dir: &Path) -> Option<ScenarioConfig> {
        self.unknown_keys(doc, "", TOP_KEYS);
        let present: Vec<&str> = ["two_level", "oscillator", "explicit"].into_iter().filter(|k| doc.contains_key(*k)).collect();
        let system = match present.as_slice() {
            [one] => {
                let t = self.section(doc, one);
                t.and_then(|t| match *one {
                    "two_level" => self.two_level(t),
                    "oscillator" => self.oscillator(t),
                    _ => self.explicit(t),
                })
            }
            [] => {
                self.err("exactly one system section is required: [two_level], [oscillator] or [explicit]");
                None
            }
            many => {
                self.err(format!("exactly one system section is allowed, found {}", many.join(", ")));
                None
            }
        };
        let dim = match &system {
            Some(SystemConfig::TwoLevel { .. }) => Some(2),
            Some(SystemConfig::Oscillator { levels, .. }) => Some(*levels),
            Some(SystemConfig::Explicit { energies, .. }) => Some(energies.len()),
            None => None,
        };

        let dissipator = match doc.get("dissipator") {
            None => system.as_ref().map(|s| if s.is_two_level() { DissipatorKind::Ebe2 } else { DissipatorKind::EbeN }),
            Some(Value::String(s)) => match s.as_str() {
                "gkls" => Some(DissipatorKind::Gkls),
                "ebe2" => Some(DissipatorKind::Ebe2),
                "eben" => Some(DissipatorKind::EbeN),
                "none" => Some(DissipatorKind::None),
                other => {
                    self.err(format!("dissipator must be gkls, ebe2, eben or none, got '{other}'"));
                    None
                }
            },
            Some(_) => {
                self.err("dissipator must be a string");
                None
            }
        };
        if let ([section], Some(d)) = (present.as_slice(), dissipator) {
            let two_level = *section == "two_level";
            if two_level && d == DissipatorKind::EbeN {
                self.err("dissipator eben needs an [oscillator] or [explicit] system");
            }
            if !two_level && d == DissipatorKind::Ebe2 {
                self.err("dissipator ebe2 needs a [two_level] system");
            }
        }

        let initial = self.section(doc, "initial").and_then(|t| self.initial(t, base_dir, dim));
        let integration = self.section(doc, "integration").cloned().unwrap_or_default();
        let integration = self.integration(integration);
        let output = self.section(doc, "output").cloned().unwrap_or_default();
        let output = self.output(output, dim);

        let verify = self.section(doc, "verify").cloned().unwrap_or_default();
        self.unknown_keys(&verify, "verify", &["draws"]);
        let verify_draws = self.count(&verify, "verify", "draws", 1).unwrap_or(1000);

        let canonical = self.section(doc, "canonical").cloned().unwrap_or_default();
        self.unknown_keys(&canonical, "canonical", &["T0", "t_final", "dt"]);
        let canonical = CanonicalConfig {
            initial_temperature: self.positive(&canonical, "canonical", "T0", false),
            t_final: self.positive(&canonical, "canonical", "t_final", false),
            dt: self.positive(&canonical, "canonical", "dt", false),
        };

        let bench = self.section(doc, "bench").cloned().unwrap_or_default();
        self.unknown_keys(&bench, "bench", &["applications", "repeats", "inputs"]);
        let bench = BenchConfig {
            applications: self.count(&bench, "bench", "applications", 1).unwrap_or(1_000_000),
            repeats: self.count(&bench, "bench", "repeats", 1).unwrap_or(5),
            inputs: self.count(&bench, "bench", "inputs", 1).unwrap_or(64),
        };

        let cfg = ScenarioConfig {
            system: system?,
            dissipator: dissipator?,
            initial,
            integration: integration?,
            output: output?,
            verify_draws,
            canonical,
            bench,
        };
        if let Err(e) = cfg.system.build() {
            self.err(e.to_string());
        }
        Some(cfg)
    }

    fn initial(&mut self, t: &Table, base_dir: &Path, dim: Option<usize>) -> Option<InitialConfig> {
        const S: &str = "initial";
        self.unknown_keys(t, S, &["kind", "T", "index", "file"]);
        let kind = match self.string(t, S, "kind") {
            Some(k) => k,
            None => {
                if !t.contains_key("kind") {
                    self.err(format!("[{S}] kind is required (gibbs, level or matrix)"));
                }
                return None;
            }
        };
        match kind {
            "gibbs" => Some(InitialConfig::Gibbs { temperature: self.positive(t, S, "T", true)? }),
            "level" => {
                if !t.contains_key("index") {
                    self.err(format!("[{S}] index is required for kind = \"level\""));
                    return None;
                }
                let index = self.count(t, S, "index", 0)?;
                if let Some(n) = dim {
                    if index >= n {
                        self.err(format!("[{S}] index = {index} is out of range for {n} levels"));
                        return None;
                    }
                }
                Some(InitialConfig::Level { index })
            }
            "matrix" => {
                let Some(f) = self.string(t, S, "file") else {
                    if !t.contains_key("file") {
                        self.err(format!("[{S}] file is required for kind = \"matrix\""));
                    }
                    return None;
                };
                let path = base_dir.join(f);
                if !path.is_file() {
                    self.err(format!("[{S}] file {} does not exist", path.display()));
                    return None;
                }
                Some(InitialConfig::Matrix { path })
            }
            other => {
                self.err(format!("[{S}] kind must be gibbs, level or matrix, got '{other}'"));
                None
            }
        }
    }

    fn integration(&mut self, t: Table) -> Option<IntegrationConfig> {
        const S: &str = "integration";
        self.unknown_keys(&t, S, &["t_final", "dt", "method", "record_every"]);
        let t_final = if t.contains_key("t_final") { Some(self.non_negative(&t, S, "t_final")?) } else { None };
        let dt = if t.contains_key("dt") { Some(self.positive(&t, S, "dt", false)?) } else { None };
        let method = match self.string(&t, S, "method").unwrap_or("expm") {
            "expm" => Method::Expm,
            "rk4" => Method::Rk4,
            other => {
                self.err(format!("[{S}] method must be expm or rk4, got '{other}'"));
                return None;
            }
        };
        let record_every = if t.contains_key("record_every") { self.count(&t, S, "record_every", 1)? } else { 1 };
        Some(IntegrationConfig { t_final, dt, method, record_every })
    }

    fn output(&mut self, t: Table, dim: Option<usize>) -> Option<OutputConfig> {
        const S: &str = "output";
        self.unknown_keys(&t, S, &["path", "what", "coherences"]);
        let path = self.string(&t, S, "path").map(str::to_string);
        if let Some(p) = &path {
            if p.is_empty() || p.contains('/') || p.contains('\\') {
                self.err(format!("[{S}] path must be a plain file name, got '{p}'"));
            }
        }
        let what = match self.string(&t, S, "what").unwrap_or("all") {
            "populations" => OutputWhat::Populations,
            "coherences" => OutputWhat::Coherences,
            "diagnostics" => OutputWhat::Diagnostics,
            "all" => OutputWhat::All,
            other => {
                self.err(format!("[{S}] what must be populations, coherences, diagnostics or all, got '{other}'"));
                return None;
            }
        };
        let mut coherences = Vec::new();
        match t.get("coherences") {
            None => {}
            Some(Value::Array(items)) => {
                for item in items {
                    let pair = match item {
                        Value::Array(p) if p.len() == 2 => match (&p[0], &p[1]) {
                            (Value::Integer(i), Value::Integer(j)) if *i >= 0 && *j >= 0 => Some((*i as usize, *j as usize)),
                            _ => None,
                        },
                        _ => None,
                    };
                    match pair {
                        Some((i, j)) => {
                            if let Some(n) = dim {
                                if i >= n || j >= n {
                                    self.err(format!("[{S}] coherence pair ({i}, {j}) is out of range for {n} levels"));
                                    continue;
                                }
                            }
                            coherences.push((i, j));
                        }
                        None => self.err(format!("[{S}] coherences must be pairs of level indices like [0, 1]")),
                    }
                }
            }
            Some(_) => self.err(format!("[{S}] coherences must be an array of [i, j] pairs")),
        }
        Some(OutputConfig { path, what, coherences })
    }
}
