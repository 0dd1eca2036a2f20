//! Scenario configuration: a flat `key = value` text with dotted sections.
//!
//! ```text
//! # comments start with '#'
//! grid.n = 2
//! grid.N = 24
//! metric.family = kahler_potential
//! metric.amplitude = 0.3
//! flow.t_end = 0.02
//! monitors = kahler_defect, evolution_residuals
//! ```
//!
//! Every key is optional except where a family or monitor needs it; see
//! [`KEYS`] for the full list. [`emit`] writes the canonical form, which
//! includes every key, and the config hash is the SHA-256 of that text.

use std::fmt;
use std::str::FromStr;

use chernlab::flow::{Formulation, Integrator};
use chernlab::Scheme;
use sha2::{Digest, Sha256};

/// Every accepted key, in canonical order.
pub const KEYS: &[&str] = &[
    "grid.n",
    "grid.N",
    "grid.scheme",
    "metric.family",
    "metric.amplitude",
    "metric.eps",
    "metric.seed",
    "metric.rho0",
    "metric.kappa",
    "metric.rho_center",
    "metric.rho_amplitude",
    "flow.formulation",
    "flow.integrator",
    "flow.t_end",
    "flow.snapshots",
    "flow.dt",
    "flow.dt_fraction",
    "flow.stability_check",
    "monitors",
    "monitor.tolerance",
    "monitor.residual_tol",
    "monitor.kahler_tol",
    "monitor.bk_budget",
    "monitor.bk_seed",
    "monitor.s1",
    "monitor.psi_k",
    "monitor.trace_s2",
    "monitor.trace_k",
    "monitor.trace_k1",
    "monitor.trace_c1",
    "monitor.trace_c2",
    "certificate.a2.s",
    "certificate.a2.beta",
    "certificate.a3.s",
    "certificate.a3.beta",
    "certificate.potentials",
    "certificate.s_max",
    "output.dir",
];

#[derive(Clone, Debug, PartialEq)]
pub enum MetricFamily {
    Flat,
    KahlerPotential { amplitude: f64, seed: u64 },
    NonkahlerPerturbed { eps: f64, seed: u64 },
    ConformalRadial { rho0: f64, kappa: f64, center: f64, amplitude: f64, seed: u64 },
}

impl MetricFamily {
    pub fn id(&self) -> &'static str {
        match self {
            MetricFamily::Flat => "flat",
            MetricFamily::KahlerPotential { .. } => "kahler_potential",
            MetricFamily::NonkahlerPerturbed { .. } => "nonkahler_perturbed",
            MetricFamily::ConformalRadial { .. } => "conformal_radial",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Monitor {
    PsiEstimates,
    TraceBound,
    MaxPrinciple,
    KahlerDefect,
    EvolutionResiduals,
}

impl Monitor {
    pub const ALL: [Monitor; 5] = [
        Monitor::PsiEstimates,
        Monitor::TraceBound,
        Monitor::MaxPrinciple,
        Monitor::KahlerDefect,
        Monitor::EvolutionResiduals,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Monitor::PsiEstimates => "psi_estimates",
            Monitor::TraceBound => "trace_bound",
            Monitor::MaxPrinciple => "max_principle",
            Monitor::KahlerDefect => "kahler_defect",
            Monitor::EvolutionResiduals => "evolution_residuals",
        }
    }
}

impl FromStr for Monitor {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Monitor::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown monitor {s:?}"))
    }
}

/// Bounded potential used by certificates.
#[derive(Clone, Debug, PartialEq)]
pub enum Potential {
    Zero,
    /// Random trigonometric polynomial with sup-norm `amplitude`.
    Trig { amplitude: f64, seed: u64 },
}

impl fmt::Display for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::Zero => f.write_str("zero"),
            Potential::Trig { amplitude, seed } => write!(f, "trig:{}:{}", fmt_f64(*amplitude), seed),
        }
    }
}

impl FromStr for Potential {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "zero" {
            return Ok(Potential::Zero);
        }
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["trig", a, seed] => Ok(Potential::Trig {
                amplitude: a.parse().map_err(|_| format!("bad potential amplitude {a:?}"))?,
                seed: seed.parse().map_err(|_| format!("bad potential seed {seed:?}"))?,
            }),
            _ => Err(format!("unknown potential {s:?} (expected zero or trig:<amplitude>:<seed>)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DtSetting {
    Auto,
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CertSetting {
    pub s: f64,
    pub beta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub n: usize,
    pub size: usize,
    pub scheme: Scheme,
    pub family: MetricFamily,
    pub formulation: Formulation,
    pub integrator: Integrator,
    pub t_end: f64,
    pub snapshots: Vec<f64>,
    pub dt: DtSetting,
    pub dt_fraction: f64,
    pub stability_check: bool,
    pub monitors: Vec<Monitor>,
    pub tolerance: f64,
    pub residual_tol: f64,
    pub kahler_tol: f64,
    pub bk_budget: usize,
    pub bk_seed: u64,
    pub s1: Option<f64>,
    pub psi_k: Option<f64>,
    pub trace_s2: Option<f64>,
    pub trace_k: Option<f64>,
    pub trace_k1: Option<f64>,
    pub trace_c1: Option<f64>,
    pub trace_c2: f64,
    pub a2: Option<CertSetting>,
    pub a3: Option<CertSetting>,
    pub potentials: Vec<Potential>,
    pub s_max: f64,
    pub output_dir: Option<String>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n: 1,
            size: 64,
            scheme: Scheme::Spectral,
            family: MetricFamily::Flat,
            formulation: Formulation::Metric,
            integrator: Integrator::Euler,
            t_end: 0.01,
            snapshots: Vec::new(),
            dt: DtSetting::Auto,
            dt_fraction: 1.0,
            stability_check: true,
            monitors: Vec::new(),
            tolerance: 1e-8,
            residual_tol: 1e-5,
            kahler_tol: 1e-6,
            bk_budget: 4,
            bk_seed: 0,
            s1: None,
            psi_k: None,
            trace_s2: None,
            trace_k: None,
            trace_k1: None,
            trace_c1: None,
            trace_c2: 1.0,
            a2: None,
            a3: None,
            potentials: vec![Potential::Zero],
            s_max: 100.0,
            output_dir: None,
        }
    }
}

/// One problem in a config text, with its 1-based line (0 when the problem
/// is not tied to a line).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            f.write_str(&self.message)
        } else {
            write!(f, "line {}: {}", self.line, self.message)
        }
    }
}

/// Shortest round-trip text of a float.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got {s:?}")),
    }
}

fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse::<T>().map_err(|e| format!("{e}")))
        .collect()
}

fn num<T: FromStr>(s: &str) -> Result<T, String> {
    s.parse().map_err(|_| format!("cannot parse {s:?} as a number"))
}

struct Entries<'a> {
    pairs: Vec<(&'a str, &'a str, usize)>,
}

impl<'a> Entries<'a> {
    fn get(&self, key: &str) -> Option<(&'a str, usize)> {
        self.pairs.iter().find(|(k, _, _)| *k == key).map(|(_, v, l)| (*v, *l))
    }
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, Vec<ConfigError>> {
    let mut errors = Vec::new();
    let mut entries = Entries { pairs: Vec::new() };
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            errors.push(ConfigError { line, message: format!("expected key = value, got {content:?}") });
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            errors.push(ConfigError { line, message: format!("unknown key {key:?}") });
        } else if let Some((_, first)) = entries.get(key) {
            errors.push(ConfigError { line, message: format!("duplicate key {key:?} (first on line {first})") });
        } else {
            entries.pairs.push((key, value, line));
        }
    }

    let mut cfg = ScenarioConfig::default();
    macro_rules! field {
        ($key:expr, $parse:expr, $target:expr) => {
            if let Some((v, line)) = entries.get($key) {
                match $parse(v) {
                    Ok(x) => $target = x,
                    Err(message) => errors.push(ConfigError { line, message: format!("{}: {}", $key, message) }),
                }
            }
        };
    }
    field!("grid.n", num::<usize>, cfg.n);
    field!("grid.N", num::<usize>, cfg.size);
    field!("grid.scheme", |v: &str| v.parse::<Scheme>().map_err(|e| e.to_string()), cfg.scheme);
    field!("flow.formulation", parse_formulation, cfg.formulation);
    field!("flow.integrator", |v: &str| v.parse::<Integrator>().map_err(|e| e.to_string()), cfg.integrator);
    field!("flow.t_end", num::<f64>, cfg.t_end);
    field!("flow.snapshots", parse_list::<f64>, cfg.snapshots);
    field!("flow.dt", parse_dt, cfg.dt);
    field!("flow.dt_fraction", num::<f64>, cfg.dt_fraction);
    field!("flow.stability_check", parse_bool, cfg.stability_check);
    field!("monitors", parse_list::<Monitor>, cfg.monitors);
    field!("monitor.tolerance", num::<f64>, cfg.tolerance);
    field!("monitor.residual_tol", num::<f64>, cfg.residual_tol);
    field!("monitor.kahler_tol", num::<f64>, cfg.kahler_tol);
    field!("monitor.bk_budget", num::<usize>, cfg.bk_budget);
    field!("monitor.bk_seed", num::<u64>, cfg.bk_seed);
    field!("monitor.s1", |v| num::<f64>(v).map(Some), cfg.s1);
    field!("monitor.psi_k", |v| num::<f64>(v).map(Some), cfg.psi_k);
    field!("monitor.trace_s2", |v| num::<f64>(v).map(Some), cfg.trace_s2);
    field!("monitor.trace_k", |v| num::<f64>(v).map(Some), cfg.trace_k);
    field!("monitor.trace_k1", |v| num::<f64>(v).map(Some), cfg.trace_k1);
    field!("monitor.trace_c1", |v| num::<f64>(v).map(Some), cfg.trace_c1);
    field!("monitor.trace_c2", num::<f64>, cfg.trace_c2);
    field!("certificate.potentials", parse_list::<Potential>, cfg.potentials);
    field!("certificate.s_max", num::<f64>, cfg.s_max);
    field!("output.dir", |v: &str| Ok::<_, String>(Some(v.to_string())), cfg.output_dir);

    let mut f64_of = |key: &str, default: Option<f64>| -> Option<f64> {
        match entries.get(key) {
            Some((v, line)) => match num::<f64>(v) {
                Ok(x) => Some(x),
                Err(message) => {
                    errors.push(ConfigError { line, message: format!("{key}: {message}") });
                    None
                }
            },
            None => default,
        }
    };
    let a2 = (f64_of("certificate.a2.s", None), f64_of("certificate.a2.beta", None));
    let a3 = (f64_of("certificate.a3.s", None), f64_of("certificate.a3.beta", None));
    let amplitude = f64_of("metric.amplitude", Some(0.3));
    let eps = f64_of("metric.eps", Some(0.1));
    let rho0 = f64_of("metric.rho0", Some(50.0));
    let kappa = f64_of("metric.kappa", Some(0.1));
    let center = f64_of("metric.rho_center", Some(10.0));
    let rho_amp = f64_of("metric.rho_amplitude", Some(9.9));
    let seed = match entries.get("metric.seed") {
        Some((v, line)) => num::<u64>(v).unwrap_or_else(|message| {
            errors.push(ConfigError { line, message: format!("metric.seed: {message}") });
            0
        }),
        None => 0,
    };
    for (name, pair, slot) in [("a2", a2, &mut cfg.a2), ("a3", a3, &mut cfg.a3)] {
        match pair {
            (Some(s), Some(beta)) => *slot = Some(CertSetting { s, beta }),
            (None, None) => {}
            _ => errors.push(ConfigError {
                line: 0,
                message: format!("certificate.{name} needs both .s and .beta"),
            }),
        }
    }
    let family_line = entries.get("metric.family").map(|(_, l)| l).unwrap_or(0);
    match entries.get("metric.family").map(|(v, _)| v).unwrap_or("flat") {
        "flat" => cfg.family = MetricFamily::Flat,
        "kahler_potential" => {
            cfg.family = MetricFamily::KahlerPotential { amplitude: amplitude.unwrap_or(0.3), seed }
        }
        "nonkahler_perturbed" => {
            cfg.family = MetricFamily::NonkahlerPerturbed { eps: eps.unwrap_or(0.1), seed }
        }
        "conformal_radial" => {
            cfg.family = MetricFamily::ConformalRadial {
                rho0: rho0.unwrap_or(50.0),
                kappa: kappa.unwrap_or(0.1),
                center: center.unwrap_or(10.0),
                amplitude: rho_amp.unwrap_or(9.9),
                seed,
            }
        }
        other => errors.push(ConfigError { line: family_line, message: format!("unknown metric family {other:?}") }),
    }

    validate(&cfg, &entries, &mut errors);
    if errors.is_empty() {
        Ok(cfg)
    } else {
        errors.sort_by_key(|e| e.line);
        Err(errors)
    }
}

fn parse_formulation(v: &str) -> Result<Formulation, String> {
    match v {
        "metric" => Ok(Formulation::Metric),
        "potential" => Ok(Formulation::Potential),
        _ => Err(format!("unknown formulation {v:?} (expected metric or potential)")),
    }
}

fn parse_dt(v: &str) -> Result<DtSetting, String> {
    if v == "auto" {
        Ok(DtSetting::Auto)
    } else {
        num::<f64>(v).map(DtSetting::Fixed)
    }
}

fn validate(cfg: &ScenarioConfig, entries: &Entries, errors: &mut Vec<ConfigError>) {
    let line = |key: &str| entries.get(key).map(|(_, l)| l).unwrap_or(0);
    let mut check = |ok: bool, key: &str, message: String| {
        if !ok {
            errors.push(ConfigError { line: line(key), message });
        }
    };
    check(matches!(cfg.n, 1 | 2), "grid.n", format!("grid.n must be 1 or 2, got {}", cfg.n));
    check(
        cfg.size >= 8 && cfg.size % 2 == 0,
        "grid.N",
        format!("grid.N must be even and at least 8, got {}", cfg.size),
    );
    check(cfg.t_end > 0.0, "flow.t_end", "flow.t_end must be positive".into());
    check(
        cfg.snapshots.iter().all(|s| (0.0..=cfg.t_end).contains(s)),
        "flow.snapshots",
        "flow.snapshots must lie in [0, flow.t_end]".into(),
    );
    if let DtSetting::Fixed(dt) = cfg.dt {
        check(dt > 0.0, "flow.dt", "flow.dt must be positive or auto".into());
    }
    check(
        cfg.dt_fraction > 0.0 && cfg.dt_fraction <= 1.0,
        "flow.dt_fraction",
        "flow.dt_fraction must lie in (0, 1]".into(),
    );
    check(cfg.bk_budget >= 1, "monitor.bk_budget", "monitor.bk_budget must be at least 1".into());
    for (key, v) in [
        ("monitor.tolerance", cfg.tolerance),
        ("monitor.residual_tol", cfg.residual_tol),
        ("monitor.kahler_tol", cfg.kahler_tol),
    ] {
        check(v >= 0.0, key, format!("{key} must be non-negative"));
    }
    check(cfg.s_max > 0.0, "certificate.s_max", "certificate.s_max must be positive".into());
    for (name, c) in [("a2", cfg.a2), ("a3", cfg.a3)] {
        if let Some(c) = c {
            let key = format!("certificate.{name}.s");
            check(c.s > 0.0 && c.beta > 0.0, &key, format!("certificate.{name} needs S > 0 and beta > 0"));
        }
    }
    check(!cfg.potentials.is_empty(), "certificate.potentials", "certificate.potentials is empty".into());
    match cfg.family {
        MetricFamily::KahlerPotential { amplitude, .. } => check(
            (0.0..1.0).contains(&amplitude),
            "metric.amplitude",
            "metric.amplitude must lie in [0, 1)".into(),
        ),
        MetricFamily::NonkahlerPerturbed { eps, .. } => {
            check(eps.abs() < 1.0, "metric.eps", "metric.eps must satisfy |eps| < 1".into());
            check(cfg.n == 2, "metric.family", "nonkahler_perturbed needs grid.n = 2".into());
        }
        MetricFamily::ConformalRadial { rho0, kappa, center, amplitude, .. } => {
            check(rho0 > 0.0, "metric.rho0", "metric.rho0 must be positive".into());
            check(kappa > 0.0 && kappa < 0.125, "metric.kappa", "metric.kappa must lie in (0, 1/8)".into());
            check(
                center - amplitude.abs() >= 0.0,
                "metric.rho_center",
                "metric.rho_center must be at least |metric.rho_amplitude| so that rho >= 0".into(),
            );
        }
        MetricFamily::Flat => {}
    }
}

/// Canonical text: every key in [`KEYS`] order, with defaults filled in.
pub fn emit(cfg: &ScenarioConfig) -> String {
    let mut out = String::new();
    let mut put = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    };
    let join = |v: &[f64]| v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(", ");
    put("grid.n", cfg.n.to_string());
    put("grid.N", cfg.size.to_string());
    put("grid.scheme", cfg.scheme.name().to_string());
    put("metric.family", cfg.family.id().to_string());
    match &cfg.family {
        MetricFamily::Flat => {}
        MetricFamily::KahlerPotential { amplitude, seed } => {
            put("metric.amplitude", fmt_f64(*amplitude));
            put("metric.seed", seed.to_string());
        }
        MetricFamily::NonkahlerPerturbed { eps, seed } => {
            put("metric.eps", fmt_f64(*eps));
            put("metric.seed", seed.to_string());
        }
        MetricFamily::ConformalRadial { rho0, kappa, center, amplitude, seed } => {
            put("metric.seed", seed.to_string());
            put("metric.rho0", fmt_f64(*rho0));
            put("metric.kappa", fmt_f64(*kappa));
            put("metric.rho_center", fmt_f64(*center));
            put("metric.rho_amplitude", fmt_f64(*amplitude));
        }
    }
    put(
        "flow.formulation",
        match cfg.formulation {
            Formulation::Metric => "metric",
            Formulation::Potential => "potential",
        }
        .to_string(),
    );
    put("flow.integrator", cfg.integrator.name().to_string());
    put("flow.t_end", fmt_f64(cfg.t_end));
    put("flow.snapshots", join(&cfg.snapshots));
    put(
        "flow.dt",
        match cfg.dt {
            DtSetting::Auto => "auto".to_string(),
            DtSetting::Fixed(dt) => fmt_f64(dt),
        },
    );
    put("flow.dt_fraction", fmt_f64(cfg.dt_fraction));
    put("flow.stability_check", cfg.stability_check.to_string());
    put("monitors", cfg.monitors.iter().map(|m| m.name()).collect::<Vec<_>>().join(", "));
    put("monitor.tolerance", fmt_f64(cfg.tolerance));
    put("monitor.residual_tol", fmt_f64(cfg.residual_tol));
    put("monitor.kahler_tol", fmt_f64(cfg.kahler_tol));
    put("monitor.bk_budget", cfg.bk_budget.to_string());
    put("monitor.bk_seed", cfg.bk_seed.to_string());
    for (k, v) in [
        ("monitor.s1", cfg.s1),
        ("monitor.psi_k", cfg.psi_k),
        ("monitor.trace_s2", cfg.trace_s2),
        ("monitor.trace_k", cfg.trace_k),
        ("monitor.trace_k1", cfg.trace_k1),
        ("monitor.trace_c1", cfg.trace_c1),
    ] {
        if let Some(v) = v {
            put(k, fmt_f64(v));
        }
    }
    put("monitor.trace_c2", fmt_f64(cfg.trace_c2));
    for (name, c) in [("a2", cfg.a2), ("a3", cfg.a3)] {
        if let Some(c) = c {
            put(&format!("certificate.{name}.s"), fmt_f64(c.s));
            put(&format!("certificate.{name}.beta"), fmt_f64(c.beta));
        }
    }
    put(
        "certificate.potentials",
        cfg.potentials.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(", "),
    );
    put("certificate.s_max", fmt_f64(cfg.s_max));
    if let Some(dir) = &cfg.output_dir {
        put("output.dir", dir.clone());
    }
    out
}

/// SHA-256 of the canonical text, hex encoded.
pub fn config_hash(cfg: &ScenarioConfig) -> String {
    hex::encode(Sha256::digest(emit(cfg).as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_from_minimal_text() {
        let cfg = parse_config("metric.family = flat\n").unwrap();
        assert_eq!(cfg.size, 64);
        assert_eq!(cfg.scheme, Scheme::Spectral);
        assert_eq!(cfg.integrator, Integrator::Euler);
        assert_eq!(cfg.family, MetricFamily::Flat);
    }

    #[test]
    fn negative_end_time_is_named() {
        let errs = parse_config("flow.t_end = -1\n").unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].line, 1);
        assert!(errs[0].message.contains("flow.t_end must be positive"));
    }

    #[test]
    fn every_problem_is_listed_with_its_line() {
        let text = "grid.n = 3\nbogus = 1\n# comment\ngrid.N = 7\ngrid.n = 1\nnot a pair\n";
        let errs = parse_config(text).unwrap_err();
        let lines: Vec<usize> = errs.iter().map(|e| e.line).collect();
        assert_eq!(lines, vec![1, 2, 4, 5, 6]);
    }

    #[test]
    fn partial_certificate_rejected() {
        let errs = parse_config("certificate.a2.s = 1\n").unwrap_err();
        assert!(errs[0].message.contains("needs both"));
    }

    #[test]
    fn hash_ignores_formatting() {
        let a = parse_config("grid.N = 32\n  flow.t_end=0.01 # end\n").unwrap();
        let b = parse_config("flow.t_end = 1e-2\ngrid.N = 32\n").unwrap();
        assert_eq!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }
}
