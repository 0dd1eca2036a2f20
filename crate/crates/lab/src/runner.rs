//! Scenario orchestration: build the initial metric, integrate, evaluate the
//! requested monitors and collect everything into a [`RunRecord`].

use std::path::Path;
use std::time::Instant;

use chernlab::bk::bk_extrema;
use chernlab::chern::{kahler_defect, ChernPackage};
use chernlab::cutoff::{
    build_profile, conformal_completion, sine_exhaustion, CompletionOptions, CompletionReport,
    CutoffProfile, MIN_NODES,
};
use chernlab::estimates::{
    certify_a1, certify_a2, certify_a3, estimate_sb_lower, monitor_psi_estimates, monitor_trace_bound,
    Certificate, MonitorRecord, MonitorReport, TraceBoundConstants,
};
use chernlab::flow::{
    evolution_residual_lambda, evolution_residual_psi, integrate, laplacian, max_principle_monitor,
    BreakdownInfo, DtPolicy, FlowState, RunOptions, ScalarTrajectory, Trajectory, Verdict,
};
use chernlab::metric::{kahler_potential, nonkahler_perturbed, TrigPoly};
use chernlab::{ComplexGrid, Error, MetricField};

use crate::config::{config_hash, emit, DtSetting, MetricFamily, Monitor, Potential, ScenarioConfig};
use crate::error::{LabError, LabResult};
use crate::output;

/// Initial defect below which the starting metric counts as Kähler.
pub const KAHLER_START_TOL: f64 = 1e-10;

/// One `trajectory.csv` row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SnapshotRow {
    pub t: f64,
    pub min_eig_g: f64,
    pub max_eig_g: f64,
    pub psi_min: f64,
    pub psi_max: f64,
    pub psidot_min: f64,
    pub psidot_max: f64,
    pub torsion_sup: f64,
    pub dbar_torsion_sup: f64,
    pub bk_min: f64,
    pub bk_max: f64,
    pub kahler_defect: f64,
    pub res_psi_evo: f64,
    pub res_lambda_evo: f64,
}

impl SnapshotRow {
    pub fn values(&self) -> [f64; 14] {
        [
            self.t,
            self.min_eig_g,
            self.max_eig_g,
            self.psi_min,
            self.psi_max,
            self.psidot_min,
            self.psidot_max,
            self.torsion_sup,
            self.dbar_torsion_sup,
            self.bk_min,
            self.bk_max,
            self.kahler_defect,
            self.res_psi_evo,
            self.res_lambda_evo,
        ]
    }
}

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub config_hash: String,
    pub canonical_config: String,
    pub rows: Vec<SnapshotRow>,
    pub breakdown: Option<BreakdownInfo>,
    pub monitors: Vec<MonitorRecord>,
    /// Calibration constants, prefixed by monitor name.
    pub calibration: Vec<(String, f64)>,
    pub completion: Option<CompletionReport>,
    pub profile: Option<CutoffProfile>,
    /// Wall-clock seconds per stage.
    pub timings: Vec<(String, f64)>,
}

impl RunRecord {
    /// 0 on completion, 2 on breakdown before `t_end`.
    pub fn exit_code(&self) -> i32 {
        if self.breakdown.is_some() {
            2
        } else {
            0
        }
    }

    /// Worst verdict per monitor name, in first-seen order.
    pub fn verdicts(&self) -> Vec<(String, Verdict)> {
        let report = MonitorReport { records: self.monitors.clone(), calibration: Vec::new() };
        let mut names: Vec<&str> = Vec::new();
        for r in &self.monitors {
            if !names.contains(&r.monitor.as_str()) {
                names.push(&r.monitor);
            }
        }
        names
            .into_iter()
            .filter_map(|n| report.verdict(n).map(|v| (n.to_string(), v)))
            .collect()
    }

    /// Write `trajectory.csv`, `monitors.csv`, `calibration.csv`,
    /// `config.txt`, `summary.txt` and, for conformal scenarios, `profile.csv`.
    pub fn write(&self, dir: &Path) -> LabResult<()> {
        std::fs::create_dir_all(dir).map_err(LabError::io(dir))?;
        output::write_trajectory(&dir.join("trajectory.csv"), &self.rows)?;
        output::write_monitors(&dir.join("monitors.csv"), &self.monitors)?;
        output::write_pairs(&dir.join("calibration.csv"), ["constant", "value"], &self.calibration)?;
        if let Some(profile) = &self.profile {
            output::write_profile(&dir.join("profile.csv"), profile)?;
        }
        let cfg_path = dir.join("config.txt");
        std::fs::write(&cfg_path, &self.canonical_config).map_err(LabError::io(&cfg_path))?;
        let summary_path = dir.join("summary.txt");
        std::fs::write(&summary_path, self.summary()).map_err(LabError::io(&summary_path))
    }

    /// Human-readable summary, including timings.
    pub fn summary(&self) -> String {
        let mut out = format!("config_hash = {}\n", self.config_hash);
        match self.breakdown {
            Some(b) => out.push_str(&format!("breakdown = t {} at point {}\n", b.t, b.point)),
            None => out.push_str("breakdown = none\n"),
        }
        if let Some(c) = &self.completion {
            out.push_str(&format!(
                "completion = rho0 {} kappa {} epsilon {:e}\n",
                c.rho0,
                c.kappa,
                c.epsilon()
            ));
        }
        for (name, v) in self.verdicts() {
            out.push_str(&format!("verdict.{name} = {v}\n"));
        }
        for (stage, secs) in &self.timings {
            out.push_str(&format!("time.{stage} = {secs:.3}s\n"));
        }
        out
    }
}

/// Initial metric of a scenario plus the conformal data when it applies.
#[derive(Clone, Debug)]
pub struct InitialMetric {
    pub g0: MetricField,
    /// Exhaustion candidate used for (a1) and the conformal family.
    pub rho: Vec<f64>,
    pub completion: Option<CompletionReport>,
    pub profile: Option<CutoffProfile>,
}

pub fn grid_of(cfg: &ScenarioConfig) -> LabResult<ComplexGrid> {
    Ok(ComplexGrid::new(cfg.n, cfg.size, cfg.scheme)?)
}

/// Build the initial metric. The conformal family must keep every grid point
/// inside `{rho < rho0}`: flows need a metric on the whole periodic chart.
pub fn initial_metric(cfg: &ScenarioConfig) -> LabResult<InitialMetric> {
    let grid = grid_of(cfg)?;
    let default_rho = |seed| sine_exhaustion(&grid, 10.0, 9.9, seed);
    Ok(match cfg.family {
        MetricFamily::Flat => {
            InitialMetric { g0: MetricField::flat(&grid), rho: default_rho(0), completion: None, profile: None }
        }
        MetricFamily::KahlerPotential { amplitude, seed } => InitialMetric {
            g0: kahler_potential(&grid, amplitude, seed)?,
            rho: default_rho(seed),
            completion: None,
            profile: None,
        },
        MetricFamily::NonkahlerPerturbed { eps, seed } => InitialMetric {
            g0: nonkahler_perturbed(&grid, eps, seed)?,
            rho: default_rho(seed),
            completion: None,
            profile: None,
        },
        MetricFamily::ConformalRadial { rho0, kappa, center, amplitude, seed } => {
            let rho = sine_exhaustion(&grid, center, amplitude, seed);
            let profile = build_profile(kappa, MIN_NODES)?;
            let opts = CompletionOptions { bk_budget: cfg.bk_budget, seed: cfg.bk_seed, ..Default::default() };
            let done = conformal_completion(&MetricField::flat(&grid), &rho, rho0, &profile, &opts)?;
            let r = &done.report;
            if r.outside_points > 0 || r.overflow_points > 0 {
                return Err(Error::Invalid(format!(
                    "conformal_radial: {} points have rho / rho0 >= 1 and {} overflow; raise metric.rho0",
                    r.outside_points, r.overflow_points
                ))
                .into());
            }
            InitialMetric { g0: done.h0, rho, completion: Some(done.report), profile: Some(profile) }
        }
    })
}

fn potential_field(grid: &ComplexGrid, p: &Potential) -> Vec<f64> {
    match p {
        Potential::Zero => vec![0.0; grid.num_points()],
        Potential::Trig { amplitude, seed } => {
            TrigPoly::random(grid.n(), 3, *seed).normalized_value(*amplitude).sample(grid)
        }
    }
}

/// The potential family as grid samples.
pub fn potential_family(cfg: &ScenarioConfig, grid: &ComplexGrid) -> Vec<Vec<f64>> {
    cfg.potentials.iter().map(|p| potential_field(grid, p)).collect()
}

/// (a2) and (a3) certificates for the configured settings, using the first
/// potential of the family.
pub fn certificates(cfg: &ScenarioConfig, g0: &MetricField) -> LabResult<(Option<Certificate>, Option<Certificate>)> {
    let u = potential_field(&g0.grid, &cfg.potentials[0]);
    let a2 = cfg.a2.map(|c| certify_a2(g0, c.s, &u, c.beta)).transpose()?;
    let a3 = cfg.a3.map(|c| certify_a3(g0, c.s, &u, c.beta)).transpose()?;
    Ok((a2, a3))
}

fn extrema(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

fn snapshot_row(state: &FlowState, cfg: &ScenarioConfig, s1: f64) -> LabResult<SnapshotRow> {
    let (min_eig_g, max_eig_g) = state.g.eig_range();
    let (psi_min, psi_max) = extrema(&state.psi);
    let (psidot_min, psidot_max) = extrema(&state.psidot);
    let pkg = ChernPackage::compute(&state.g)?;
    let bk = bk_extrema(&pkg, cfg.bk_budget, cfg.bk_seed)?;
    Ok(SnapshotRow {
        t: state.t,
        min_eig_g,
        max_eig_g,
        psi_min,
        psi_max,
        psidot_min,
        psidot_max,
        torsion_sup: pkg.torsion_norm,
        dbar_torsion_sup: pkg.dbar_torsion_norm,
        bk_min: bk.min,
        bk_max: bk.max,
        kahler_defect: kahler_defect(&state.g)?,
        res_psi_evo: evolution_residual_psi(state)?,
        res_lambda_evo: evolution_residual_lambda(state, s1)?,
    })
}

fn run_options(cfg: &ScenarioConfig) -> RunOptions {
    RunOptions {
        formulation: cfg.formulation,
        integrator: cfg.integrator,
        t_end: cfg.t_end,
        snapshots: cfg.snapshots.clone(),
        dt: match cfg.dt {
            DtSetting::Auto => DtPolicy::Auto { fraction: cfg.dt_fraction },
            DtSetting::Fixed(dt) => DtPolicy::Fixed { dt, checked: cfg.stability_check },
        },
    }
}

fn push(out: &mut Vec<MonitorRecord>, monitor: &str, t: f64, measured: f64, bound: f64, verdict: Verdict) {
    out.push(MonitorRecord { monitor: monitor.into(), t, measured, bound, margin: bound - measured, verdict });
}

fn bounded_verdict(measured: f64, bound: f64) -> Verdict {
    if measured <= bound {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

/// `Psi = t psidot - psi - n t` and its semi-discrete heat defect
/// `(d/dt - Delta) Psi = t d(psidot)/dt - n - Delta Psi` at every snapshot.
pub fn psi_heat_trajectory(traj: &Trajectory) -> LabResult<ScalarTrajectory> {
    let n = traj.last().n() as f64;
    let mut out = ScalarTrajectory { times: Vec::new(), values: Vec::new(), heat_defect: Vec::new() };
    for s in &traj.snapshots {
        let big_psi = s.psi_combination();
        let lap = laplacian(&s.g, &big_psi)?;
        let accel = s.psi_acceleration()?;
        out.heat_defect.push((0..lap.len()).map(|p| s.t * accel[p] - n - lap[p]).collect());
        out.values.push(big_psi);
        out.times.push(s.t);
    }
    Ok(out)
}

struct MonitorInputs<'a> {
    cfg: &'a ScenarioConfig,
    traj: &'a Trajectory,
    rows: &'a [SnapshotRow],
    a2: Option<&'a Certificate>,
}

fn evaluate(m: Monitor, inp: &MonitorInputs, out: &mut Vec<MonitorRecord>, cal: &mut Vec<(String, f64)>) -> LabResult<()> {
    let MonitorInputs { cfg, traj, rows, a2 } = *inp;
    let bk_min = rows.iter().map(|r| r.bk_min).fold(f64::INFINITY, f64::min);
    let k_measured = (-bk_min).max(0.0);
    match m {
        Monitor::PsiEstimates => {
            let report = monitor_psi_estimates(traj, a2, cfg.psi_k.unwrap_or(k_measured), bk_min);
            out.extend(report.records);
            cal.extend(report.calibration.into_iter().map(|(k, v)| (format!("psi_estimates.{k}"), v)));
        }
        Monitor::TraceBound => {
            let r0 = rows[0];
            let consts = TraceBoundConstants {
                s2: cfg.trace_s2.unwrap_or(cfg.t_end),
                k: cfg.trace_k.unwrap_or((-r0.bk_min).max(0.0)),
                k1: cfg.trace_k1.unwrap_or((r0.torsion_sup * r0.torsion_sup).max(r0.dbar_torsion_sup)),
                c1: cfg.trace_c1,
                c2: cfg.trace_c2,
            };
            let report = monitor_trace_bound(traj, a2, &consts)?;
            out.extend(report.records);
            cal.extend(report.calibration.into_iter().map(|(k, v)| (format!("trace_bound.{k}"), v)));
        }
        Monitor::MaxPrinciple => {
            let f = psi_heat_trajectory(traj)?;
            let report = max_principle_monitor(&f, cfg.tolerance);
            for (t, values) in f.times.iter().zip(&f.values) {
                let sup = extrema(values).1;
                push(out, "max_principle", *t, sup, cfg.tolerance, report.verdict);
            }
        }
        Monitor::KahlerDefect => {
            let kahler_start = rows[0].kahler_defect <= KAHLER_START_TOL;
            for r in rows {
                let v = if kahler_start { bounded_verdict(r.kahler_defect, cfg.kahler_tol) } else { Verdict::Inapplicable };
                push(out, "kahler_defect", r.t, r.kahler_defect, cfg.kahler_tol, v);
            }
        }
        Monitor::EvolutionResiduals => {
            for r in rows {
                let v = bounded_verdict(r.res_psi_evo, cfg.residual_tol);
                push(out, "evolution_residual_psi", r.t, r.res_psi_evo, cfg.residual_tol, v);
            }
            for r in rows {
                let v = bounded_verdict(r.res_lambda_evo, cfg.residual_tol);
                push(out, "evolution_residual_lambda", r.t, r.res_lambda_evo, cfg.residual_tol, v);
            }
        }
    }
    Ok(())
}

/// Run one scenario. A breakdown is not an error: the record keeps every
/// snapshot reached and [`RunRecord::exit_code`] reports it.
pub fn run_scenario(cfg: &ScenarioConfig) -> LabResult<RunRecord> {
    let mut timings = Vec::new();
    let clock = Instant::now();
    let init = initial_metric(cfg)?;
    let (a2, _a3) = certificates(cfg, &init.g0)?;
    timings.push(("setup".to_string(), clock.elapsed().as_secs_f64()));

    let clock = Instant::now();
    let traj = integrate(&init.g0, &run_options(cfg))?;
    timings.push(("flow".to_string(), clock.elapsed().as_secs_f64()));

    let clock = Instant::now();
    let s1 = cfg.s1.unwrap_or(cfg.t_end);
    let rows = traj.snapshots.iter().map(|s| snapshot_row(s, cfg, s1)).collect::<LabResult<Vec<_>>>()?;
    timings.push(("diagnostics".to_string(), clock.elapsed().as_secs_f64()));

    let clock = Instant::now();
    let mut monitors = Vec::new();
    let mut calibration = Vec::new();
    let inputs = MonitorInputs { cfg, traj: &traj, rows: &rows, a2: a2.as_ref() };
    let mut requested = cfg.monitors.clone();
    requested.sort();
    requested.dedup();
    for m in requested {
        evaluate(m, &inputs, &mut monitors, &mut calibration)?;
    }
    timings.push(("monitors".to_string(), clock.elapsed().as_secs_f64()));

    Ok(RunRecord {
        config_hash: config_hash(cfg),
        canonical_config: emit(cfg),
        rows,
        breakdown: traj.breakdown,
        monitors,
        calibration,
        completion: init.completion,
        profile: init.profile,
        timings,
    })
}

/// Output of `certify`.
#[derive(Clone, Debug, PartialEq)]
pub struct CertifyRecord {
    /// `(name, S, beta, value, verdict)`.
    pub rows: Vec<(String, f64, f64, f64, String)>,
}

impl CertifyRecord {
    pub fn write(&self, dir: &Path) -> LabResult<()> {
        use crate::config::fmt_f64;
        std::fs::create_dir_all(dir).map_err(LabError::io(dir))?;
        output::write_table(
            &dir.join("certificates.csv"),
            &["name", "s", "beta", "value", "verdict"],
            self.rows.iter().map(|(name, s, beta, value, verdict)| {
                vec![name.clone(), fmt_f64(*s), fmt_f64(*beta), fmt_f64(*value), verdict.clone()]
            }),
        )
    }
}

/// Evaluate the initial-data certificates of a scenario: (a1) bounds of the
/// exhaustion candidate, the configured (a2)/(a3) margins and the lower
/// estimate of the certified horizon over the potential family.
pub fn certify(cfg: &ScenarioConfig) -> LabResult<CertifyRecord> {
    let init = initial_metric(cfg)?;
    let g0 = &init.g0;
    let a1 = certify_a1(&init.rho, g0)?;
    let nan = f64::NAN;
    let finite = |v: f64| if v.is_finite() { "PASS" } else { "FAIL" }.to_string();
    let mut rows = vec![
        ("a1_grad_sup".to_string(), nan, nan, a1.grad_sup, finite(a1.grad_sup)),
        ("a1_hess_sup".to_string(), nan, nan, a1.hess_sup, finite(a1.hess_sup)),
    ];
    let (a2, a3) = certificates(cfg, g0)?;
    for (name, c) in [("a2_margin", a2), ("a3_margin", a3)] {
        if let Some(c) = c {
            let verdict = if c.holds() { Verdict::Pass } else { Verdict::Fail };
            rows.push((name.to_string(), c.s, c.beta, c.measured_margin, verdict.to_string()));
        }
    }
    let beta = cfg.a2.map_or(0.5, |c| c.beta);
    let est = estimate_sb_lower(g0, &potential_family(cfg, &g0.grid), beta, cfg.s_max)?;
    let verdict = match (est.best, est.capped) {
        (None, _) => "NONE",
        (Some(_), true) => "CAPPED",
        (Some(_), false) => "PASS",
    };
    rows.push(("sb_lower".to_string(), est.s, beta, est.best.map_or(nan, |i| i as f64), verdict.to_string()));
    Ok(CertifyRecord { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn conformal_family_rejects_masked_points() {
        let cfg = parse_config("grid.N = 8\nmetric.family = conformal_radial\nmetric.rho0 = 12\n").unwrap();
        let err = initial_metric(&cfg).unwrap_err();
        assert!(err.to_string().contains("raise metric.rho0"));
    }

    #[test]
    fn conformal_family_far_radius_is_identity() {
        let cfg = parse_config("grid.N = 8\nmetric.family = conformal_radial\nmetric.rho0 = 100\n").unwrap();
        let init = initial_metric(&cfg).unwrap();
        assert_eq!(init.g0, MetricField::flat(&grid_of(&cfg).unwrap()));
        assert_eq!(init.completion.unwrap().epsilon(), 0.0);
    }

    #[test]
    fn flat_certify_caps_horizon() {
        let cfg = parse_config("grid.N = 8\ncertificate.a2.s = 1\ncertificate.a2.beta = 1\n").unwrap();
        let rec = certify(&cfg).unwrap();
        let sb = rec.rows.iter().find(|r| r.0 == "sb_lower").unwrap();
        assert_eq!(sb.4, "CAPPED");
        let a2 = rec.rows.iter().find(|r| r.0 == "a2_margin").unwrap();
        assert_eq!(a2.4, "PASS");
    }
}
