//! Acceptance suite. Every test prints one `criterion N: PASS|FAIL` line to
//! stdout and to `target/tmp/acceptance.txt` (rewritten on each run), then
//! asserts the verdict.
//!
//! Run with `cargo test -p chernlab-cli --test acceptance -- --nocapture --test-threads=1`.

use std::fmt::Write as _;
use std::io::Write as _;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use chernlab::chern::ChernPackage;
use chernlab::cutoff::{build_profile, check_profile, conformal_completion, sine_exhaustion, CompletionOptions};
use chernlab::estimates::{certify_a2, estimate_sb_lower};
use chernlab::flow::{
    constant_metric_heat, cross_check_formulations, evolution_residual_lambda, evolution_residual_psi,
    integrate, kahler_defect, max_principle_monitor, DtPolicy, Formulation, Integrator, RunOptions,
    ScalarTrajectory, Trajectory, Verdict,
};
use chernlab::grid::{convergence_order, loglog_slope};
use chernlab::identities::{bianchi_torsion_residual, commutation_residual, conformal_change};
use chernlab::metric::{conformally_flat, kahler_potential, random_metric, TrigPoly};
use chernlab::{ComplexGrid, MetricField, Scheme, SmallMat};
use chernlab_cli::{parse_config, run_scenario};

// criterion 1
const IDENTITY_TOL: f64 = 1e-7;
const ORDER_TARGET: f64 = 4.0;
const ORDER_SLACK: f64 = 0.5;
const IDENTITY_AMPLITUDE: f64 = 0.1;
const IDENTITY_BUDGET: Duration = Duration::from_secs(120);
// criterion 2
const CONFORMAL_TOL: f64 = 1e-8;
const SCALING_TOL: f64 = 1e-12;
const CONFORMAL_BUDGET: Duration = Duration::from_secs(60);
// criterion 3
const CROSS_CHECK_TOL: f64 = 1e-6;
const FLOW3_BUDGET: Duration = Duration::from_secs(120);
// criterion 4
const FLAT_DRIFT_TOL: f64 = 1e-10;
const KAHLER_DEFECT_TOL: f64 = 1e-6;
const FLOW4_BUDGET: Duration = Duration::from_secs(300);
// criterion 5
const EVOLUTION_TOL: f64 = 1e-5;
const HARD_TOL: f64 = 1e-6;
// criterion 6
const MAX_PRINCIPLE_TOL: f64 = 1e-8;
// criterion 7
const FLAT_MARGIN_TOL: f64 = -1e-12;
const HORIZON_TOL: f64 = 1e-3;
// criterion 8
const NODE_DOUBLING_TOL: f64 = 0.01;
const SLOPE_RANGE: (f64, f64) = (-1.3, -0.7);
const CUTOFF_BUDGET: Duration = Duration::from_secs(120);

fn report(criterion: u32, pass: bool, detail: &str) {
    let line = format!("criterion {criterion}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
    println!("{line}");
    static FRESH: OnceLock<()> = OnceLock::new();
    let path = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance.txt");
    FRESH.get_or_init(|| {
        let _ = std::fs::remove_file(&path);
    });
    if let Ok(mut f) = std::fs::OpenOptions::new().create(true).append(true).open(&path) {
        let _ = writeln!(f, "{line}");
    }
    assert!(pass, "{line}");
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let clock = Instant::now();
    let out = f();
    (out, clock.elapsed())
}

fn grid(n: usize, size: usize, scheme: Scheme) -> ComplexGrid {
    ComplexGrid::new(n, size, scheme).unwrap()
}

/// All seven identity residuals of one metric: two commutation, five Bianchi.
fn identity_residuals(g: &MetricField, seed: u64) -> [f64; 7] {
    let pkg = ChernPackage::compute(g).unwrap();
    let c = commutation_residual(&pkg, seed).unwrap();
    let b = bianchi_torsion_residual(&pkg).unwrap().0;
    [c.vector, c.form, b[0], b[1], b[2], b[3], b[4]]
}

/// The 20 identity-suite metrics: seeds 0..10 in n = 1, seeds 10..20 in n = 2.
fn identity_case(index: u64) -> (usize, usize) {
    if index < 10 {
        (1, 128)
    } else {
        (2, 24)
    }
}

#[test]
fn criterion_1_identity_suite() {
    let ((spectral, orders), elapsed) = timed(|| {
        let mut spectral: f64 = 0.0;
        for seed in 0..20u64 {
            let (n, size) = identity_case(seed);
            let g = random_metric(&grid(n, size, Scheme::Spectral), IDENTITY_AMPLITUDE, seed);
            spectral = spectral.max(identity_residuals(&g, seed).into_iter().fold(0.0, f64::max));
        }
        // central4 order fit on all n = 1 metrics and the first two n = 2 metrics
        let mut orders = Vec::new();
        for seed in (0..10u64).chain(10..12) {
            let n = identity_case(seed).0;
            let sizes = [16, 24, 32];
            let res: Vec<[f64; 7]> = sizes
                .iter()
                .map(|&size| {
                    let g = random_metric(&grid(n, size, Scheme::Central4), IDENTITY_AMPLITUDE, seed);
                    identity_residuals(&g, seed)
                })
                .collect();
            for q in 0..7 {
                // Bianchi residuals vanish identically in n = 1
                if res[0][q] < 1e-12 {
                    continue;
                }
                let order = convergence_order(&sizes, |size| {
                    Ok(res[sizes.iter().position(|&s| s == size).unwrap()][q])
                })
                .unwrap();
                orders.push(order);
            }
        }
        (spectral, orders)
    });
    let lo = orders.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = orders.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let in_band = orders.iter().all(|o| (o - ORDER_TARGET).abs() <= ORDER_SLACK);
    let pass = spectral <= IDENTITY_TOL && !orders.is_empty() && in_band && elapsed <= IDENTITY_BUDGET;
    report(
        1,
        pass,
        &format!(
            "spectral max residual {spectral:.2e} <= {IDENTITY_TOL:e}; {} central4 orders in [{lo:.2}, {hi:.2}], \
             target {ORDER_TARGET} +- {ORDER_SLACK}; {:.1} s <= {} s",
            orders.len(),
            elapsed.as_secs_f64(),
            IDENTITY_BUDGET.as_secs()
        ),
    );
}

/// Largest conformal-law residual for a constant factor `c`.
fn scaling_residual(g: &MetricField, c: f64) -> f64 {
    conformal_change(g, &vec![c; g.grid.num_points()]).unwrap().2.max()
}

#[test]
fn criterion_2_conformal_suite() {
    let ((laws, scaling, floor), elapsed) = timed(|| {
        let mut laws: f64 = 0.0;
        let mut scaling: f64 = 0.0;
        let mut floor: f64 = 0.0;
        for seed in 0..10u64 {
            let (n, size, coarse) = if seed < 5 { (1, 64, 16) } else { (2, 24, 8) };
            let gr = grid(n, size, Scheme::Spectral);
            let g = random_metric(&gr, IDENTITY_AMPLITUDE, 100 + seed);
            let f = TrigPoly::random(n, 3, 200 + seed).normalized_value(0.2).sample(&gr);
            let c = 0.05 * (seed as f64 + 1.0);
            laws = laws.max(conformal_change(&g, &f).unwrap().2.max());
            floor = floor.max(scaling_residual(&g, c));
            // same metric on the coarsest grid: the round-off floor of second
            // derivatives grows like N^2 and exceeds 1e-12 at the law grids
            let g_coarse = random_metric(&grid(n, coarse, Scheme::Spectral), IDENTITY_AMPLITUDE, 100 + seed);
            scaling = scaling.max(scaling_residual(&g_coarse, c));
        }
        (laws, scaling, floor)
    });
    let pass = laws <= CONFORMAL_TOL && scaling <= SCALING_TOL && elapsed <= CONFORMAL_BUDGET;
    report(
        2,
        pass,
        &format!(
            "law residual {laws:.2e} <= {CONFORMAL_TOL:e}; constant-F residual {scaling:.2e} <= {SCALING_TOL:e} \
             (N = 16 / 8; {floor:.2e} at the law grids); {:.1} s <= {} s",
            elapsed.as_secs_f64(),
            CONFORMAL_BUDGET.as_secs()
        ),
    );
}

struct KahlerSurfaceRuns {
    metric: Trajectory,
    potential: Trajectory,
    elapsed: Duration,
}

/// Kähler n = 1 scenario: N = 128, t_end = 0.05, rk4, both formulations.
fn kahler_surface() -> &'static KahlerSurfaceRuns {
    static RUNS: OnceLock<KahlerSurfaceRuns> = OnceLock::new();
    RUNS.get_or_init(|| {
        let clock = Instant::now();
        let g0 = kahler_potential(&grid(1, 128, Scheme::Spectral), 0.1, 1).unwrap();
        let opts = |formulation| RunOptions {
            formulation,
            integrator: Integrator::Rk4,
            t_end: 0.05,
            snapshots: vec![0.0125, 0.025, 0.0375],
            dt: DtPolicy::Auto { fraction: 1.0 },
        };
        let metric = integrate(&g0, &opts(Formulation::Metric)).unwrap();
        let potential = integrate(&g0, &opts(Formulation::Potential)).unwrap();
        KahlerSurfaceRuns { metric, potential, elapsed: clock.elapsed() }
    })
}

struct Item4Runs {
    flat: Trajectory,
    kahler: Trajectory,
    elapsed: Duration,
}

/// Flat and Kähler n = 2 runs: N = 24, t_end = 0.02.
fn item4_runs() -> &'static Item4Runs {
    static RUNS: OnceLock<Item4Runs> = OnceLock::new();
    RUNS.get_or_init(|| {
        let clock = Instant::now();
        let gr = grid(2, 24, Scheme::Spectral);
        let opts = RunOptions {
            formulation: Formulation::Metric,
            integrator: Integrator::Rk4,
            t_end: 0.02,
            snapshots: vec![0.005, 0.01, 0.015],
            dt: DtPolicy::Auto { fraction: 1.0 },
        };
        let flat = integrate(&MetricField::flat(&gr), &opts).unwrap();
        let kahler = integrate(&kahler_potential(&gr, 0.1, 2).unwrap(), &opts).unwrap();
        Item4Runs { flat, kahler, elapsed: clock.elapsed() }
    })
}

#[test]
fn criterion_3_flow_equivalence() {
    let runs = kahler_surface();
    let check = cross_check_formulations(&runs.metric, &runs.potential).unwrap();
    let quad = runs.metric.last().quadrature_check();
    let complete = runs.metric.breakdown.is_none() && runs.potential.breakdown.is_none();
    let pass = complete && check.max() <= CROSS_CHECK_TOL && quad.consistent() && runs.elapsed <= FLOW3_BUDGET;
    report(
        3,
        pass,
        &format!(
            "cross-check {:.2e} <= {CROSS_CHECK_TOL:e}; quadrature difference {:.2e} vs 10 x estimate {:.2e}; \
             {} steps; {:.1} s <= {} s",
            check.max(),
            quad.difference,
            10.0 * quad.estimate,
            runs.metric.steps.len(),
            runs.elapsed.as_secs_f64(),
            FLOW3_BUDGET.as_secs()
        ),
    );
}

#[test]
fn criterion_4_stationarity_and_kahler_preservation() {
    let runs = item4_runs();
    let g0 = &runs.flat.snapshots[0].g;
    let drift = runs.flat.snapshots.iter().map(|s| s.g.sup_diff(g0).unwrap()).fold(0.0, f64::max);
    let defect = runs.kahler.snapshots.iter().map(|s| kahler_defect(s).unwrap()).fold(0.0, f64::max);
    let reached = runs.kahler.last().t == 0.02 && runs.flat.last().t == 0.02;
    let pass = reached && drift <= FLAT_DRIFT_TOL && defect <= KAHLER_DEFECT_TOL && runs.elapsed <= FLOW4_BUDGET;
    report(
        4,
        pass,
        &format!(
            "flat drift {drift:.2e} <= {FLAT_DRIFT_TOL:e}; Kahler defect {defect:.2e} <= {KAHLER_DEFECT_TOL:e} \
             over {} snapshots; {:.1} s <= {} s",
            runs.kahler.snapshots.len(),
            runs.elapsed.as_secs_f64(),
            FLOW4_BUDGET.as_secs()
        ),
    );
}

#[test]
fn criterion_5_identities_along_trajectories() {
    let trajectories = [&kahler_surface().metric, &item4_runs().flat, &item4_runs().kahler];
    let mut evo: f64 = 0.0;
    let mut hard = f64::NEG_INFINITY;
    let mut snapshots = 0;
    for traj in trajectories {
        let s1 = traj.last().t;
        for s in &traj.snapshots {
            evo = evo.max(evolution_residual_psi(s).unwrap()).max(evolution_residual_lambda(s, s1).unwrap());
            hard = s.psi_combination().into_iter().fold(hard, f64::max);
            snapshots += 1;
        }
    }
    let pass = evo <= EVOLUTION_TOL && hard <= HARD_TOL;
    report(
        5,
        pass,
        &format!(
            "evolution residuals {evo:.2e} <= {EVOLUTION_TOL:e}; sup (t psidot - psi - n t) {hard:.2e} <= \
             {HARD_TOL:e}; {snapshots} snapshots"
        ),
    );
}

#[test]
fn criterion_6_max_principle_cases() {
    let gr = grid(1, 32, Scheme::Spectral);
    let times = [0.0, 0.005, 0.01, 0.02, 0.05];
    let np = gr.num_points();
    let constant = ScalarTrajectory {
        times: times.to_vec(),
        values: vec![vec![-1.0; np]; times.len()],
        heat_defect: vec![vec![0.0; np]; times.len()],
    };
    let sine = |c: f64, a: f64| -> Vec<f64> {
        (0..np).map(|p| c + a * (2.0 * std::f64::consts::PI * gr.coords(p)[0]).sin()).collect()
    };
    let h = SmallMat::identity(1);
    let second = constant_metric_heat(&gr, &h, &sine(-1.0, 0.5), &times).unwrap();
    let third = constant_metric_heat(&gr, &h, &sine(-0.1, 0.05), &times).unwrap();
    let verdicts = [
        max_principle_monitor(&constant, MAX_PRINCIPLE_TOL),
        max_principle_monitor(&second, MAX_PRINCIPLE_TOL),
        max_principle_monitor(&third, MAX_PRINCIPLE_TOL),
    ];
    let expected = [Verdict::Pass, Verdict::Inapplicable, Verdict::Pass];
    let got: Vec<Verdict> = verdicts.iter().map(|r| r.verdict).collect();
    let third_sup_ok = verdicts[2].sup <= MAX_PRINCIPLE_TOL;
    let pass = got == expected && third_sup_ok;
    let mut detail = String::new();
    for (i, (r, e)) in verdicts.iter().zip(expected).enumerate() {
        let _ = write!(detail, "case {}: {} (expected {e}, sup f {:.3}); ", i + 1, r.verdict, r.sup);
    }
    detail.push_str(&format!("tol {MAX_PRINCIPLE_TOL:e}"));
    report(6, pass, &detail);
}

#[test]
fn criterion_7_certificates() {
    use std::f64::consts::PI;
    let flat_grid = grid(2, 8, Scheme::Spectral);
    let flat = certify_a2(&MetricField::flat(&flat_grid), 1.0, &vec![0.0; flat_grid.num_points()], 1.0).unwrap();

    // n = 1, g = e^{2u} with u = lam sin(2 pi x): Ric = 2 pi^2 lam sin(2 pi x)
    let lam = 0.2;
    let beta = 0.5;
    let s_max = 10.0;
    let gr = grid(1, 64, Scheme::Spectral);
    let g = conformally_flat(&gr, |x| lam * (2.0 * PI * x[0]).sin());
    let est = estimate_sb_lower(&g, &[vec![0.0; gr.num_points()]], beta, s_max).unwrap();
    let sines: Vec<f64> = (0..gr.num_points()).map(|p| (2.0 * PI * gr.coords(p)[0]).sin()).collect();
    let margin = |s: f64| {
        sines
            .iter()
            .map(|sn| (1.0 - beta) * (2.0 * lam * sn).exp() - s * 2.0 * PI * PI * lam * sn)
            .fold(f64::INFINITY, f64::min)
    };
    let steps = 100_000;
    let mut root = 0.0;
    for i in 1..=steps {
        let s = s_max * i as f64 / steps as f64;
        if margin(s) < 0.0 {
            break;
        }
        root = s;
    }
    let gap = (est.s - root).abs();
    let pass = flat.measured_margin >= FLAT_MARGIN_TOL && !est.capped && gap <= HORIZON_TOL;
    report(
        7,
        pass,
        &format!(
            "flat (a2) margin {:.2e} >= {FLAT_MARGIN_TOL:e}; bisection S {:.6} vs dense scan {root:.6}, gap {gap:.2e} \
             <= {HORIZON_TOL:e}",
            flat.measured_margin, est.s
        ),
    );
}

#[test]
fn criterion_8_cutoff() {
    let ((zeros, sups, drifts, eps, slope), elapsed) = timed(|| {
        let p = build_profile(0.1, 10_000).unwrap();
        let (a, _) = p.transition();
        let zeros = p.s.iter().zip(&p.value).filter(|(s, _)| **s <= a).all(|(_, v)| *v == 0.0)
            && [&p.d1, &p.d2, &p.d3]
                .iter()
                .all(|col| p.s.iter().zip(col.iter()).filter(|(s, _)| **s <= a).all(|(_, v)| *v == 0.0));
        let coarse = check_profile(&p, 3).unwrap().weighted_sup;
        let fine = check_profile(&build_profile(0.1, 20_000).unwrap(), 3).unwrap().weighted_sup;
        let sups: Vec<(f64, f64)> = coarse.into_iter().zip(fine).collect();

        let gr = grid(2, 16, Scheme::Spectral);
        let g = MetricField::flat(&gr);
        let rho = sine_exhaustion(&gr, 10.0, 9.9, 1);
        let radii = [4.0, 8.0, 16.0];
        let reports: Vec<_> = radii
            .iter()
            .map(|&r| conformal_completion(&g, &rho, r, &p, &CompletionOptions::default()).unwrap().report)
            .collect();
        let drifts: Vec<f64> = reports.iter().map(|r| r.torsion_drift).collect();
        let eps: Vec<f64> = reports.iter().map(|r| r.epsilon()).collect();
        let slope = loglog_slope(&radii, &drifts);
        (zeros, sups, drifts, eps, slope)
    });
    let stable = sups.iter().all(|(x, y)| x.is_finite() && y.is_finite() && (x - y).abs() <= NODE_DOUBLING_TOL * y.abs());
    let decreasing = eps.windows(2).all(|w| w[1] < w[0]) && drifts.windows(2).all(|w| w[1] < w[0]);
    let slope_ok = (SLOPE_RANGE.0..=SLOPE_RANGE.1).contains(&slope);
    let pass = zeros && stable && decreasing && slope_ok && elapsed <= CUTOFF_BUDGET;
    let sup_text: Vec<String> = sups.iter().map(|(x, y)| format!("{x:.4e}/{y:.4e}")).collect();
    report(
        8,
        pass,
        &format!(
            "exact zeros {zeros}; weighted sups k=1..3 (10k/20k nodes) {}, within {NODE_DOUBLING_TOL}; \
             epsilon {eps:.3?} decreasing {decreasing}; torsion drift slope {slope:.3} in {SLOPE_RANGE:?}; \
             {:.1} s <= {} s",
            sup_text.join(", "),
            elapsed.as_secs_f64(),
            CUTOFF_BUDGET.as_secs()
        ),
    );
}

#[test]
fn criterion_9_determinism() {
    let scenarios = [
        "grid.n = 1\ngrid.N = 32\nmetric.family = kahler_potential\nmetric.amplitude = 0.2\nmetric.seed = 7\n\
         flow.integrator = rk4\nflow.t_end = 0.005\nflow.snapshots = 0.0025\n\
         monitors = psi_estimates, trace_bound, max_principle, kahler_defect, evolution_residuals\n\
         certificate.a2.s = 0.01\ncertificate.a2.beta = 0.5\n",
        "grid.n = 2\ngrid.N = 8\nmetric.family = nonkahler_perturbed\nmetric.eps = 0.1\nmetric.seed = 3\n\
         flow.t_end = 0.002\nmonitors = kahler_defect, evolution_residuals, max_principle\n",
        "grid.n = 1\ngrid.N = 32\nmetric.family = conformal_radial\nmetric.rho0 = 25\nmetric.kappa = 0.1\n\
         flow.t_end = 0.002\nmonitors = psi_estimates, evolution_residuals\n",
    ];
    let files = ["trajectory.csv", "monitors.csv", "calibration.csv", "profile.csv", "config.txt"];
    let mut compared = 0;
    let mut mismatches = Vec::new();
    for (i, text) in scenarios.iter().enumerate() {
        let cfg = parse_config(text).unwrap();
        let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
        for d in &dirs {
            run_scenario(&cfg).unwrap().write(d.path()).unwrap();
        }
        for f in files {
            let a = std::fs::read(dirs[0].path().join(f));
            let b = std::fs::read(dirs[1].path().join(f));
            match (a, b) {
                (Ok(a), Ok(b)) => {
                    compared += 1;
                    if a != b {
                        mismatches.push(format!("scenario {i} {f}"));
                    }
                }
                (Err(_), Err(_)) => {}
                _ => mismatches.push(format!("scenario {i} {f} present in one run only")),
            }
        }
    }
    let pass = mismatches.is_empty() && compared >= 3 * 4;
    report(9, pass, &format!("{compared} files compared across {} scenarios; mismatches {mismatches:?}", scenarios.len()));
}
