use chernlab::bk::bk_extrema;
use chernlab::chern::ChernPackage;
use chernlab::estimates::{
    certify_a2, certify_a3, estimate_sb_lower, monitor_psi_estimates, monitor_trace_bound,
    TraceBoundConstants,
};
use chernlab::flow::{integrate, DtPolicy, Formulation, Integrator, RunOptions, Verdict};
use chernlab::metric::{conformally_flat, kahler_potential};
use chernlab::{ComplexGrid, Scheme};
use std::f64::consts::PI;

const LAM: f64 = 0.2;

/// g = e^{2u} with u = LAM sin(2 pi x): Ric = 2 pi^2 LAM sin(2 pi x).
fn surface(size: usize) -> (ComplexGrid, chernlab::MetricField) {
    let gr = ComplexGrid::new(1, size, Scheme::Spectral).unwrap();
    let g = conformally_flat(&gr, |x| LAM * (2.0 * PI * x[0]).sin());
    (gr, g)
}

/// Closed-form margin of the lower condition with u = 0, sampled densely.
fn dense_lower_margin(s: f64, beta: f64) -> f64 {
    (0..20_000)
        .map(|i| {
            let sn = (2.0 * PI * i as f64 / 20_000.0).sin();
            (1.0 - beta) * (2.0 * LAM * sn).exp() - s * 2.0 * PI * PI * LAM * sn
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn horizon_bisection_matches_dense_scan() {
    let (gr, g) = surface(64);
    let beta = 0.5;
    let est = estimate_sb_lower(&g, &[vec![0.0; gr.num_points()]], beta, 10.0).unwrap();
    assert!(!est.capped && est.best == Some(0));
    let mut root = 0.0;
    for i in 1..=100_000 {
        let s = 10.0 * i as f64 / 100_000.0;
        if dense_lower_margin(s, beta) < 0.0 {
            break;
        }
        root = s;
    }
    assert!((est.s - root).abs() < 1e-3, "{} vs {root}", est.s);
}

#[test]
fn upper_condition_matches_closed_form() {
    let (gr, g) = surface(64);
    let v = vec![0.0; gr.num_points()];
    for (s, beta) in [(0.05, 1.5), (0.2, 1.2), (0.1, 0.9)] {
        let cert = certify_a3(&g, s, &v, beta).unwrap();
        let mut expected = f64::INFINITY;
        for p in 0..gr.num_points() {
            let sn = (2.0 * PI * gr.coords(p)[0]).sin();
            let value = (1.0 - beta) * (2.0 * LAM * sn).exp() - s * 2.0 * PI * PI * LAM * sn;
            expected = expected.min(-value);
        }
        assert!((cert.measured_margin - expected).abs() < 1e-9);
    }
}

fn run(g0: &chernlab::MetricField, t_end: f64, fraction: f64) -> chernlab::flow::Trajectory {
    let opts = RunOptions {
        formulation: Formulation::Metric,
        integrator: Integrator::Rk4,
        t_end,
        snapshots: vec![0.25 * t_end, 0.5 * t_end, 0.75 * t_end],
        dt: DtPolicy::Auto { fraction },
    };
    integrate(g0, &opts).unwrap()
}

#[test]
fn psi_calibration_stable_across_resolutions() {
    let mut c1 = Vec::new();
    for size in [64, 128, 256] {
        let gr = ComplexGrid::new(1, size, Scheme::Spectral).unwrap();
        let g0 = kahler_potential(&gr, 0.3, 2).unwrap();
        let traj = run(&g0, 2e-4, 1.0);
        let bk = bk_extrema(&ChernPackage::compute(&g0).unwrap(), 1, 0).unwrap();
        let k = (-bk.min).max(0.0);
        let cert = certify_a2(&g0, 0.05, &vec![0.0; gr.num_points()], 0.5).unwrap();
        let report = monitor_psi_estimates(&traj, Some(&cert), k, bk.min);
        assert_eq!(report.verdict("psi_hard"), Some(Verdict::Pass));
        c1.push(report.constant("c1").unwrap());
    }
    let reference = c1[2];
    for c in &c1 {
        assert!((c - reference).abs() <= 0.2 * reference.abs() + 1e-12, "{c1:?}");
    }
}

#[test]
fn trace_calibration_stable_under_step_halving() {
    let gr = ComplexGrid::new(1, 32, Scheme::Spectral).unwrap();
    let g0 = kahler_potential(&gr, 0.3, 4).unwrap();
    let u = vec![0.0; gr.num_points()];
    let cert = certify_a2(&g0, 0.05, &u, 0.5).unwrap();
    assert!(cert.holds());
    let consts = TraceBoundConstants { s2: 0.02, k: 1.0, k1: 0.0, c1: None, c2: 1.0 };
    let calibrate = |fraction: f64| {
        let traj = run(&g0, 0.01, fraction);
        let r = monitor_trace_bound(&traj, Some(&cert), &consts).unwrap();
        assert_eq!(r.verdict("trace_bound"), Some(Verdict::Pass));
        r.constant("c1").unwrap()
    };
    let a = calibrate(1.0);
    let b = calibrate(0.5);
    assert!(a > 0.0 && (a - b).abs() <= 1e-3 * a, "{a} vs {b}");
}
