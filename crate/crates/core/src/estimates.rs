//! Certificates for the deformation conditions on the initial metric, a
//! lower estimate of the certified horizon, and estimate monitors evaluated
//! along flow trajectories.

use crate::chern::{Frame, Slot};
use crate::error::{Error, Result};
use crate::flow::{Trajectory, Verdict};
use crate::grid::{DiffOp, Dir, C64};
use crate::herm::SmallMat;
use crate::metric::MetricField;

/// Slack allowed on certificate margins.
pub const CERT_TOL: f64 = 1e-12;

/// Tolerance of the hard inequality `t psidot - psi - n t <= 0`.
pub const HARD_TOL: f64 = 1e-6;

const BISECTION_STEPS: usize = 30;
const S_FLOOR: f64 = 1e-6;

/// Gradient and complex Hessian bounds of an exhaustion candidate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct A1Report {
    /// `sup |d rho|_g`.
    pub grad_sup: f64,
    /// `sup |d dbar rho|_g`.
    pub hess_sup: f64,
    /// Equivalence to a distance function is automatic on a compact chart.
    pub compact_chart: bool,
}

pub fn certify_a1(rho: &[f64], g: &MetricField) -> Result<A1Report> {
    let grid = &g.grid;
    let n = grid.n();
    let data: Vec<C64> = rho.iter().map(|&v| C64::new(v, 0.0)).collect();
    let mut ops: Vec<DiffOp> = (0..n).map(|i| DiffOp::D(Dir::Holo(i))).collect();
    ops.extend((0..n * n).map(|c| DiffOp::DD(Dir::Holo(c / n), Dir::Anti(c % n))));
    let d = grid.apply(&data, &ops)?;
    let mut out = A1Report { grad_sup: 0.0, hess_sup: 0.0, compact_chart: true };
    for p in 0..grid.num_points() {
        let frame = Frame::of(&g.at(p), p)?;
        let grad: Vec<C64> = (0..n).map(|i| d[i][p]).collect();
        let hess: Vec<C64> = (0..n * n).map(|c| d[n + c][p]).collect();
        out.grad_sup = out.grad_sup.max(frame.norm_sq(&grad, &[Slot::Lower]));
        out.hess_sup = out.hess_sup.max(frame.norm_sq(&hess, &[Slot::Lower, Slot::LowerBar]));
    }
    out.grad_sup = out.grad_sup.sqrt();
    out.hess_sup = out.hess_sup.sqrt();
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CertKind {
    /// `g0 - S Ric0 + d dbar u >= beta g0`.
    A2,
    /// `g0 - S Ric0 + d dbar v <= beta g0`.
    A3,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub kind: CertKind,
    pub s: f64,
    pub beta: f64,
    /// The bounded potential `u` (or `v`).
    pub potential: Vec<f64>,
    /// Smallest eigenvalue slack over the grid; non-negative when the
    /// inequality holds exactly.
    pub measured_margin: f64,
}

impl Certificate {
    pub fn holds(&self) -> bool {
        self.measured_margin >= -CERT_TOL
    }
}

/// Per-point data of `g0 + d dbar u`, `Ric0` and `g0`, reused across `S`.
#[derive(Clone, Debug)]
pub struct Deformation {
    base: Vec<SmallMat>,
    ric: Vec<SmallMat>,
    g0: Vec<SmallMat>,
    potential: Vec<f64>,
}

impl Deformation {
    pub fn new(g: &MetricField, u: &[f64]) -> Result<Self> {
        let grid = &g.grid;
        if u.len() != grid.num_points() {
            return Err(Error::Invalid("potential length does not match the grid".into()));
        }
        let ric = MetricField::ddbar(grid, &g.log_det()?)?.scaled(-1.0);
        let base = g.add_scaled(&MetricField::ddbar(grid, u)?, 1.0)?;
        Ok(Deformation { base: base.mats(), ric: ric.mats(), g0: g.mats(), potential: u.to_vec() })
    }

    fn matrix(&self, p: usize, s: f64, beta: f64) -> SmallMat {
        self.base[p] - self.ric[p].scale(s) - self.g0[p].scale(beta)
    }

    /// Min over points of the smallest eigenvalue of `g0 - S Ric0 + d dbar u - beta g0`.
    pub fn lower_margin(&self, s: f64, beta: f64) -> f64 {
        (0..self.base.len()).map(|p| self.matrix(p, s, beta).herm_eigs().0).fold(f64::INFINITY, f64::min)
    }

    /// Min over points of `-(largest eigenvalue)` of the same matrix.
    pub fn upper_margin(&self, s: f64, beta: f64) -> f64 {
        (0..self.base.len()).map(|p| -self.matrix(p, s, beta).herm_eigs().1).fold(f64::INFINITY, f64::min)
    }

    pub fn certificate(&self, kind: CertKind, s: f64, beta: f64) -> Certificate {
        let measured_margin = match kind {
            CertKind::A2 => self.lower_margin(s, beta),
            CertKind::A3 => self.upper_margin(s, beta),
        };
        Certificate { kind, s, beta, potential: self.potential.clone(), measured_margin }
    }
}

fn check_positive_params(s: f64, beta: f64) -> Result<()> {
    if !(s > 0.0 && beta > 0.0) {
        return Err(Error::Invalid(format!("S = {s} and beta = {beta} must be positive")));
    }
    Ok(())
}

pub fn certify_a2(g: &MetricField, s: f64, u: &[f64], beta: f64) -> Result<Certificate> {
    check_positive_params(s, beta)?;
    Ok(Deformation::new(g, u)?.certificate(CertKind::A2, s, beta))
}

pub fn certify_a3(g: &MetricField, s: f64, v: &[f64], beta: f64) -> Result<Certificate> {
    check_positive_params(s, beta)?;
    Ok(Deformation::new(g, v)?.certificate(CertKind::A3, s, beta))
}

/// Result of [`estimate_sb_lower`].
#[derive(Clone, Debug, PartialEq)]
pub struct SbEstimate {
    /// Largest certified `S`; zero when nothing certifies.
    pub s: f64,
    /// `s` hit the configured cap.
    pub capped: bool,
    /// Index of the potential achieving `s`.
    pub best: Option<usize>,
    pub diagnostic: Option<String>,
}

/// Largest `S` certifying the lower condition, by bisection per potential.
pub fn estimate_sb_lower(
    g: &MetricField,
    family: &[Vec<f64>],
    beta: f64,
    s_max: f64,
) -> Result<SbEstimate> {
    if family.is_empty() {
        return Err(Error::Invalid("potential family is empty".into()));
    }
    if !(s_max > S_FLOOR) {
        return Err(Error::Invalid(format!("S cap {s_max} must exceed {S_FLOOR}")));
    }
    let mut best = SbEstimate { s: 0.0, capped: false, best: None, diagnostic: None };
    for (idx, u) in family.iter().enumerate() {
        let d = Deformation::new(g, u)?;
        let ok = |s: f64| d.lower_margin(s, beta) >= -CERT_TOL;
        let (s, capped) = if ok(s_max) {
            (s_max, true)
        } else if !ok(S_FLOOR) {
            (0.0, false)
        } else {
            let (mut lo, mut hi) = (S_FLOOR, s_max);
            for _ in 0..BISECTION_STEPS {
                let mid = 0.5 * (lo + hi);
                if ok(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            (lo, false)
        };
        if s > best.s {
            best = SbEstimate { s, capped, best: Some(idx), diagnostic: None };
        }
    }
    if best.best.is_none() {
        best.diagnostic = Some(format!("no potential certifies S = {S_FLOOR:e}"));
    }
    Ok(best)
}

/// One monitored quantity at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct MonitorRecord {
    pub monitor: String,
    pub t: f64,
    pub measured: f64,
    pub bound: f64,
    pub margin: f64,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MonitorReport {
    pub records: Vec<MonitorRecord>,
    /// Named calibration constants.
    pub calibration: Vec<(String, f64)>,
}

impl MonitorReport {
    /// Worst verdict over the records of one monitor.
    pub fn verdict(&self, monitor: &str) -> Option<Verdict> {
        let mut out = None;
        for r in self.records.iter().filter(|r| r.monitor == monitor) {
            out = Some(match (out, r.verdict) {
                (_, Verdict::Fail) | (Some(Verdict::Fail), _) => Verdict::Fail,
                (_, Verdict::Inapplicable) | (Some(Verdict::Inapplicable), _) => Verdict::Inapplicable,
                _ => Verdict::Pass,
            });
        }
        out
    }

    pub fn constant(&self, name: &str) -> Option<f64> {
        self.calibration.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    fn push(&mut self, monitor: &str, t: f64, measured: f64, bound: f64, margin: f64, verdict: Verdict) {
        self.records.push(MonitorRecord { monitor: monitor.into(), t, measured, bound, margin, verdict });
    }

    fn inapplicable(&mut self, monitor: &str, traj: &Trajectory) {
        for s in &traj.snapshots {
            self.push(monitor, s.t, f64::NAN, f64::NAN, f64::NAN, Verdict::Inapplicable);
        }
    }
}

fn extrema(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

fn soft_verdict(margin: f64) -> Verdict {
    if margin >= -CERT_TOL {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

/// Monitors for the potential estimates with a bisectional curvature lower
/// bound `-k` (`k >= 0`). The hard inequality `t psidot - psi - n t <= 0` is
/// asserted; the upper bound `psi <= (n log(1 + c1 k S1) + 1) t` and, when
/// an (a2) certificate with `S > S1` is given, the lower bound on `psidot`
/// are checked with `c1` calibrated as the smallest value that works over
/// the run. `S1` is the final time of the trajectory.
pub fn monitor_psi_estimates(
    traj: &Trajectory,
    cert: Option<&Certificate>,
    k: f64,
    bk_min: f64,
) -> MonitorReport {
    let mut report = MonitorReport::default();
    if !(k >= 0.0) || bk_min < -k {
        for name in ["psi_hard", "psi_upper", "psidot_lower"] {
            report.inapplicable(name, traj);
        }
        return report;
    }
    let n = traj.last().n() as f64;
    let s1 = traj.last().t;
    for s in &traj.snapshots {
        let (_, m) = extrema(&s.psi_combination());
        let verdict = if m <= HARD_TOL { Verdict::Pass } else { Verdict::Fail };
        report.push("psi_hard", s.t, m, 0.0, -m, verdict);
    }

    let lower = cert.filter(|c| c.kind == CertKind::A2 && c.holds() && c.s > s1);
    let u_spread = lower.map(|c| {
        let (lo, hi) = extrema(&c.potential);
        lo - hi
    });
    // smallest L = n log(1 + c1 k S1) making both bounds hold
    let mut need: f64 = 0.0;
    for s in traj.snapshots.iter().filter(|s| s.t > 0.0) {
        let (_, psi_max) = extrema(&s.psi);
        need = need.max(psi_max / s.t - 1.0);
        if let (Some(c), Some(spread)) = (lower, u_spread) {
            let (pd_min, _) = extrema(&s.psidot);
            need = need.max((spread - (c.s - s1) * pd_min) / s.t - 1.0 - n);
        }
    }
    let c1 = if need <= 0.0 {
        0.0
    } else if k > 0.0 && s1 > 0.0 {
        ((need / n).exp() - 1.0) / (k * s1)
    } else {
        f64::INFINITY
    };
    let big_l = if c1 == 0.0 || !c1.is_finite() { 0.0 } else { n * (1.0 + c1 * k * s1).ln() };
    report.calibration.push(("c1".into(), c1));
    for s in &traj.snapshots {
        let (_, psi_max) = extrema(&s.psi);
        let bound = (big_l + 1.0) * s.t;
        report.push("psi_upper", s.t, psi_max, bound, bound - psi_max, soft_verdict(bound - psi_max));
    }
    match (lower, u_spread) {
        (Some(c), Some(spread)) => {
            for s in &traj.snapshots {
                let (pd_min, _) = extrema(&s.psidot);
                let bound = (spread - (big_l + 1.0 + n) * s.t) / (c.s - s1);
                report.push("psidot_lower", s.t, pd_min, bound, pd_min - bound, soft_verdict(pd_min - bound));
            }
        }
        _ => report.inapplicable("psidot_lower", traj),
    }
    report
}

/// Constants of the trace bound. `c1 = None` selects calibration mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceBoundConstants {
    pub s2: f64,
    /// Bisectional curvature lower bound constant of `h0`.
    pub k: f64,
    /// Bound for `|T0|^2` and `|dbar T0|` of `h0`.
    pub k1: f64,
    pub c1: Option<f64>,
    pub c2: f64,
}

/// `exp[A + log((c1 + sqrt(c1^2 + c2 k1^2 A)) / 2)]` with
/// `A = (2m + 1)^2 (c1 (k + k1) + 1) / alpha`.
pub fn trace_bound(c1: f64, c2: f64, k: f64, k1: f64, alpha: f64, m: f64) -> f64 {
    let a = (2.0 * m + 1.0).powi(2) * (c1 * (k + k1) + 1.0) / alpha;
    a.exp() * 0.5 * (c1 + (c1 * c1 + c2 * k1 * k1 * a).sqrt())
}

/// `sup |(S2 - t) psidot + psi + n t - (S2 / S) u|` over the snapshots.
pub fn trace_bound_m(traj: &Trajectory, s2: f64, s: f64, u: &[f64]) -> f64 {
    let n = traj.last().n() as f64;
    let mut m: f64 = 0.0;
    for st in &traj.snapshots {
        for p in 0..st.psi.len() {
            let v = (s2 - st.t) * st.psidot[p] + st.psi[p] + n * st.t - s2 / s * u[p];
            m = m.max(v.abs());
        }
    }
    m
}

/// Compare `sup tr_h0 h` along the run with the trace bound. Requires an
/// (a2) certificate with `S1 <= S2 < S`.
pub fn monitor_trace_bound(
    traj: &Trajectory,
    cert: Option<&Certificate>,
    consts: &TraceBoundConstants,
) -> Result<MonitorReport> {
    const NAME: &str = "trace_bound";
    let mut report = MonitorReport::default();
    let s1 = traj.last().t;
    let cert = match cert {
        Some(c) if c.kind == CertKind::A2 && c.holds() && s1 <= consts.s2 && consts.s2 < c.s => c,
        _ => {
            report.inapplicable(NAME, traj);
            return Ok(report);
        }
    };
    let alpha = 1.0 - consts.s2 / cert.s;
    let m = trace_bound_m(traj, consts.s2, cert.s, &cert.potential);
    let h0 = &traj.snapshots[0].g;
    let ups: Vec<f64> = traj
        .snapshots
        .iter()
        .map(|s| Ok(extrema(&h0.trace_of(&s.g)?).1))
        .collect::<Result<_>>()?;
    let worst = ups.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let bound_at = |c1: f64| trace_bound(c1, consts.c2, consts.k, consts.k1, alpha, m);
    let c1 = match consts.c1 {
        Some(c) => c,
        None if bound_at(0.0) >= worst => 0.0,
        None => {
            let mut hi = 1.0;
            while bound_at(hi) < worst {
                hi *= 2.0;
            }
            let mut lo = 0.0;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if bound_at(mid) >= worst {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            hi
        }
    };
    let bound = bound_at(c1);
    for (s, &u) in traj.snapshots.iter().zip(&ups) {
        report.push(NAME, s.t, u, bound, bound - u, soft_verdict(bound - u));
    }
    report.calibration = vec![
        ("c1".into(), c1),
        ("c2".into(), consts.c2),
        ("m".into(), m),
        ("alpha".into(), alpha),
    ];
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{integrate, DtPolicy, Formulation, Integrator, RunOptions};
    use crate::grid::{ComplexGrid, Scheme};
    use crate::metric::{conformally_flat, random_metric};
    use std::f64::consts::PI;

    fn grid(n: usize, size: usize) -> ComplexGrid {
        ComplexGrid::new(n, size, Scheme::Spectral).unwrap()
    }

    fn flat_run(n: usize, t_end: f64) -> Trajectory {
        let g = MetricField::flat(&grid(n, 8));
        let opts = RunOptions {
            formulation: Formulation::Metric,
            integrator: Integrator::Rk4,
            t_end,
            snapshots: vec![0.5 * t_end],
            dt: DtPolicy::Auto { fraction: 1.0 },
        };
        integrate(&g, &opts).unwrap()
    }

    #[test]
    fn a1_constant_and_oracle() {
        let gr = grid(1, 32);
        let g = MetricField::flat(&gr);
        let r = certify_a1(&vec![1.0; gr.num_points()], &g).unwrap();
        assert_eq!((r.grad_sup, r.hess_sup), (0.0, 0.0));
        // rho = 1 + sin^2(pi x): |rho_z| = (pi/2)|sin 2 pi x|, rho_{z zbar} = (pi^2/2) cos 2 pi x
        let rho: Vec<f64> =
            (0..gr.num_points()).map(|p| 1.0 + (PI * gr.coords(p)[0]).sin().powi(2)).collect();
        let r = certify_a1(&rho, &g).unwrap();
        assert!((r.grad_sup - PI / 2.0).abs() < 1e-12);
        assert!((r.hess_sup - PI * PI / 2.0).abs() < 1e-11);
        let r4 = certify_a1(&rho, &g.scaled(4.0)).unwrap();
        assert!((r4.grad_sup - r.grad_sup / 2.0).abs() < 1e-12);
    }

    #[test]
    fn flat_certificates() {
        let g = MetricField::flat(&grid(2, 8));
        let u = vec![0.0; g.grid.num_points()];
        let c = certify_a2(&g, 3.0, &u, 1.0).unwrap();
        assert!(c.holds() && c.measured_margin.abs() < 1e-15);
        let c = certify_a2(&g, 3.0, &u, 0.5).unwrap();
        assert!((c.measured_margin - 0.5).abs() < 1e-15);
        let c = certify_a3(&g, 3.0, &u, 1.0).unwrap();
        assert!(c.holds() && c.measured_margin.abs() < 1e-15);
        let c = certify_a3(&g, 3.0, &u, 2.0).unwrap();
        assert!((c.measured_margin - 1.0).abs() < 1e-15);
        assert!(certify_a2(&g, 0.0, &u, 1.0).is_err());
    }

    #[test]
    fn flat_horizon_is_capped() {
        let g = MetricField::flat(&grid(1, 8));
        let e = estimate_sb_lower(&g, &[vec![0.0; 64]], 0.5, 10.0).unwrap();
        assert_eq!((e.s, e.capped), (10.0, true));
    }

    #[test]
    fn joint_scaling_preserves_status() {
        let gr = grid(1, 32);
        let g = conformally_flat(&gr, |x| 0.2 * (2.0 * PI * x[0]).sin());
        let u: Vec<f64> = (0..gr.num_points()).map(|p| 0.01 * (2.0 * PI * gr.coords(p)[1]).cos()).collect();
        for s in [0.01, 0.05, 0.2] {
            let a = certify_a2(&g, s, &u, 0.5).unwrap();
            let lam = 3.0;
            let us: Vec<f64> = u.iter().map(|v| lam * v).collect();
            let b = certify_a2(&g.scaled(lam), lam * s, &us, 0.5).unwrap();
            assert_eq!(a.holds(), b.holds());
            assert!((b.measured_margin - lam * a.measured_margin).abs() < 1e-10);
        }
    }

    #[test]
    fn larger_family_never_decreases_horizon() {
        let gr = grid(1, 32);
        let g = conformally_flat(&gr, |x| 0.2 * (2.0 * PI * x[0]).sin());
        let zero = vec![0.0; gr.num_points()];
        let other: Vec<f64> =
            (0..gr.num_points()).map(|p| -0.005 * (2.0 * PI * gr.coords(p)[0]).sin()).collect();
        let a = estimate_sb_lower(&g, &[zero.clone()], 0.5, 10.0).unwrap();
        let b = estimate_sb_lower(&g, &[zero, other], 0.5, 10.0).unwrap();
        assert!(a.s > 0.0 && b.s >= a.s);
    }

    #[test]
    fn flat_psi_monitors() {
        let traj = flat_run(2, 0.01);
        let u = vec![0.0; traj.last().psi.len()];
        let cert = certify_a2(&traj.snapshots[0].g, 1.0, &u, 0.5).unwrap();
        let r = monitor_psi_estimates(&traj, Some(&cert), 0.0, 0.0);
        for rec in r.records.iter().filter(|r| r.monitor == "psi_hard") {
            assert!((rec.margin - 2.0 * rec.t).abs() < 1e-15);
        }
        assert_eq!(r.verdict("psi_hard"), Some(Verdict::Pass));
        assert_eq!(r.verdict("psi_upper"), Some(Verdict::Pass));
        assert_eq!(r.verdict("psidot_lower"), Some(Verdict::Pass));
        assert_eq!(r.constant("c1"), Some(0.0));
        let r = monitor_psi_estimates(&traj, None, 1.0, -2.0);
        assert_eq!(r.verdict("psi_hard"), Some(Verdict::Inapplicable));
    }

    #[test]
    fn flat_trace_bound_calibration() {
        let t_end = 0.01;
        let traj = flat_run(1, t_end);
        let u = vec![0.0; traj.last().psi.len()];
        let cert = certify_a2(&traj.snapshots[0].g, 1.0, &u, 0.5).unwrap();
        let consts = TraceBoundConstants { s2: 0.5, k: 0.0, k1: 0.0, c1: None, c2: 1.0 };
        let r = monitor_trace_bound(&traj, Some(&cert), &consts).unwrap();
        // m = sup |n t| = n S1, and with k = k1 = 0 the bound is c1 e^A
        let m = t_end;
        assert!((r.constant("m").unwrap() - m).abs() < 1e-15);
        let a = (2.0 * m + 1.0).powi(2) / 0.5;
        let expect = (-a as f64).exp();
        assert!((r.constant("c1").unwrap() - expect).abs() < 1e-12 * expect.max(1.0));
        assert_eq!(r.verdict("trace_bound"), Some(Verdict::Pass));
        let bad = TraceBoundConstants { s2: 2.0, ..consts };
        let r = monitor_trace_bound(&traj, Some(&cert), &bad).unwrap();
        assert_eq!(r.verdict("trace_bound"), Some(Verdict::Inapplicable));
    }

    #[test]
    fn random_metric_certificate_margin_concave() {
        // margin(S) is a min of affine functions, hence concave
        let gr = grid(2, 8);
        let g = random_metric(&gr, 0.3, 9);
        let d = Deformation::new(&g, &vec![0.0; gr.num_points()]).unwrap();
        let ss: Vec<f64> = (0..20).map(|i| 0.01 * i as f64).collect();
        let m: Vec<f64> = ss.iter().map(|&s| d.lower_margin(s, 0.5)).collect();
        for w in m.windows(3) {
            assert!(w[1] >= 0.5 * (w[0] + w[2]) - 1e-12);
        }
    }
}
