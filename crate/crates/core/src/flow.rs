//! Chern-Ricci flow `d/dt g = -Ric(g)` in metric form and in potential form
//! `d/dt psi = log det(g0 - t Ric0 + d dbar psi) - log det g0`, plus the
//! monitors evaluated along trajectories.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{ComplexGrid, DiffOp, Dir, C64};
use crate::herm::SmallMat;
use crate::metric::{trace_pair, MetricField};

/// Explicit time integrator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Integrator {
    Euler,
    Rk4,
}

impl Integrator {
    pub fn name(self) -> &'static str {
        match self {
            Integrator::Euler => "euler",
            Integrator::Rk4 => "rk4",
        }
    }

    pub fn stability_constant(self) -> f64 {
        match self {
            Integrator::Euler => 0.2,
            Integrator::Rk4 => 0.5,
        }
    }
}

impl FromStr for Integrator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Integrator::Euler),
            "rk4" => Ok(Integrator::Rk4),
            other => Err(Error::Invalid(format!("unknown integrator {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Formulation {
    Metric,
    Potential,
}

/// Monitor outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Inapplicable,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inapplicable => "INAPPLICABLE",
        })
    }
}

/// Data fixed at `t = 0` and shared by every state of a run.
#[derive(Debug)]
pub struct InitialData {
    pub g0: MetricField,
    /// Chern-Ricci form of `g0`.
    pub ric0: MetricField,
    pub log_det0: Vec<f64>,
}

/// `-Ric(g) = d dbar log det g`, the flow velocity.
pub fn flow_velocity(g: &MetricField) -> Result<MetricField> {
    MetricField::ddbar(&g.grid, &g.log_det()?)
}

/// Trapezoid error estimate and an independent Simpson quadrature of
/// `psidot`, both accumulated step by step.
#[derive(Clone, Debug)]
struct Quadrature {
    /// Up to three latest nodes of `psidot`, oldest first.
    nodes: Vec<Arc<Vec<f64>>>,
    /// Step sizes between those nodes.
    steps: Vec<f64>,
    count: usize,
    pairs: Vec<f64>,
    estimate: Vec<f64>,
    accel: Arc<Vec<f64>>,
}

impl Quadrature {
    fn new(psidot: Vec<f64>, accel: Vec<f64>) -> Self {
        let np = psidot.len();
        Quadrature {
            nodes: vec![Arc::new(psidot)],
            steps: Vec::new(),
            count: 0,
            pairs: vec![0.0; np],
            estimate: vec![0.0; np],
            accel: Arc::new(accel),
        }
    }

    fn push(&mut self, dt: f64, psidot: &[f64], accel: Vec<f64>) {
        for ((e, a1), a0) in self.estimate.iter_mut().zip(&accel).zip(self.accel.iter()) {
            *e -= dt * dt / 12.0 * (a1 - a0);
        }
        self.accel = Arc::new(accel);
        self.nodes.push(Arc::new(psidot.to_vec()));
        self.steps.push(dt);
        if self.nodes.len() > 3 {
            self.nodes.remove(0);
            self.steps.remove(0);
        }
        self.count += 1;
        if self.count % 2 == 0 {
            let (h1, h2) = (self.steps[0], self.steps[1]);
            let w = pair_weights(h1, h2);
            let (f0, f1, f2) = (&self.nodes[0], &self.nodes[1], &self.nodes[2]);
            for (p, s) in self.pairs.iter_mut().enumerate() {
                *s += w[0] * f0[p] + w[1] * f1[p] + w[2] * f2[p];
            }
        }
    }

    fn simpson(&self) -> Vec<f64> {
        if self.count % 2 == 0 {
            return self.pairs.clone();
        }
        let k = self.nodes.len();
        if k < 3 {
            // a single step: only the trapezoid is available
            let h = self.steps[0];
            return self.nodes[0]
                .iter()
                .zip(self.nodes[1].iter())
                .map(|(a, b)| 0.5 * h * (a + b))
                .collect();
        }
        let (h1, h2) = (self.steps[0], self.steps[1]);
        let w = last_interval_weights(h1, h2);
        let (f0, f1, f2) = (&self.nodes[0], &self.nodes[1], &self.nodes[2]);
        self.pairs
            .iter()
            .enumerate()
            .map(|(p, s)| s + w[0] * f0[p] + w[1] * f1[p] + w[2] * f2[p])
            .collect()
    }
}

/// Quadratic-interpolation weights over `[t0, t2]` for nodes spaced `h1, h2`.
fn pair_weights(h1: f64, h2: f64) -> [f64; 3] {
    let s = h1 + h2;
    [
        s * (2.0 * h1 - h2) / (6.0 * h1),
        s * s * s / (6.0 * h1 * h2),
        s * (2.0 * h2 - h1) / (6.0 * h2),
    ]
}

/// Quadratic-interpolation weights over the last interval `[t1, t2]`.
fn last_interval_weights(h1: f64, h2: f64) -> [f64; 3] {
    let s = h1 + h2;
    [
        -h2 * h2 * h2 / (6.0 * h1 * s),
        h2 * (3.0 * h1 + h2) / (6.0 * h1),
        h2 * (3.0 * h1 + 2.0 * h2) / (6.0 * s),
    ]
}

/// Outcome of comparing the per-step trapezoid `psi` with Simpson.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureCheck {
    /// `sup |psi_trapezoid - psi_simpson|`.
    pub difference: f64,
    /// Euler-Maclaurin estimate of the trapezoid error, sup over points.
    pub estimate: f64,
}

impl QuadratureCheck {
    pub fn consistent(&self) -> bool {
        self.difference <= 10.0 * self.estimate + 1e-12
    }
}

#[derive(Clone, Debug)]
pub struct FlowState {
    pub t: f64,
    pub g: MetricField,
    pub psi: Vec<f64>,
    pub psidot: Vec<f64>,
    /// `-Ric(g)` at the current time.
    pub velocity: MetricField,
    pub init: Arc<InitialData>,
    quad: Quadrature,
}

fn as_breakdown(t: f64) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::NonPositiveDet { point }
        | Error::NotPositive { point, .. }
        | Error::Singular { point } => Error::Breakdown { t, point },
        other => other,
    }
}

/// `tr_g A` per point.
fn traces(g: &MetricField, a: &MetricField) -> Result<Vec<f64>> {
    g.trace_of(a)
}

impl FlowState {
    pub fn new(g0: &MetricField) -> Result<Self> {
        g0.check_positive()?;
        let velocity = flow_velocity(g0)?;
        let init = InitialData {
            g0: g0.clone(),
            ric0: velocity.scaled(-1.0),
            log_det0: g0.log_det()?,
        };
        let np = g0.grid.num_points();
        let accel = traces(g0, &velocity)?;
        Ok(FlowState {
            t: 0.0,
            g: g0.clone(),
            psi: vec![0.0; np],
            psidot: vec![0.0; np],
            velocity,
            init: Arc::new(init),
            quad: Quadrature::new(vec![0.0; np], accel),
        })
    }

    pub fn grid(&self) -> &ComplexGrid {
        &self.g.grid
    }

    pub fn n(&self) -> usize {
        self.g.n()
    }

    /// Stability bound `c h^2 lambda_min / (n (1 + sup |Ric|))`.
    pub fn dt_max(&self, integrator: Integrator) -> f64 {
        let h = self.grid().spacing();
        let (lo, _) = self.g.eig_range();
        let ric = self
            .velocity
            .comps
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0f64, |m, z| m.max(z.norm()));
        integrator.stability_constant() * h * h * lo / (self.n() as f64 * (1.0 + ric))
    }

    /// `d/dt psidot = tr_g(-Ric(g))`, evaluated from the flow equation.
    pub fn psi_acceleration(&self) -> Result<Vec<f64>> {
        traces(&self.g, &self.velocity)
    }

    fn check_dt(&self, dt: f64, integrator: Integrator) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::Invalid(format!("time step {dt} must be positive")));
        }
        let dt_max = self.dt_max(integrator);
        if dt > dt_max {
            return Err(Error::StepTooLarge { dt, dt_max });
        }
        Ok(())
    }

    fn finish(&self, t: f64, g: MetricField, psi: Vec<f64>, psidot: Vec<f64>, dt: f64) -> Result<Self> {
        g.check_positive().map_err(as_breakdown(t))?;
        let velocity = flow_velocity(&g).map_err(as_breakdown(t))?;
        let accel = traces(&g, &velocity).map_err(as_breakdown(t))?;
        let mut quad = self.quad.clone();
        quad.push(dt, &psidot, accel);
        Ok(FlowState { t, g, psi, psidot, velocity, init: Arc::clone(&self.init), quad })
    }

    /// Advance the metric by one step; `psi` follows by the trapezoid rule.
    pub fn step_metric(&self, dt: f64, integrator: Integrator) -> Result<Self> {
        self.check_dt(dt, integrator)?;
        self.step_metric_unchecked(dt, integrator)
    }

    /// As [`FlowState::step_metric`] without the stability check.
    pub fn step_metric_unchecked(&self, dt: f64, integrator: Integrator) -> Result<Self> {
        let t = self.t;
        let g = match integrator {
            Integrator::Euler => self.g.add_scaled(&self.velocity, dt)?,
            Integrator::Rk4 => {
                let k1 = &self.velocity;
                let stage = |s: f64, k: &MetricField| -> Result<MetricField> {
                    flow_velocity(&self.g.add_scaled(k, s)?).map_err(as_breakdown(t))
                };
                let k2 = stage(0.5 * dt, k1)?;
                let k3 = stage(0.5 * dt, &k2)?;
                let k4 = stage(dt, &k3)?;
                combine(&self.g, dt, [k1, &k2, &k3, &k4])
            }
        };
        let t_new = t + dt;
        let log_det = g.log_det().map_err(as_breakdown(t_new))?;
        let psidot: Vec<f64> =
            log_det.iter().zip(&self.init.log_det0).map(|(a, b)| a - b).collect();
        let psi = self
            .psi
            .iter()
            .zip(self.psidot.iter().zip(&psidot))
            .map(|(p, (a, b))| p + 0.5 * dt * (a + b))
            .collect();
        self.finish(t_new, g, psi, psidot, dt)
    }

    /// `g0 - t Ric0 + d dbar psi`.
    pub fn reference_metric(&self, t: f64, psi: &[f64]) -> Result<MetricField> {
        let base = self.init.g0.add_scaled(&self.init.ric0, -t)?;
        base.add_scaled(&MetricField::ddbar(self.grid(), psi)?, 1.0)
    }

    fn potential_rate(&self, t: f64, psi: &[f64]) -> Result<(MetricField, Vec<f64>)> {
        let g = self.reference_metric(t, psi)?;
        g.check_positive().map_err(as_breakdown(t))?;
        let ld = g.log_det().map_err(as_breakdown(t))?;
        let rate = ld.iter().zip(&self.init.log_det0).map(|(a, b)| a - b).collect();
        Ok((g, rate))
    }

    /// Advance the potential by one step and rebuild the metric from it.
    pub fn step_potential(&self, dt: f64, integrator: Integrator) -> Result<Self> {
        self.check_dt(dt, integrator)?;
        self.step_potential_unchecked(dt, integrator)
    }

    pub fn step_potential_unchecked(&self, dt: f64, integrator: Integrator) -> Result<Self> {
        let t = self.t;
        let axpy = |k: &[f64], s: f64| -> Vec<f64> {
            self.psi.iter().zip(k).map(|(p, v)| p + s * v).collect()
        };
        let psi = match integrator {
            Integrator::Euler => axpy(&self.psidot, dt),
            Integrator::Rk4 => {
                let k1 = &self.psidot;
                let (_, k2) = self.potential_rate(t + 0.5 * dt, &axpy(k1, 0.5 * dt))?;
                let (_, k3) = self.potential_rate(t + 0.5 * dt, &axpy(&k2, 0.5 * dt))?;
                let (_, k4) = self.potential_rate(t + dt, &axpy(&k3, dt))?;
                (0..self.psi.len())
                    .map(|p| self.psi[p] + dt / 6.0 * (k1[p] + 2.0 * k2[p] + 2.0 * k3[p] + k4[p]))
                    .collect()
            }
        };
        let t_new = t + dt;
        let (g, psidot) = self.potential_rate(t_new, &psi)?;
        self.finish(t_new, g, psi, psidot, dt)
    }

    pub fn step(&self, formulation: Formulation, dt: f64, integrator: Integrator) -> Result<Self> {
        match formulation {
            Formulation::Metric => self.step_metric(dt, integrator),
            Formulation::Potential => self.step_potential(dt, integrator),
        }
    }

    /// Trapezoid `psi` against a Simpson recomputation of the same integral.
    pub fn quadrature_check(&self) -> QuadratureCheck {
        let simpson = self.quad.simpson();
        let difference = self.psi.iter().zip(&simpson).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let estimate = self.quad.estimate.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        QuadratureCheck { difference, estimate }
    }

    /// Sup-norm of `g - (g0 - t Ric0 + d dbar psi)`.
    pub fn consistency_residual(&self) -> Result<f64> {
        self.reference_metric(self.t, &self.psi)?.sup_diff(&self.g)
    }

    /// `t psidot - psi - n t` per point.
    pub fn psi_combination(&self) -> Vec<f64> {
        let (t, n) = (self.t, self.n() as f64);
        self.psi.iter().zip(&self.psidot).map(|(p, d)| t * d - p - n * t).collect()
    }
}

fn combine(g: &MetricField, dt: f64, k: [&MetricField; 4]) -> MetricField {
    let w = [dt / 6.0, dt / 3.0, dt / 3.0, dt / 6.0];
    let comps = (0..g.comps.len())
        .map(|c| {
            (0..g.comps[c].len())
                .map(|p| g.comps[c][p] + (0..4).map(|s| k[s].comps[c][p] * w[s]).sum::<C64>())
                .collect()
        })
        .collect();
    MetricField { grid: g.grid.clone(), comps }
}

/// `h^{i jbar} d_i d_jbar u` for the current metric `h`.
pub fn laplacian(h: &MetricField, u: &[f64]) -> Result<Vec<f64>> {
    h.trace_of(&MetricField::ddbar(&h.grid, u)?)
}

fn sup_abs(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Sup of `d/dt Psi - Delta Psi + tr_h h0` with `Psi = t psidot - psi - n t`.
pub fn evolution_residual_psi(state: &FlowState) -> Result<f64> {
    let (t, n) = (state.t, state.n() as f64);
    let big_psi = state.psi_combination();
    let lap = laplacian(&state.g, &big_psi)?;
    let accel = state.psi_acceleration()?;
    let tr_h0 = state.g.trace_of(&state.init.g0)?;
    Ok(sup_abs((0..lap.len()).map(|p| (t * accel[p] - n) - lap[p] + tr_h0[p])))
}

/// Sup of `d/dt Lambda - Delta Lambda + S1 tr_h Ric0 - tr_h h0` with
/// `Lambda = (S1 - t) psidot + psi + n t`.
pub fn evolution_residual_lambda(state: &FlowState, s1: f64) -> Result<f64> {
    let (t, n) = (state.t, state.n() as f64);
    let lambda: Vec<f64> = state
        .psi
        .iter()
        .zip(&state.psidot)
        .map(|(p, d)| (s1 - t) * d + p + n * t)
        .collect();
    let lap = laplacian(&state.g, &lambda)?;
    let accel = state.psi_acceleration()?;
    let inv = state.g.inverse_upper()?;
    let residual = (0..lap.len()).map(|p| {
        let tr_ric0 = trace_pair(&inv[p], &state.init.ric0.at(p));
        let tr_h0 = trace_pair(&inv[p], &state.init.g0.at(p));
        ((s1 - t) * accel[p] + n) - lap[p] - (-s1 * tr_ric0 + tr_h0)
    });
    Ok(sup_abs(residual))
}

/// `(tr_href h, tr_h href)` per point.
pub fn trace_fields(h: &MetricField, href: &MetricField) -> Result<(Vec<f64>, Vec<f64>)> {
    href.check_positive()?;
    Ok((href.trace_of(h)?, h.trace_of(href)?))
}

pub fn kahler_defect(state: &FlowState) -> Result<f64> {
    crate::chern::kahler_defect(&state.g)
}

/// Time-step policy for [`integrate`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DtPolicy {
    /// `fraction * dt_max`, shrunk so that snapshot times are hit exactly.
    Auto { fraction: f64 },
    /// A fixed step; `checked = false` skips the stability check.
    Fixed { dt: f64, checked: bool },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    pub formulation: Formulation,
    pub integrator: Integrator,
    pub t_end: f64,
    /// Output times in `[0, t_end]`; `0` and `t_end` are always added.
    pub snapshots: Vec<f64>,
    pub dt: DtPolicy,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub dt: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BreakdownInfo {
    pub t: f64,
    pub point: usize,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub snapshots: Vec<FlowState>,
    pub steps: Vec<StepRecord>,
    pub breakdown: Option<BreakdownInfo>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> &FlowState {
        self.snapshots.last().expect("a trajectory always holds the initial state")
    }
}

fn output_times(opts: &RunOptions) -> Result<Vec<f64>> {
    if !(opts.t_end > 0.0) {
        return Err(Error::Invalid("flow.t_end must be positive".into()));
    }
    let mut times = vec![opts.t_end];
    for &s in &opts.snapshots {
        if !(0.0..=opts.t_end).contains(&s) {
            return Err(Error::Invalid(format!("snapshot time {s} outside [0, t_end]")));
        }
        if s > 0.0 {
            times.push(s);
        }
    }
    times.sort_by(f64::total_cmp);
    times.dedup();
    Ok(times)
}

/// Integrate from `g0` to `t_end`. Loss of positivity ends the run with a
/// recorded breakdown; snapshots up to that point are kept, followed by the
/// last state reached before it.
pub fn integrate(g0: &MetricField, opts: &RunOptions) -> Result<Trajectory> {
    let times = output_times(opts)?;
    let mut state = FlowState::new(g0)?;
    let mut traj = Trajectory { snapshots: vec![state.clone()], steps: Vec::new(), breakdown: None };
    for &target in &times {
        while state.t < target {
            let remaining = target - state.t;
            let (dt, checked) = match opts.dt {
                DtPolicy::Auto { fraction } => {
                    let raw = fraction * state.dt_max(opts.integrator);
                    let m = (remaining / raw * (1.0 - 1e-12)).ceil().max(1.0);
                    (remaining / m, true)
                }
                DtPolicy::Fixed { dt, checked } => (dt.min(remaining), checked),
            };
            let next = match (opts.formulation, checked) {
                (Formulation::Metric, true) => state.step_metric(dt, opts.integrator),
                (Formulation::Metric, false) => state.step_metric_unchecked(dt, opts.integrator),
                (Formulation::Potential, true) => state.step_potential(dt, opts.integrator),
                (Formulation::Potential, false) => {
                    state.step_potential_unchecked(dt, opts.integrator)
                }
            };
            match next {
                Ok(mut s) => {
                    if target - s.t < 1e-12 * target {
                        s.t = target;
                    }
                    state = s;
                    traj.steps.push(StepRecord { t: state.t, dt });
                }
                Err(Error::Breakdown { t, point }) => {
                    traj.breakdown = Some(BreakdownInfo { t, point });
                    if state.t > traj.last().t {
                        traj.snapshots.push(state);
                    }
                    return Ok(traj);
                }
                Err(e) => return Err(e),
            }
        }
        traj.snapshots.push(state.clone());
    }
    Ok(traj)
}

/// Residuals comparing a metric-form run with a potential-form run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrossCheck {
    /// Sup over snapshots of `|g - (g0 - t Ric0 + d dbar psi)|` on the metric run.
    pub consistency: f64,
    /// Sup over snapshots of `|g_metric - g_potential|`.
    pub agreement: f64,
}

impl CrossCheck {
    pub fn max(&self) -> f64 {
        self.consistency.max(self.agreement)
    }
}

pub fn cross_check_formulations(metric: &Trajectory, potential: &Trajectory) -> Result<CrossCheck> {
    if metric.snapshots.len() != potential.snapshots.len() {
        return Err(Error::Invalid("trajectories have different snapshot counts".into()));
    }
    let mut out = CrossCheck { consistency: 0.0, agreement: 0.0 };
    for (a, b) in metric.snapshots.iter().zip(&potential.snapshots) {
        if a.grid() != b.grid() {
            return Err(Error::GridMismatch);
        }
        if (a.t - b.t).abs() > 1e-12 * (1.0 + a.t.abs()) {
            return Err(Error::Invalid(format!("snapshot times differ: {} vs {}", a.t, b.t)));
        }
        out.consistency = out.consistency.max(a.consistency_residual()?);
        out.agreement = out.agreement.max(a.g.sup_diff(&b.g)?);
    }
    Ok(out)
}

/// Samples of a scalar `f` and of `(d/dt - Delta) f` at increasing times.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarTrajectory {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub heat_defect: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaxPrincipleReport {
    pub verdict: Verdict,
    /// Sup of `f` over all samples.
    pub sup: f64,
    /// `(t, point)` of the first sample with `f > tol`.
    pub first_violation: Option<(f64, usize)>,
}

/// Check `f <= 0` along a trajectory, after checking the premises
/// `f(., 0) <= tol` and `(d/dt - Delta) f <= tol` wherever `f > 0`.
pub fn max_principle_monitor(traj: &ScalarTrajectory, tol: f64) -> MaxPrincipleReport {
    let sup = traj.values.iter().flatten().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let initial_ok = traj.values.first().is_some_and(|f| f.iter().all(|&v| v <= tol));
    let operator_ok = traj
        .values
        .iter()
        .zip(&traj.heat_defect)
        .all(|(f, d)| f.iter().zip(d).all(|(&v, &dv)| v <= 0.0 || dv <= tol));
    if !initial_ok || !operator_ok {
        return MaxPrincipleReport { verdict: Verdict::Inapplicable, sup, first_violation: None };
    }
    let first_violation = traj.times.iter().zip(&traj.values).find_map(|(&t, f)| {
        f.iter().position(|&v| v > tol).map(|p| (t, p))
    });
    let verdict = if first_violation.is_some() { Verdict::Fail } else { Verdict::Pass };
    MaxPrincipleReport { verdict, sup, first_violation }
}

/// Exact heat flow `d/dt f = Delta f` for a constant metric `h`, evaluated
/// spectrally at each time, together with the two-sided defect
/// `(d/dt - Delta) f` where `Delta` uses the grid's own scheme.
pub fn constant_metric_heat(
    grid: &ComplexGrid,
    h: &SmallMat,
    f0: &[f64],
    times: &[f64],
) -> Result<ScalarTrajectory> {
    let n = grid.n();
    let inv = h
        .transpose()
        .inverse()
        .ok_or(Error::Singular { point: 0 })?;
    let symbol = |k: &[f64]| -> C64 {
        let holo = |i: usize| C64::new(std::f64::consts::PI * k[2 * i + 1], std::f64::consts::PI * k[2 * i]);
        let anti = |i: usize| C64::new(-std::f64::consts::PI * k[2 * i + 1], std::f64::consts::PI * k[2 * i]);
        let mut s = C64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                s += inv.a[i][j] * holo(i) * anti(j);
            }
        }
        s
    };
    let data: Vec<C64> = f0.iter().map(|&v| C64::new(v, 0.0)).collect();
    let ops: Vec<DiffOp> =
        (0..n * n).map(|c| DiffOp::DD(Dir::Holo(c / n), Dir::Anti(c % n))).collect();
    let mut out = ScalarTrajectory { times: times.to_vec(), values: Vec::new(), heat_defect: Vec::new() };
    for &t in times {
        let f = grid.fourier_multiplier(&data, |k| (symbol(k) * t).exp());
        let dfdt = grid.fourier_multiplier(&data, |k| symbol(k) * (symbol(k) * t).exp());
        let dd = grid.apply(&f, &ops)?;
        let defect = (0..f.len())
            .map(|p| {
                let mut lap = C64::new(0.0, 0.0);
                for c in 0..n * n {
                    lap += inv.a[c / n][c % n] * dd[c][p];
                }
                (dfdt[p] - lap).re
            })
            .collect();
        out.values.push(f.iter().map(|z| z.re).collect());
        out.heat_defect.push(defect);
    }
    Ok(out)
}
