//! Cutoff profile and conformal completion of a chart.
//!
//! With `w = (s - 1 + kappa) / kappa` the profile is built from
//! `f(s) = -log(1 - w^2)` on `(1 - kappa, 1)` (zero before), a quintic
//! smoothstep `phi` rising on `[1 - kappa + kappa^2, 1 - kappa + 2 kappa^2]`,
//! and the primitive `F(s) = int_0^s phi f'`. On the transition interval the
//! primitive comes from a cumulative Simpson table; past it, `phi = 1` and
//! `F(s) = F(b) + f(s) - f(b)` in closed form.
//!
//! The completion replaces `g` by `h0 = e^{2F} g` with `F = F(rho / rho0)` and
//! evaluates torsion, its `dbar` derivative and curvature of `h0` pointwise
//! through the conformal change laws, using the chain rule for the
//! derivatives of `F`, so the steep layer near `rho = rho0` is never
//! differentiated on the grid.

use crate::bk::frame_extrema;
use crate::chern::{ChernPackage, Frame, Slot};
use crate::error::{Error, Result};
use crate::grid::{ComplexGrid, DiffOp, Dir, C64};
use crate::metric::MetricField;
use crate::rng::SeedStream;

pub const MIN_NODES: usize = 10_000;
/// Number of `s` samples in the tau sweep.
pub const TAU_SAMPLES: usize = 200;
/// Target for `(ratio - 1) / kappa` when choosing tau.
const TAU_RATIO_TARGET: f64 = 2.0;
const TAU_CANDIDATES: usize = 8;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Quintic smoothstep and its first two derivatives on `[0, 1]`.
fn smoothstep(t: f64) -> [f64; 3] {
    if t <= 0.0 {
        [0.0; 3]
    } else if t >= 1.0 {
        [1.0, 0.0, 0.0]
    } else {
        let u = 1.0 - t;
        [
            t * t * t * (10.0 - 15.0 * t + 6.0 * t * t),
            30.0 * t * t * u * u,
            60.0 * t * u * (1.0 - 2.0 * t),
        ]
    }
}

/// Profile values at one `s`: `f`, `phi` and `F` with three derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileValues {
    pub f: f64,
    pub phi: f64,
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl ProfileValues {
    pub fn derivative(&self, k: usize) -> f64 {
        match k {
            0 => self.value,
            1 => self.d1,
            2 => self.d2,
            3 => self.d3,
            _ => panic!("profile derivatives are tabulated up to order 3"),
        }
    }
}

/// Tabulated cutoff profile on the nodes `s_i = i / nodes`, `i < nodes`.
#[derive(Clone, Debug, PartialEq)]
pub struct CutoffProfile {
    pub kappa: f64,
    pub nodes: usize,
    /// Simpson panels on the transition interval.
    pub panels: usize,
    pub s: Vec<f64>,
    pub f: Vec<f64>,
    pub phi: Vec<f64>,
    pub value: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub d3: Vec<f64>,
    /// Largest `phi'` seen on the quadrature and tabulation nodes.
    pub max_dphi: f64,
    cumulative: Vec<f64>,
}

pub fn build_profile(kappa: f64, nodes: usize) -> Result<CutoffProfile> {
    if !(kappa > 0.0 && kappa < 0.125) {
        return Err(Error::KappaOutOfRange(kappa));
    }
    if nodes < MIN_NODES {
        return Err(Error::TooFewNodes { min: MIN_NODES, got: nodes });
    }
    let mut profile = CutoffProfile {
        kappa,
        nodes,
        panels: nodes,
        s: Vec::with_capacity(nodes),
        f: Vec::with_capacity(nodes),
        phi: Vec::with_capacity(nodes),
        value: Vec::with_capacity(nodes),
        d1: Vec::with_capacity(nodes),
        d2: Vec::with_capacity(nodes),
        d3: Vec::with_capacity(nodes),
        max_dphi: 0.0,
        cumulative: Vec::with_capacity(nodes + 1),
    };
    let (a, b) = profile.transition();
    let width = (b - a) / nodes as f64;
    let mut acc = 0.0;
    profile.cumulative.push(0.0);
    for j in 0..nodes {
        let x0 = a + j as f64 * width;
        acc += profile.simpson(x0, x0 + width);
        profile.cumulative.push(acc);
        profile.max_dphi = profile.max_dphi.max(profile.phi_at(x0)[1]);
    }
    for i in 0..nodes {
        let s = i as f64 / nodes as f64;
        let v = profile.eval(s);
        profile.max_dphi = profile.max_dphi.max(profile.phi_at(s)[1]);
        profile.s.push(s);
        profile.f.push(v.f);
        profile.phi.push(v.phi);
        profile.value.push(v.value);
        profile.d1.push(v.d1);
        profile.d2.push(v.d2);
        profile.d3.push(v.d3);
    }
    let bound = 2.0 / (kappa * kappa);
    if profile.max_dphi > bound {
        return Err(Error::MollifierBound { max_dphi: profile.max_dphi, bound });
    }
    Ok(profile)
}

impl CutoffProfile {
    /// Interval `[a, b]` on which `phi` rises from 0 to 1.
    pub fn transition(&self) -> (f64, f64) {
        let k = self.kappa;
        (1.0 - k + k * k, 1.0 - k + 2.0 * k * k)
    }

    fn phi_at(&self, s: f64) -> [f64; 3] {
        let (a, _) = self.transition();
        let k2 = self.kappa * self.kappa;
        let [p, p1, p2] = smoothstep((s - a) / k2);
        [p, p1 / k2, p2 / (k2 * k2)]
    }

    /// `f` and its first three derivatives; infinite at and beyond `s = 1`.
    fn f_at(&self, s: f64) -> [f64; 4] {
        let k = self.kappa;
        if s <= 1.0 - k {
            return [0.0; 4];
        }
        if s >= 1.0 {
            return [f64::INFINITY; 4];
        }
        let w = (s - 1.0 + k) / k;
        let q = 1.0 - w * w;
        [
            -q.ln(),
            2.0 * w / (k * q),
            2.0 * (1.0 + w * w) / (k * k * q * q),
            4.0 * w * (3.0 + w * w) / (k * k * k * q * q * q),
        ]
    }

    fn integrand(&self, s: f64) -> f64 {
        self.phi_at(s)[0] * self.f_at(s)[1]
    }

    fn simpson(&self, x0: f64, x1: f64) -> f64 {
        let m = 0.5 * (x0 + x1);
        (x1 - x0) / 6.0 * (self.integrand(x0) + 4.0 * self.integrand(m) + self.integrand(x1))
    }

    fn primitive(&self, s: f64) -> f64 {
        let (a, b) = self.transition();
        if s <= a {
            return 0.0;
        }
        let width = (b - a) / self.panels as f64;
        if s < b {
            let j = (((s - a) / width) as usize).min(self.panels - 1);
            let x0 = a + j as f64 * width;
            return self.cumulative[j] + self.simpson(x0, s);
        }
        let fb = self.f_at(b)[0];
        self.cumulative[self.panels] + self.f_at(s)[0] - fb
    }

    /// Evaluate the profile at an arbitrary `s` in `[0, 1)`.
    pub fn eval(&self, s: f64) -> ProfileValues {
        let (a, _) = self.transition();
        let f = self.f_at(s);
        if s <= a {
            return ProfileValues { f: f[0], phi: 0.0, value: 0.0, d1: 0.0, d2: 0.0, d3: 0.0 };
        }
        let [p, p1, p2] = self.phi_at(s);
        ProfileValues {
            f: f[0],
            phi: p,
            value: self.primitive(s),
            d1: p * f[1],
            d2: p1 * f[1] + p * f[2],
            d3: p2 * f[1] + 2.0 * p1 * f[2] + p * f[3],
        }
    }

    /// Rows `[s, f, phi, F, F1, F2, F3]` in node order.
    pub fn rows(&self) -> impl Iterator<Item = [f64; 7]> + '_ {
        (0..self.nodes).map(move |i| {
            [self.s[i], self.f[i], self.phi[i], self.value[i], self.d1[i], self.d2[i], self.d3[i]]
        })
    }

    fn column(&self, k: usize) -> &[f64] {
        match k {
            0 => &self.value,
            1 => &self.d1,
            2 => &self.d2,
            3 => &self.d3,
            _ => panic!("profile derivatives are tabulated up to order 3"),
        }
    }

    /// `sup e^{-k F} |F^{(k)}|` over the tabulation nodes.
    pub fn weighted_sup(&self, k: usize) -> f64 {
        self.column(k)
            .iter()
            .zip(&self.value)
            .map(|(d, v)| (-(k as f64) * v).exp() * d.abs())
            .fold(0.0, f64::max)
    }
}

/// Chosen tau at one sampled `s`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TauSample {
    pub s: f64,
    pub tau: f64,
    /// `exp(F(s + tau) - F(s - tau))`.
    pub ratio: f64,
    /// `tau exp(F(s - tau))`.
    pub lower: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProfileCheck {
    /// `weighted_sup[k - 1] = sup e^{-kF} |F^{(k)}|`.
    pub weighted_sup: Vec<f64>,
    pub max_dphi: f64,
    pub monotone: bool,
    /// Every node with `s <= 1 - kappa + kappa^2` has `F = 0` exactly.
    pub zero_before_transition: bool,
    pub tau: Vec<TauSample>,
    /// `max (ratio - 1) / kappa` over the sweep.
    pub c2: f64,
    /// `min tau exp(F(s - tau)) / kappa^2` over the sweep.
    pub c3: f64,
}

fn choose_tau(profile: &CutoffProfile, s: f64) -> Result<TauSample> {
    let kappa = profile.kappa;
    let mut fallback = None;
    for j in 1..=TAU_CANDIDATES {
        let tau = kappa * (1.0 - s) / f64::powi(2.0, j as i32);
        if !(s - tau > 0.0 && s + tau < 1.0) {
            continue;
        }
        let lo = profile.eval(s - tau).value;
        let ratio = (profile.eval(s + tau).value - lo).exp();
        if !ratio.is_finite() || ratio < 1.0 {
            continue;
        }
        let sample = TauSample { s, tau, ratio, lower: tau * lo.exp() };
        if ratio <= 1.0 + TAU_RATIO_TARGET * kappa {
            return Ok(sample);
        }
        fallback.get_or_insert(sample);
    }
    fallback.ok_or(Error::NoTau(s))
}

/// Measure the weighted derivative bounds and search tau over
/// `TAU_SAMPLES` midpoints of `(1 - 2 kappa, 1)`.
pub fn check_profile(profile: &CutoffProfile, k_max: usize) -> Result<ProfileCheck> {
    if k_max > 3 {
        return Err(Error::Invalid(format!("k_max = {k_max} exceeds the tabulated order 3")));
    }
    let (a, _) = profile.transition();
    let kappa = profile.kappa;
    let tau = (0..TAU_SAMPLES)
        .map(|i| {
            let s = 1.0 - 2.0 * kappa + 2.0 * kappa * (i as f64 + 0.5) / TAU_SAMPLES as f64;
            choose_tau(profile, s)
        })
        .collect::<Result<Vec<_>>>()?;
    let c2 = tau.iter().map(|t| (t.ratio - 1.0) / kappa).fold(0.0, f64::max);
    let c3 = tau.iter().map(|t| t.lower / (kappa * kappa)).fold(f64::INFINITY, f64::min);
    Ok(ProfileCheck {
        weighted_sup: (1..=k_max).map(|k| profile.weighted_sup(k)).collect(),
        max_dphi: profile.max_dphi,
        monotone: profile.value.windows(2).all(|w| w[1] >= w[0]),
        zero_before_transition: profile
            .s
            .iter()
            .zip(&profile.value)
            .filter(|(s, _)| **s <= a)
            .all(|(_, v)| *v == 0.0),
        tau,
        c2,
        c3,
    })
}

/// Sup-norm diagnostics over the unmasked points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Diagnostics {
    pub torsion: f64,
    pub dbar_torsion: f64,
    pub bk_min: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompletionReport {
    pub rho0: f64,
    pub kappa: f64,
    pub active_points: usize,
    /// Points with `rho / rho0 >= 1`.
    pub outside_points: usize,
    /// Points masked because `e^{2F}` exceeded the ceiling.
    pub overflow_points: usize,
    pub before: Diagnostics,
    pub after: Diagnostics,
    pub torsion_drift: f64,
    pub dbar_torsion_drift: f64,
    pub bk_drift: f64,
}

impl CompletionReport {
    /// Largest of the three clipped drifts.
    pub fn epsilon(&self) -> f64 {
        self.torsion_drift.max(self.dbar_torsion_drift).max(self.bk_drift)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompletionOptions {
    /// Largest admissible conformal factor `e^{2F}`.
    pub ceiling: f64,
    pub bk_budget: usize,
    pub seed: u64,
}

impl Default for CompletionOptions {
    fn default() -> Self {
        CompletionOptions { ceiling: 1e100, bk_budget: 4, seed: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct Completion {
    /// `e^{2F} g` on active points; masked points keep `g`.
    pub h0: MetricField,
    /// `F` on active points, zero elsewhere.
    pub conformal_factor: Vec<f64>,
    /// `true` where the point is kept.
    pub mask: Vec<bool>,
    pub report: CompletionReport,
}

/// Conformally complete `g` on `{rho < rho0}`.
pub fn conformal_completion(
    g: &MetricField,
    rho: &[f64],
    rho0: f64,
    profile: &CutoffProfile,
    opts: &CompletionOptions,
) -> Result<Completion> {
    let grid = &g.grid;
    let n = grid.n();
    let np = grid.num_points();
    if rho.len() != np {
        return Err(Error::GridMismatch);
    }
    if !(rho0 > 0.0) {
        return Err(Error::Invalid(format!("rho0 = {rho0} must be positive")));
    }
    if rho.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::Invalid("rho must be non-negative".into()));
    }
    if !rho.iter().any(|v| v / rho0 < 1.0) {
        return Err(Error::Invalid(format!("no point with rho / rho0 < 1 for rho0 = {rho0}")));
    }
    let pkg = ChernPackage::compute(g)?;

    let rc: Vec<C64> = rho.iter().map(|&v| C64::new(v, 0.0)).collect();
    let mut ops: Vec<DiffOp> = (0..n).map(|i| DiffOp::D(Dir::Holo(i))).collect();
    ops.extend((0..n * n).map(|c| DiffOp::DD(Dir::Holo(c / n), Dir::Anti(c % n))));
    let d = grid.apply(&rc, &ops)?;
    let (drho, ddrho) = d.split_at(n);

    let mut mask = vec![false; np];
    let mut factor = vec![0.0; np];
    let mut outside = 0;
    let mut overflow = 0;
    let inf = f64::INFINITY;
    let mut before = Diagnostics { torsion: 0.0, dbar_torsion: 0.0, bk_min: inf };
    let mut after = before;
    let mut h0 = g.clone();

    let mut t = [ZERO; 8];
    let mut dt = [ZERO; 16];
    let mut r = [ZERO; 16];
    for p in 0..np {
        let s = rho[p] / rho0;
        if s >= 1.0 {
            outside += 1;
            continue;
        }
        let v = profile.eval(s);
        let scale = (2.0 * v.value).exp();
        if !(scale <= opts.ceiling) {
            overflow += 1;
            continue;
        }
        mask[p] = true;
        factor[p] = v.value;

        let gp = g.at(p);
        let frame = Frame::of(&gp, p)?;
        let fi: Vec<C64> = drho.iter().map(|c| c[p] * (v.d1 / rho0)).collect();
        let fij = |i: usize, j: usize| {
            drho[i][p] * drho[j][p].conj() * (v.d2 / (rho0 * rho0))
                + ddrho[i * n + j][p] * (v.d1 / rho0)
        };
        let delta = |a: usize, b: usize| if a == b { 2.0 } else { 0.0 };

        let len3 = n * n * n;
        let len4 = len3 * n;
        for c in 0..len3 {
            t[c] = pkg.torsion.comps[c][p];
        }
        for c in 0..len4 {
            dt[c] = pkg.dbar_torsion.comps[c][p];
        }
        for c in 0..len4 {
            r[c] = pkg.curvature.comps[c][p];
        }
        before.torsion = before.torsion.max(pkg.torsion_pointwise[p]);
        before.dbar_torsion = before.dbar_torsion.max(pkg.dbar_torsion_pointwise[p]);
        let mut rf = r;
        frame.transform(&mut rf[..len4], &[Slot::Lower, Slot::LowerBar, Slot::Lower, Slot::LowerBar]);
        before.bk_min = before.bk_min.min(
            frame_extrema(n, &rf[..len4], opts.bk_budget, opts.seed, p).min,
        );

        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    t[(i * n + j) * n + k] += fi[i] * delta(j, k) - fi[j] * delta(i, k);
                    for l in 0..n {
                        dt[((l * n + i) * n + j) * n + k] +=
                            fij(i, l) * delta(j, k) - fij(j, l) * delta(i, k);
                    }
                }
            }
        }
        for a in 0..n {
            for b in 0..n {
                let fab = fij(a, b) * 2.0;
                for c in 0..n {
                    for e in 0..n {
                        let idx = ((a * n + b) * n + c) * n + e;
                        r[idx] = (r[idx] - gp.a[c][e] * fab) * scale;
                    }
                }
            }
        }
        let hp = gp.scale(scale);
        let hframe = Frame::of(&hp, p)?;
        after.torsion = after
            .torsion
            .max(hframe.norm_sq(&t[..len3], &[Slot::Lower, Slot::Lower, Slot::Upper]).sqrt());
        after.dbar_torsion = after.dbar_torsion.max(
            hframe
                .norm_sq(&dt[..len4], &[Slot::LowerBar, Slot::Lower, Slot::Lower, Slot::Upper])
                .sqrt(),
        );
        hframe.transform(&mut r[..len4], &[Slot::Lower, Slot::LowerBar, Slot::Lower, Slot::LowerBar]);
        after.bk_min =
            after.bk_min.min(frame_extrema(n, &r[..len4], opts.bk_budget, opts.seed, p).min);
        for (c, comp) in h0.comps.iter_mut().enumerate() {
            comp[p] = hp.a[c / n][c % n];
        }
    }
    if !mask.iter().any(|m| *m) {
        return Err(Error::Invalid(format!(
            "every point with rho / rho0 < 1 exceeds the conformal ceiling {:e}",
            opts.ceiling
        )));
    }
    let report = CompletionReport {
        rho0,
        kappa: profile.kappa,
        active_points: np - outside - overflow,
        outside_points: outside,
        overflow_points: overflow,
        before,
        after,
        torsion_drift: (after.torsion - before.torsion).max(0.0),
        dbar_torsion_drift: (after.dbar_torsion - before.dbar_torsion).max(0.0),
        bk_drift: (before.bk_min - after.bk_min).max(0.0),
    };
    Ok(Completion { h0, conformal_factor: factor, mask, report })
}

/// Smooth periodic exhaustion candidate
/// `rho = center + amplitude / (2n) * sum_a sin(2 pi x_a + phase_a)`
/// with one seeded phase per real axis. Values lie in
/// `[center - amplitude, center + amplitude]`.
pub fn sine_exhaustion(grid: &ComplexGrid, center: f64, amplitude: f64, seed: u64) -> Vec<f64> {
    let axes = grid.real_axes();
    let mut rng = SeedStream::new(seed);
    let phases: Vec<f64> =
        (0..axes).map(|_| rng.range(0.0, 2.0 * std::f64::consts::PI)).collect();
    let weight = amplitude / axes as f64;
    let mut x = vec![0.0; axes];
    (0..grid.num_points())
        .map(|p| {
            grid.coords_into(p, &mut x);
            let sum: f64 = x
                .iter()
                .zip(&phases)
                .map(|(xa, ph)| (2.0 * std::f64::consts::PI * xa + ph).sin())
                .sum();
            center + weight * sum
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Scheme;
    use crate::metric::random_metric;

    fn profile() -> CutoffProfile {
        build_profile(0.1, MIN_NODES).unwrap()
    }

    #[test]
    fn closed_form_value_of_f() {
        let p = profile();
        assert!((p.eval(0.95).f - (-(0.75f64).ln())).abs() < 1e-14);
        assert!((p.eval(0.95).f - 0.287682).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert_eq!(build_profile(0.125, MIN_NODES), Err(Error::KappaOutOfRange(0.125)));
        assert_eq!(build_profile(0.0, MIN_NODES), Err(Error::KappaOutOfRange(0.0)));
        assert!(matches!(build_profile(0.1, 100), Err(Error::TooFewNodes { .. })));
    }

    #[test]
    fn zero_before_transition_and_monotone() {
        let p = profile();
        let check = check_profile(&p, 3).unwrap();
        assert!(check.zero_before_transition);
        assert!(check.monotone);
        assert!(check.max_dphi <= 1.875 / 0.01 + 1e-9);
        assert!(p.value.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn primitive_matches_fine_quadrature() {
        let p = profile();
        let (a, _) = p.transition();
        // independent trapezoid with many panels
        for s in [0.905, 0.9095, 0.95, 0.99] {
            let m = 400_000;
            let hstep = (s - a) / m as f64;
            let mut acc = 0.0;
            for j in 0..m {
                let x0 = a + j as f64 * hstep;
                acc += 0.5 * hstep * (p.integrand(x0) + p.integrand(x0 + hstep));
            }
            assert!((p.eval(s).value - acc).abs() < 1e-8, "s = {s}");
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let p = profile();
        for s in [0.9095, 0.9105, 0.93, 0.97] {
            let e = 1e-6;
            let lo = p.eval(s - e);
            let hi = p.eval(s + e);
            let v = p.eval(s);
            assert!((hi.value - lo.value) / (2.0 * e) - v.d1 < 1e-5 * (1.0 + v.d1.abs()));
            assert!(((hi.d1 - lo.d1) / (2.0 * e) - v.d2).abs() < 1e-4 * (1.0 + v.d2.abs()));
            assert!(((hi.d2 - lo.d2) / (2.0 * e) - v.d3).abs() < 1e-4 * (1.0 + v.d3.abs()));
        }
    }

    #[test]
    fn profile_is_deterministic() {
        let a = profile();
        let b = profile();
        assert!(a.rows().zip(b.rows()).all(|(x, y)| {
            x.iter().zip(&y).all(|(u, v)| u.to_bits() == v.to_bits())
        }));
    }

    #[test]
    fn primitive_below_f() {
        let p = profile();
        assert!(p.rows().all(|r| r[3] <= r[1] + 1e-12));
    }

    #[test]
    fn tau_flat_region_ratio_is_one() {
        let p = profile();
        let t = choose_tau(&p, 0.81).unwrap();
        assert_eq!(t.ratio, 1.0);
    }

    #[test]
    fn tau_sweep_succeeds() {
        let check = check_profile(&profile(), 3).unwrap();
        assert_eq!(check.tau.len(), TAU_SAMPLES);
        assert!(check.c2.is_finite() && check.c2 > 0.0);
        assert!(check.c3.is_finite() && check.c3 > 0.0);
    }

    #[test]
    fn completion_below_transition_is_identity() {
        let grid = ComplexGrid::new(2, 8, Scheme::Spectral).unwrap();
        let g = random_metric(&grid, 0.2, 3);
        let rho = sine_exhaustion(&grid, 10.0, 9.9, 1);
        let c = conformal_completion(&g, &rho, 100.0, &profile(), &CompletionOptions::default())
            .unwrap();
        assert_eq!(c.h0, g);
        assert_eq!(c.report.epsilon(), 0.0);
        assert!(c.mask.iter().all(|m| *m));
    }

    #[test]
    fn pointwise_laws_match_direct_computation() {
        // slowly varying rho placed in the closed-form part of the profile
        for n in [1, 2] {
            let grid = ComplexGrid::new(n, if n == 1 { 32 } else { 12 }, Scheme::Spectral).unwrap();
            let g = random_metric(&grid, 0.2, 5);
            let rho = sine_exhaustion(&grid, 0.95, 0.01, 2);
            let p = profile();
            let c = conformal_completion(&g, &rho, 1.0, &p, &CompletionOptions::default())
                .unwrap();
            let direct = ChernPackage::compute(&g.conformal(&c.conformal_factor)).unwrap();
            let t = direct.torsion_pointwise.iter().copied().fold(0.0, f64::max);
            let dt = direct.dbar_torsion_pointwise.iter().copied().fold(0.0, f64::max);
            assert!((t - c.report.after.torsion).abs() < 1e-8 * (1.0 + t), "n = {n}");
            assert!((dt - c.report.after.dbar_torsion).abs() < 1e-7 * (1.0 + dt), "n = {n}");
            let bk = crate::bk::bk_extrema(&direct, 4, 0).unwrap();
            assert!((bk.min - c.report.after.bk_min).abs() < 1e-7 * (1.0 + bk.min.abs()));
            assert_eq!(c.h0, g.conformal(&c.conformal_factor));
        }
    }

    #[test]
    fn constant_scaling_law() {
        let grid = ComplexGrid::new(2, 8, Scheme::Spectral).unwrap();
        let g = random_metric(&grid, 0.2, 7);
        let rho = sine_exhaustion(&grid, 10.0, 9.9, 3);
        let p = profile();
        let opts = CompletionOptions::default();
        let a = conformal_completion(&g, &rho, 12.0, &p, &opts).unwrap();
        let lambda = 3.0;
        let b = conformal_completion(&g.scaled(lambda), &rho, 12.0, &p, &opts).unwrap();
        assert!(b.h0.sup_diff(&a.h0.scaled(lambda)).unwrap() < 1e-9 * a.h0.eig_range().1);
        let rel = |x: f64, y: f64| (x - y).abs() / (1.0 + x.abs());
        assert!(rel(b.report.after.torsion, a.report.after.torsion / lambda.sqrt()) < 1e-10);
        assert!(rel(b.report.after.bk_min, a.report.after.bk_min / lambda) < 1e-10);
    }

    #[test]
    fn flat_torsion_closed_form() {
        // flat n = 2: |T0| = 2 sqrt(2) e^{-F} F' |d rho| / rho0 with |d rho|^2 = sum |rho_i|^2
        let grid = ComplexGrid::new(2, 8, Scheme::Spectral).unwrap();
        let g = MetricField::flat(&grid);
        let rho = sine_exhaustion(&grid, 10.0, 9.9, 4);
        let p = profile();
        let c = conformal_completion(&g, &rho, 8.0, &p, &CompletionOptions::default()).unwrap();
        let rc: Vec<C64> = rho.iter().map(|&v| C64::new(v, 0.0)).collect();
        let ops: Vec<DiffOp> = (0..2).map(|i| DiffOp::D(Dir::Holo(i))).collect();
        let d = grid.apply(&rc, &ops).unwrap();
        let mut sup: f64 = 0.0;
        for q in 0..grid.num_points() {
            if c.mask[q] {
                let v = p.eval(rho[q] / 8.0);
                let grad = (d[0][q].norm_sqr() + d[1][q].norm_sqr()).sqrt();
                sup = sup.max(8f64.sqrt() * (-v.value).exp() * v.d1 * grad / 8.0);
            }
        }
        assert!((sup - c.report.after.torsion).abs() < 1e-10 * (1.0 + sup));
    }
}
