//! Hermitian metric fields and the seeded families used by experiments.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{ComplexGrid, DiffOp, Dir, ScalarField, C64};
use crate::herm::SmallMat;
use crate::rng::SeedStream;

/// Per-point Hermitian matrix `g[i][j]` = `g_{i jbar}`, stored component-major
/// with component index `i * n + j`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricField {
    pub grid: ComplexGrid,
    pub comps: Vec<Vec<C64>>,
}

impl MetricField {
    /// Build from a per-point matrix function of the real coordinates. The
    /// result is projected onto its Hermitian part.
    pub fn from_fn(grid: &ComplexGrid, f: impl Fn(&[f64]) -> SmallMat) -> Self {
        let n = grid.n();
        let np = grid.num_points();
        let mut comps = vec![vec![C64::new(0.0, 0.0); np]; n * n];
        let mut x = [0.0; 4];
        for p in 0..np {
            grid.coords_into(p, &mut x);
            let m = f(&x[..grid.real_axes()]).hermitian_part();
            for i in 0..n {
                for j in 0..n {
                    comps[i * n + j][p] = m.a[i][j];
                }
            }
        }
        MetricField { grid: grid.clone(), comps }
    }

    pub fn from_mats(grid: &ComplexGrid, mats: &[SmallMat]) -> Self {
        let n = grid.n();
        let mut comps = vec![Vec::with_capacity(mats.len()); n * n];
        for m in mats {
            for i in 0..n {
                for j in 0..n {
                    comps[i * n + j].push(m.a[i][j]);
                }
            }
        }
        MetricField { grid: grid.clone(), comps }
    }

    pub fn flat(grid: &ComplexGrid) -> Self {
        let n = grid.n();
        Self::from_fn(grid, |_| SmallMat::identity(n))
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    #[inline]
    pub fn at(&self, p: usize) -> SmallMat {
        let n = self.n();
        SmallMat::from_fn(n, |i, j| self.comps[i * n + j][p])
    }

    pub fn mats(&self) -> Vec<SmallMat> {
        (0..self.grid.num_points()).map(|p| self.at(p)).collect()
    }

    pub fn scaled(&self, s: f64) -> Self {
        MetricField {
            grid: self.grid.clone(),
            comps: self.comps.iter().map(|c| c.iter().map(|z| z * s).collect()).collect(),
        }
    }

    /// `e^{2F} g` for a real field `F`.
    pub fn conformal(&self, f: &[f64]) -> Self {
        MetricField {
            grid: self.grid.clone(),
            comps: self
                .comps
                .iter()
                .map(|c| c.iter().zip(f).map(|(z, v)| z * (2.0 * v).exp()).collect())
                .collect(),
        }
    }

    /// Componentwise `self + s * other`.
    pub fn add_scaled(&self, other: &MetricField, s: f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(MetricField {
            grid: self.grid.clone(),
            comps: self
                .comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y * s).collect())
                .collect(),
        })
    }

    /// Smallest and largest eigenvalue over the grid.
    pub fn eig_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in 0..self.grid.num_points() {
            let (a, b) = self.at(p).herm_eigs();
            lo = lo.min(a);
            hi = hi.max(b);
        }
        (lo, hi)
    }

    /// First point whose smallest eigenvalue is not positive.
    pub fn check_positive(&self) -> Result<()> {
        for p in 0..self.grid.num_points() {
            let (lo, _) = self.at(p).herm_eigs();
            if !(lo > 0.0) {
                return Err(Error::NotPositive { point: p, min_eig: lo });
            }
        }
        Ok(())
    }

    /// Per-point `g^{k lbar}` as a matrix `H[k][l]`, i.e. `(g^T)^{-1}`.
    pub fn inverse_upper(&self) -> Result<Vec<SmallMat>> {
        (0..self.grid.num_points())
            .map(|p| self.at(p).transpose().inverse().ok_or(Error::Singular { point: p }))
            .collect()
    }

    pub fn log_det(&self) -> Result<Vec<f64>> {
        (0..self.grid.num_points())
            .map(|p| {
                let d = self.at(p).det().re;
                if d > 0.0 {
                    Ok(d.ln())
                } else {
                    Err(Error::NonPositiveDet { point: p })
                }
            })
            .collect()
    }

    /// Sup over points and components of `|self - other|`.
    pub fn sup_diff(&self, other: &MetricField) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(crate::grid::sup_diff(&self.comps, &other.comps))
    }

    /// `i d dbar u` of a real field as a metric-shaped field.
    pub fn ddbar(grid: &ComplexGrid, u: &[f64]) -> Result<Self> {
        let n = grid.n();
        let data: Vec<C64> = u.iter().map(|&v| C64::new(v, 0.0)).collect();
        let ops: Vec<DiffOp> = (0..n * n)
            .map(|c| DiffOp::DD(Dir::Holo(c / n), Dir::Anti(c % n)))
            .collect();
        Ok(MetricField { grid: grid.clone(), comps: grid.apply(&data, &ops)? })
    }

    /// Trace of `other` with respect to `self`: `self^{i jbar} other_{i jbar}`.
    pub fn trace_of(&self, other: &MetricField) -> Result<Vec<f64>> {
        let inv = self.inverse_upper()?;
        Ok(inv.iter().enumerate().map(|(p, h)| trace_pair(h, &other.at(p))).collect())
    }
}

/// `sum_{ij} H[i][j] A[i][j]` with `H = g^{i jbar}`.
pub fn trace_pair(inv_upper: &SmallMat, a: &SmallMat) -> f64 {
    let n = a.n;
    let mut s = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            s += inv_upper.a[i][j] * a.a[i][j];
        }
    }
    s.re
}

/// One Fourier mode `cos(2 pi k.x + phase)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mode {
    pub k: [i32; 4],
    pub phase: f64,
}

impl Mode {
    fn arg(&self, x: &[f64]) -> f64 {
        2.0 * PI * x.iter().zip(&self.k).map(|(a, &k)| a * k as f64).sum::<f64>() + self.phase
    }

    /// Symbol of the holomorphic derivative along complex axis `i`:
    /// `d/dz_i cos(arg) = -pi (kx - i ky) sin(arg)`.
    fn holo(&self, i: usize) -> C64 {
        C64::new(self.k[2 * i] as f64, -(self.k[2 * i + 1] as f64))
    }
}

/// Real trigonometric polynomial `sum_m c_m cos(2 pi k_m.x + phase_m)` with
/// closed-form complex derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigPoly {
    pub n: usize,
    pub terms: Vec<(f64, Mode)>,
}

impl TrigPoly {
    /// Random polynomial with `modes` terms of frequency at most 1 per axis.
    pub fn random(n: usize, modes: usize, seed: u64) -> Self {
        let mut rng = SeedStream::new(seed);
        let terms = (0..modes)
            .map(|_| {
                let mut k = [0i32; 4];
                loop {
                    for kk in k.iter_mut().take(2 * n) {
                        *kk = rng.int_in(-1, 1) as i32;
                    }
                    if k.iter().any(|&v| v != 0) {
                        break;
                    }
                }
                let c = rng.range(0.5, 1.0);
                let phase = rng.range(0.0, 2.0 * PI);
                (c, Mode { k, phase })
            })
            .collect();
        TrigPoly { n, terms }
    }

    /// Rescale so the operator norm of `d dbar` is bounded by `bound`.
    pub fn normalized_hessian(mut self, bound: f64) -> Self {
        let total: f64 = self
            .terms
            .iter()
            .map(|(c, m)| c.abs() * PI * PI * (0..self.n).map(|i| m.holo(i).norm_sqr()).sum::<f64>())
            .sum();
        if total > 0.0 {
            for (c, _) in self.terms.iter_mut() {
                *c *= bound / total;
            }
        }
        self
    }

    /// Rescale so the sup norm is bounded by `bound`.
    pub fn normalized_value(mut self, bound: f64) -> Self {
        let total: f64 = self.terms.iter().map(|(c, _)| c.abs()).sum();
        if total > 0.0 {
            for (c, _) in self.terms.iter_mut() {
                *c *= bound / total;
            }
        }
        self
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(c, m)| c * m.arg(x).cos()).sum()
    }

    pub fn d_holo(&self, x: &[f64], i: usize) -> C64 {
        self.terms.iter().map(|(c, m)| -PI * c * m.arg(x).sin() * m.holo(i)).sum()
    }

    pub fn d_anti(&self, x: &[f64], i: usize) -> C64 {
        self.d_holo(x, i).conj()
    }

    /// `d_i d_jbar` as a Hermitian matrix.
    pub fn ddbar(&self, x: &[f64]) -> SmallMat {
        SmallMat::from_fn(self.n, |i, j| {
            self.terms
                .iter()
                .map(|(c, m)| -PI * PI * c * m.arg(x).cos() * m.holo(i) * m.holo(j).conj())
                .sum()
        })
    }

    pub fn sample(&self, grid: &ComplexGrid) -> Vec<f64> {
        let mut x = [0.0; 4];
        (0..grid.num_points())
            .map(|p| {
                grid.coords_into(p, &mut x);
                self.value(&x[..grid.real_axes()])
            })
            .collect()
    }

    pub fn sample_field(&self, grid: &ComplexGrid) -> ScalarField {
        ScalarField::from_real(grid, &self.sample(grid))
    }
}

/// Kähler metric `delta + d dbar phi` for a random potential whose complex
/// Hessian has operator norm at most `amplitude` (< 1 keeps it positive).
pub fn kahler_potential(grid: &ComplexGrid, amplitude: f64, seed: u64) -> Result<MetricField> {
    let phi = kahler_potential_fn(grid.n(), amplitude, seed)?;
    let n = grid.n();
    Ok(MetricField::from_fn(grid, |x| SmallMat::identity(n) + phi.ddbar(x)))
}

pub fn kahler_potential_fn(n: usize, amplitude: f64, seed: u64) -> Result<TrigPoly> {
    if !(0.0..1.0).contains(&amplitude) {
        return Err(Error::Invalid(format!("kahler amplitude {amplitude} must lie in [0, 1)")));
    }
    Ok(TrigPoly::random(n, 3, seed).normalized_hessian(amplitude))
}

/// Seeded phase used by [`nonkahler_perturbed`].
pub fn nonkahler_phase(seed: u64) -> f64 {
    SeedStream::new(seed).uniform()
}

/// `delta + eps diag(sin(2 pi (y2 + theta)), 0)` on a two-dimensional chart.
pub fn nonkahler_perturbed(grid: &ComplexGrid, eps: f64, seed: u64) -> Result<MetricField> {
    if grid.n() != 2 {
        return Err(Error::BadDimension(grid.n()));
    }
    if !(0.0..1.0).contains(&eps.abs()) {
        return Err(Error::Invalid(format!("perturbation {eps} must satisfy |eps| < 1")));
    }
    let theta = nonkahler_phase(seed);
    Ok(MetricField::from_fn(grid, |x| {
        let mut m = SmallMat::identity(2);
        m.a[0][0] += eps * (2.0 * PI * (x[3] + theta)).sin();
        m
    }))
}

/// Generic Hermitian perturbation `delta + sum_m A_m cos(2 pi k_m.x + phase_m)`
/// with random Hermitian `A_m`; the Frobenius norms sum to `amplitude`.
#[derive(Clone, Debug)]
pub struct RandomHermitian {
    pub n: usize,
    pub terms: Vec<(SmallMat, Mode)>,
}

impl RandomHermitian {
    pub fn new(n: usize, modes: usize, amplitude: f64, seed: u64) -> Self {
        let mut rng = SeedStream::new(seed);
        let mut terms = Vec::with_capacity(modes);
        for _ in 0..modes {
            let mut k = [0i32; 4];
            for kk in k.iter_mut().take(2 * n) {
                *kk = rng.int_in(-1, 1) as i32;
            }
            let phase = rng.range(0.0, 2.0 * PI);
            let mut a = SmallMat::zeros(n);
            for i in 0..n {
                a.a[i][i] = C64::new(rng.normal(), 0.0);
                for j in i + 1..n {
                    let z = C64::new(rng.normal(), rng.normal());
                    a.a[i][j] = z;
                    a.a[j][i] = z.conj();
                }
            }
            terms.push((a, Mode { k, phase }));
        }
        let total: f64 = terms.iter().map(|(a, _)| frobenius(a)).sum();
        for (a, _) in terms.iter_mut() {
            *a = a.scale(amplitude / total);
        }
        RandomHermitian { n, terms }
    }

    pub fn value(&self, x: &[f64]) -> SmallMat {
        self.terms
            .iter()
            .fold(SmallMat::identity(self.n), |acc, (a, m)| acc + a.scale(m.arg(x).cos()))
    }

    pub fn metric(&self, grid: &ComplexGrid) -> MetricField {
        MetricField::from_fn(grid, |x| self.value(x))
    }
}

fn frobenius(a: &SmallMat) -> f64 {
    let mut s = 0.0;
    for i in 0..a.n {
        for j in 0..a.n {
            s += a.a[i][j].norm_sqr();
        }
    }
    s.sqrt()
}

/// Seeded random band-limited metric used by the identity checks.
pub fn random_metric(grid: &ComplexGrid, amplitude: f64, seed: u64) -> MetricField {
    RandomHermitian::new(grid.n(), 3, amplitude, seed).metric(grid)
}

/// Conformally flat metric `e^{2u} delta`.
pub fn conformally_flat(grid: &ComplexGrid, u: impl Fn(&[f64]) -> f64) -> MetricField {
    let n = grid.n();
    MetricField::from_fn(grid, |x| SmallMat::identity(n).scale((2.0 * u(x)).exp()))
}
