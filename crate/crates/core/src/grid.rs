//! Periodic complex torus charts and their derivative operators.
//!
//! A grid of complex dimension `n` has `2n` real axes ordered
//! `(x1, y1, x2, y2)`, each of period 1 and sampled at `N` points. Points are
//! stored with axis 0 varying fastest. The holomorphic derivative is
//! `d/dz_i = (d/dx_i - i d/dy_i) / 2` and the antiholomorphic one is
//! `d/dzbar_i = (d/dx_i + i d/dy_i) / 2`.
//!
//! Two schemes are provided: Fourier (exact on trigonometric polynomials of
//! frequency below `N/2`; the Nyquist mode is dropped for first derivatives)
//! and fourth-order central differences.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub type C64 = Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    Spectral,
    Central4,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Spectral => "spectral",
            Scheme::Central4 => "central4",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" => Ok(Scheme::Spectral),
            "central4" => Ok(Scheme::Central4),
            other => Err(Error::Invalid(format!("unknown scheme '{other}'"))),
        }
    }
}

/// First-order complex derivative direction (0-based complex axis).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dir {
    Holo(usize),
    Anti(usize),
}

/// A derivative of order one or two.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiffOp {
    D(Dir),
    DD(Dir, Dir),
}

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

#[derive(Clone)]
pub struct ComplexGrid {
    n: usize,
    size: usize,
    scheme: Scheme,
    plans: Arc<Plans>,
}

impl fmt::Debug for ComplexGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ComplexGrid")
            .field("n", &self.n)
            .field("size", &self.size)
            .field("scheme", &self.scheme)
            .finish()
    }
}

impl PartialEq for ComplexGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.size == other.size && self.scheme == other.scheme
    }
}

impl ComplexGrid {
    pub fn new(n: usize, size: usize, scheme: Scheme) -> Result<Self> {
        if n != 1 && n != 2 {
            return Err(Error::BadDimension(n));
        }
        if size < 8 || size % 2 != 0 {
            return Err(Error::BadGridSize(size));
        }
        let mut planner = FftPlanner::new();
        let plans = Plans {
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
        };
        Ok(ComplexGrid { n, size, scheme, plans: Arc::new(plans) })
    }

    /// Same lattice, different derivative scheme.
    pub fn with_scheme(&self, scheme: Scheme) -> Self {
        ComplexGrid { scheme, ..self.clone() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.size as f64
    }

    pub fn real_axes(&self) -> usize {
        2 * self.n
    }

    pub fn num_points(&self) -> usize {
        self.size.pow(self.real_axes() as u32)
    }

    /// Real coordinates of point `p`, written into `out` (length `2n`).
    pub fn coords_into(&self, p: usize, out: &mut [f64]) {
        let mut rem = p;
        let h = self.spacing();
        for x in out.iter_mut().take(self.real_axes()) {
            *x = (rem % self.size) as f64 * h;
            rem /= self.size;
        }
    }

    pub fn coords(&self, p: usize) -> [f64; 4] {
        let mut c = [0.0; 4];
        self.coords_into(p, &mut c);
        c
    }

    pub fn check_axis(&self, i: usize) -> Result<()> {
        if i >= self.n {
            Err(Error::AxisOutOfRange { axis: i, n: self.n })
        } else {
            Ok(())
        }
    }

    fn check_op(&self, op: &DiffOp) -> Result<()> {
        let axis = |d: &Dir| match d {
            Dir::Holo(i) | Dir::Anti(i) => *i,
        };
        match op {
            DiffOp::D(d) => self.check_axis(axis(d)),
            DiffOp::DD(a, b) => {
                self.check_axis(axis(a))?;
                self.check_axis(axis(b))
            }
        }
    }

    /// Apply several derivative operators to the same data.
    ///
    /// Under the spectral scheme the forward transform is shared.
    pub fn apply(&self, data: &[C64], ops: &[DiffOp]) -> Result<Vec<Vec<C64>>> {
        assert_eq!(data.len(), self.num_points(), "field length does not match grid");
        for op in ops {
            self.check_op(op)?;
        }
        Ok(match self.scheme {
            Scheme::Spectral => self.apply_spectral(data, ops),
            Scheme::Central4 => ops.iter().map(|op| self.apply_fd(data, op)).collect(),
        })
    }

    pub fn apply_one(&self, data: &[C64], op: DiffOp) -> Result<Vec<C64>> {
        Ok(self.apply(data, &[op])?.pop().unwrap())
    }

    /// Multiply the Fourier coefficients of `data` by `m(k)`, where `k` holds
    /// the integer wavenumbers per real axis. Always spectral, whatever the
    /// grid's derivative scheme.
    pub fn fourier_multiplier(&self, data: &[C64], m: impl Fn(&[f64]) -> C64) -> Vec<C64> {
        assert_eq!(data.len(), self.num_points(), "field length does not match grid");
        let mut hat = data.to_vec();
        self.fft_nd(&mut hat, false);
        let axes = self.real_axes();
        let size = self.size;
        let ks: Vec<f64> = (0..size).map(|i| self.wavenumber(i)).collect();
        let norm = 1.0 / self.num_points() as f64;
        let mut idx = [0usize; 4];
        let mut k = [0.0; 4];
        for v in hat.iter_mut() {
            for a in 0..axes {
                k[a] = ks[idx[a]];
            }
            *v *= m(&k[..axes]) * norm;
            for slot in idx.iter_mut().take(axes) {
                *slot += 1;
                if *slot < size {
                    break;
                }
                *slot = 0;
            }
        }
        self.fft_nd(&mut hat, true);
        hat
    }

    fn wavenumber(&self, idx: usize) -> f64 {
        let n = self.size;
        if idx == n / 2 {
            0.0
        } else if idx < n / 2 {
            idx as f64
        } else {
            idx as f64 - n as f64
        }
    }

    fn apply_spectral(&self, data: &[C64], ops: &[DiffOp]) -> Vec<Vec<C64>> {
        let mut hat = data.to_vec();
        self.fft_nd(&mut hat, false);
        let axes = self.real_axes();
        let size = self.size;
        let ks: Vec<f64> = (0..size).map(|i| self.wavenumber(i)).collect();
        let norm = 1.0 / self.num_points() as f64;
        ops.iter()
            .map(|op| {
                let mut out = vec![C64::new(0.0, 0.0); hat.len()];
                let mut idx = [0usize; 4];
                for (p, o) in out.iter_mut().enumerate() {
                    let k = |a: usize| ks[idx[a]];
                    let sym = |d: &Dir| match d {
                        Dir::Holo(i) => C64::new(PI * k(2 * i + 1), PI * k(2 * i)),
                        Dir::Anti(i) => C64::new(-PI * k(2 * i + 1), PI * k(2 * i)),
                    };
                    let s = match op {
                        DiffOp::D(d) => sym(d),
                        DiffOp::DD(a, b) => sym(a) * sym(b),
                    };
                    *o = hat[p] * s * norm;
                    // advance the multi-index
                    for slot in idx.iter_mut().take(axes) {
                        *slot += 1;
                        if *slot < size {
                            break;
                        }
                        *slot = 0;
                    }
                }
                self.fft_nd(&mut out, true);
                out
            })
            .collect()
    }

    /// Unnormalized multi-dimensional FFT in place.
    pub(crate) fn fft_nd(&self, data: &mut [C64], inverse: bool) {
        let fft = if inverse { &self.plans.inverse } else { &self.plans.forward };
        let n = self.size;
        let mut scratch = vec![C64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        // axis 0: contiguous lines
        fft.process_with_scratch(data, &mut scratch);
        let total = data.len();
        let mut stride = n;
        let mut lines = Vec::new();
        for _ in 1..self.real_axes() {
            let block = stride * n;
            lines.resize(block, C64::new(0.0, 0.0));
            for base in (0..total).step_by(block) {
                for k in 0..n {
                    let row = &data[base + k * stride..base + (k + 1) * stride];
                    for (r, v) in row.iter().enumerate() {
                        lines[r * n + k] = *v;
                    }
                }
                fft.process_with_scratch(&mut lines, &mut scratch);
                for k in 0..n {
                    let row = &mut data[base + k * stride..base + (k + 1) * stride];
                    for (r, v) in row.iter_mut().enumerate() {
                        *v = lines[r * n + k];
                    }
                }
            }
            stride = block;
        }
    }

    /// Fourth-order central difference along real axis `axis`.
    fn d_real_axis(&self, data: &[C64], axis: usize) -> Vec<C64> {
        let n = self.size;
        let stride = n.pow(axis as u32);
        let block = stride * n;
        let inv = n as f64 / 12.0;
        let mut out = vec![C64::new(0.0, 0.0); data.len()];
        for base in (0..data.len()).step_by(block) {
            for k in 0..n {
                let at = |j: usize| base + (j % n) * stride;
                let (kp1, kp2) = (at(k + 1), at(k + 2));
                let (km1, km2) = (at(k + n - 1), at(k + n - 2));
                let row = base + k * stride;
                for r in 0..stride {
                    out[row + r] = (data[km2 + r] - data[kp2 + r]
                        + (data[kp1 + r] - data[km1 + r]) * 8.0)
                        * inv;
                }
            }
        }
        out
    }

    fn d_fd(&self, data: &[C64], d: Dir) -> Vec<C64> {
        let (i, sign) = match d {
            Dir::Holo(i) => (i, -1.0),
            Dir::Anti(i) => (i, 1.0),
        };
        let dx = self.d_real_axis(data, 2 * i);
        let dy = self.d_real_axis(data, 2 * i + 1);
        dx.iter()
            .zip(&dy)
            .map(|(a, b)| (a + C64::new(0.0, sign) * b) * 0.5)
            .collect()
    }

    fn apply_fd(&self, data: &[C64], op: &DiffOp) -> Vec<C64> {
        match op {
            DiffOp::D(d) => self.d_fd(data, *d),
            DiffOp::DD(a, b) => self.d_fd(&self.d_fd(data, *b), *a),
        }
    }
}

/// A complex scalar field sampled on a grid.
#[derive(Clone, Debug)]
pub struct ScalarField {
    pub grid: ComplexGrid,
    pub data: Vec<C64>,
}

impl ScalarField {
    pub fn zeros(grid: &ComplexGrid) -> Self {
        ScalarField { grid: grid.clone(), data: vec![C64::new(0.0, 0.0); grid.num_points()] }
    }

    pub fn from_fn(grid: &ComplexGrid, f: impl Fn(&[f64]) -> C64) -> Self {
        let mut x = [0.0; 4];
        let data = (0..grid.num_points())
            .map(|p| {
                grid.coords_into(p, &mut x);
                f(&x[..grid.real_axes()])
            })
            .collect();
        ScalarField { grid: grid.clone(), data }
    }

    pub fn from_real(grid: &ComplexGrid, values: &[f64]) -> Self {
        assert_eq!(values.len(), grid.num_points());
        ScalarField { grid: grid.clone(), data: values.iter().map(|&v| C64::new(v, 0.0)).collect() }
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.re).collect()
    }

    pub fn conj(&self) -> Self {
        ScalarField { grid: self.grid.clone(), data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.data)
    }

    pub fn d_holo(&self, i: usize) -> Result<Self> {
        d_holo(self, i)
    }

    pub fn d_antiholo(&self, i: usize) -> Result<Self> {
        d_antiholo(self, i)
    }
}

pub fn d_holo(f: &ScalarField, i: usize) -> Result<ScalarField> {
    let data = f.grid.apply_one(&f.data, DiffOp::D(Dir::Holo(i)))?;
    Ok(ScalarField { grid: f.grid.clone(), data })
}

pub fn d_antiholo(f: &ScalarField, i: usize) -> Result<ScalarField> {
    let data = f.grid.apply_one(&f.data, DiffOp::D(Dir::Anti(i)))?;
    Ok(ScalarField { grid: f.grid.clone(), data })
}

/// Component-major tensor field. Component `c` of a rank-`r` tensor stores
/// the indices `(a_0, .., a_{r-1})` in mixed radix `n`, first index most
/// significant. `signature` documents the index placement, e.g. `"^k _i _j"`.
#[derive(Clone, Debug)]
pub struct TensorField {
    pub grid: ComplexGrid,
    pub rank: usize,
    pub signature: &'static str,
    pub comps: Vec<Vec<C64>>,
}

impl TensorField {
    pub fn zeros(grid: &ComplexGrid, rank: usize, signature: &'static str) -> Self {
        let ncomp = grid.n().pow(rank as u32);
        TensorField {
            grid: grid.clone(),
            rank,
            signature,
            comps: vec![vec![C64::new(0.0, 0.0); grid.num_points()]; ncomp],
        }
    }

    pub fn num_comps(&self) -> usize {
        self.comps.len()
    }

    pub fn index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank);
        idx.iter().fold(0, |acc, &i| acc * self.grid.n() + i)
    }

    pub fn at(&self, p: usize, idx: &[usize]) -> C64 {
        self.comps[self.index(idx)][p]
    }

    pub fn sup_norm(&self) -> f64 {
        self.comps.iter().map(|c| sup_norm(c)).fold(0.0, f64::max)
    }

    /// Componentwise derivative along `dir`.
    pub fn derivative(&self, dir: Dir) -> Result<TensorField> {
        let comps = self
            .comps
            .iter()
            .map(|c| self.grid.apply_one(c, DiffOp::D(dir)))
            .collect::<Result<Vec<_>>>()?;
        Ok(TensorField { grid: self.grid.clone(), rank: self.rank, signature: self.signature, comps })
    }

    /// All holomorphic and antiholomorphic first derivatives of every component.
    /// Returns `(holo, anti)`, each indexed `[axis][component]`.
    pub fn gradients(&self) -> Result<(Vec<Vec<Vec<C64>>>, Vec<Vec<Vec<C64>>>)> {
        let n = self.grid.n();
        let ops: Vec<DiffOp> = (0..n)
            .map(|i| DiffOp::D(Dir::Holo(i)))
            .chain((0..n).map(|i| DiffOp::D(Dir::Anti(i))))
            .collect();
        let mut holo = vec![Vec::with_capacity(self.comps.len()); n];
        let mut anti = vec![Vec::with_capacity(self.comps.len()); n];
        for c in &self.comps {
            let mut d = self.grid.apply(c, &ops)?;
            let a = d.split_off(n);
            for (i, v) in d.into_iter().enumerate() {
                holo[i].push(v);
            }
            for (i, v) in a.into_iter().enumerate() {
                anti[i].push(v);
            }
        }
        Ok((holo, anti))
    }
}

/// Largest modulus; deterministic sequential reduction.
pub fn sup_norm(values: &[C64]) -> f64 {
    values.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max).sqrt()
}

/// Largest componentwise modulus of `a - b` over matching component lists.
pub fn sup_diff(a: &[Vec<C64>], b: &[Vec<C64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).norm_sqr()))
        .fold(0.0, f64::max)
        .sqrt()
}

/// Least-squares slope of `log(y)` against `log(x)`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

/// Observed order of accuracy: the negated log-log slope of the error
/// against the grid size.
pub fn convergence_order(
    resolutions: &[usize],
    mut error_at: impl FnMut(usize) -> Result<f64>,
) -> Result<f64> {
    if resolutions.len() < 3 {
        return Err(Error::TooFewResolutions { needed: 3, got: resolutions.len() });
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &n in resolutions {
        xs.push(n as f64);
        ys.push(error_at(n)?);
    }
    Ok(-loglog_slope(&xs, &ys))
}
