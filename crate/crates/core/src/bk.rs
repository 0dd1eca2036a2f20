//! Sampled extrema of holomorphic bisectional curvature.
//!
//! At each point the curvature is taken in a g-unitary frame. For `n = 2`
//! a unit vector `X` enters only through the projector `P = X X^*`, which is
//! `(I + v.sigma)/2` for a unit vector `v` in R^3 (Pauli matrices `sigma`).
//! Writing `u = (1, v)` and `M_st = sum R_{a bbar c dbar} s_s[a][b] s_t[c][d]`
//! with `s_0 = I`, the holomorphic sectional value is `u^T Re(M) u / 4`, and
//! the value on the orthogonal pair `(X, Y)` with `Y Y^* = I - P` is
//! `u^T Re(M) u' / 4` with `u' = (1, -v)`. Both are quadratic in `v` and are
//! optimized over the sphere by multistart projected gradient.

use crate::chern::ChernPackage;
use crate::error::{Error, Result};
use crate::grid::C64;
use crate::rng::SeedStream;

const MAX_ITERS: usize = 50;

/// Sample bounds: `min` is an upper estimate of the true minimum and `max` a
/// lower estimate of the true maximum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BkExtrema {
    pub min: f64,
    pub max: f64,
}

fn pauli() -> [[[C64; 2]; 2]; 4] {
    let z = C64::new(0.0, 0.0);
    let o = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    [
        [[o, z], [z, o]],
        [[z, o], [o, z]],
        [[z, -i], [i, z]],
        [[o, z], [z, -o]],
    ]
}

/// Quadratic form in `v`: `q(v) = c + b.v + v^T A v`.
#[derive(Clone, Copy, Debug)]
struct Quadratic {
    c: f64,
    b: [f64; 3],
    a: [[f64; 3]; 3],
}

impl Quadratic {
    fn from_weights(m: &[[f64; 4]; 4], flip: bool) -> Self {
        let s = if flip { -1.0 } else { 1.0 };
        let mut q = Quadratic { c: m[0][0] / 4.0, b: [0.0; 3], a: [[0.0; 3]; 3] };
        for r in 0..3 {
            q.b[r] = (m[r + 1][0] + s * m[0][r + 1]) / 4.0;
            for t in 0..3 {
                q.a[r][t] = s * m[r + 1][t + 1] / 4.0;
            }
        }
        q
    }

    fn value(&self, v: &[f64; 3]) -> f64 {
        let mut out = self.c;
        for r in 0..3 {
            out += self.b[r] * v[r];
            for t in 0..3 {
                out += self.a[r][t] * v[r] * v[t];
            }
        }
        out
    }

    fn gradient(&self, v: &[f64; 3]) -> [f64; 3] {
        let mut g = self.b;
        for (r, gr) in g.iter_mut().enumerate() {
            for t in 0..3 {
                *gr += (self.a[r][t] + self.a[t][r]) * v[t];
            }
        }
        g
    }

    /// Projected gradient descent (`sign = 1`) or ascent (`sign = -1`) from
    /// `v`, accepting only improving steps.
    fn refine(&self, mut v: [f64; 3], sign: f64) -> f64 {
        let mut best = self.value(&v);
        let mut step = 0.5;
        for _ in 0..MAX_ITERS {
            let g = self.gradient(&v);
            let radial: f64 = g.iter().zip(&v).map(|(a, b)| a * b).sum();
            let tangent = [g[0] - radial * v[0], g[1] - radial * v[1], g[2] - radial * v[2]];
            let tnorm = tangent.iter().map(|x| x * x).sum::<f64>().sqrt();
            if tnorm < 1e-14 {
                break;
            }
            let mut improved = false;
            while step > 1e-10 {
                let mut w = [0.0; 3];
                for r in 0..3 {
                    w[r] = v[r] - sign * step * tangent[r] / tnorm;
                }
                normalize(&mut w);
                let val = self.value(&w);
                if sign * (best - val) > 0.0 {
                    v = w;
                    best = val;
                    step *= 1.5;
                    improved = true;
                    break;
                }
                step *= 0.5;
            }
            if !improved {
                break;
            }
        }
        best
    }
}

fn normalize(v: &mut [f64; 3]) {
    let s = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in v.iter_mut() {
        *x /= s;
    }
}

fn random_unit(rng: &mut SeedStream) -> [f64; 3] {
    loop {
        let mut v = [rng.normal(), rng.normal(), rng.normal()];
        if v.iter().map(|x| x * x).sum::<f64>() > 1e-12 {
            normalize(&mut v);
            return v;
        }
    }
}

/// Weights `Re M_st` for one point, from frame curvature `r[a, b, c, d]`.
fn weights(r: &[C64]) -> [[f64; 4]; 4] {
    let sig = pauli();
    let mut m = [[0.0; 4]; 4];
    for (s, ms) in m.iter_mut().enumerate() {
        for (t, mst) in ms.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for a in 0..2 {
                for b in 0..2 {
                    let sab = sig[s][a][b];
                    if sab == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for c in 0..2 {
                        for d in 0..2 {
                            acc += r[((a * 2 + b) * 2 + c) * 2 + d] * sab * sig[t][c][d];
                        }
                    }
                }
            }
            *mst = acc.re;
        }
    }
    m
}

/// Extrema at one point for `n = 2`.
fn point_extrema(r: &[C64], budget: usize, seed: u64, point: usize) -> BkExtrema {
    let m = weights(r);
    let sectional = Quadratic::from_weights(&m, false);
    let pair = Quadratic::from_weights(&m, true);
    // coordinate frame directions first, then random starts
    let mut starts = vec![[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]];
    let mut rng = SeedStream::derive(seed, point as u64);
    starts.extend((0..budget).map(|_| random_unit(&mut rng)));
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in &starts {
        for q in [&sectional, &pair] {
            lo = lo.min(q.refine(*v, 1.0));
            hi = hi.max(q.refine(*v, -1.0));
        }
    }
    BkExtrema { min: lo, max: hi }
}

/// Sampled extrema at one point from frame curvature components `r`
/// (length `n^4`, stored `[a, b, c, d]`).
pub fn frame_extrema(n: usize, r: &[C64], sample_budget: usize, seed: u64, point: usize) -> BkExtrema {
    if n == 1 {
        BkExtrema { min: r[0].re, max: r[0].re }
    } else {
        point_extrema(r, sample_budget, seed, point)
    }
}

/// Grid-wide sampled bisectional curvature extrema. Starts are drawn from a
/// per-point stream so a larger budget only adds starts.
pub fn bk_extrema(pkg: &ChernPackage, sample_budget: usize, seed: u64) -> Result<BkExtrema> {
    if sample_budget < 1 {
        return Err(Error::EmptyBudget);
    }
    let n = pkg.metric.n();
    let mut out = BkExtrema { min: f64::INFINITY, max: f64::NEG_INFINITY };
    for p in 0..pkg.grid().num_points() {
        let e = if n == 1 {
            let g = pkg.metric.comps[0][p].re;
            let v = pkg.curvature.comps[0][p].re / (g * g);
            BkExtrema { min: v, max: v }
        } else {
            point_extrema(&pkg.frame_curvature(p)?, sample_budget, seed, p)
        };
        out.min = out.min.min(e.min);
        out.max = out.max.max(e.max);
    }
    Ok(out)
}
