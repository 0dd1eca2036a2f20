//! Chern connection, torsion, curvature and Chern-Ricci form of a sampled metric.
//!
//! Index storage (mixed radix, first index most significant):
//!
//! | field            | stored index  | meaning                          |
//! |------------------|---------------|----------------------------------|
//! | `christoffel`    | `[i, j, k]`   | `Gamma^k_{ij}`                   |
//! | `torsion`        | `[i, j, k]`   | `T^k_{ij}`                       |
//! | `dbar_torsion`   | `[l, i, j, k]`| `d_{lbar} T^k_{ij}`              |
//! | `curvature_up`   | `[i, j, k, l]`| `R_{i jbar k}^l`                 |
//! | `curvature`      | `[i, j, k, l]`| `R_{i jbar k lbar}`              |
//! | `ricci`          | `[i, j]`      | `R_{i jbar}`                     |
//!
//! Frame norms use the g-unitary frame `e_a = E^i_a d_i` with `E = (L^{-1})^T`
//! where `g = L L^*` is the Cholesky factorization of the matrix `g[i][j]`.
//! Every index is converted to that frame and the squared moduli are summed.

use crate::error::{Error, Result};
use crate::grid::{ComplexGrid, DiffOp, Dir, TensorField, C64};
use crate::herm::SmallMat;
use crate::metric::MetricField;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Placement of a tensor slot, used to pick the frame change for it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    Lower,
    LowerBar,
    Upper,
}

/// Per-point unitary frame data.
#[derive(Clone, Copy, Debug)]
pub struct Frame {
    /// `E[i][a]`: coordinate components of frame vector `a`.
    pub e: SmallMat,
    /// Cholesky factor `L`; `(E^{-1})^a_k = L[k][a]`.
    pub l: SmallMat,
}

impl Frame {
    pub fn of(g: &SmallMat, point: usize) -> Result<Frame> {
        let l = g.cholesky().ok_or(Error::NotPositive { point, min_eig: g.herm_eigs().0 })?;
        let e = l.inverse().ok_or(Error::Singular { point })?.transpose();
        Ok(Frame { e, l })
    }

    fn slot_matrix(&self, slot: Slot) -> SmallMat {
        match slot {
            Slot::Lower => self.e,
            Slot::LowerBar => self.e.conj(),
            Slot::Upper => self.l,
        }
    }

    /// Convert the components `vals` (length `n^rank`) to frame components.
    pub fn transform(&self, vals: &mut [C64], slots: &[Slot]) {
        let n = self.e.n;
        let rank = slots.len();
        let len = vals.len();
        assert!(len <= 16, "frame transform supports rank <= 4 with n <= 2");
        let mut tmp = [ZERO; 16];
        for (s, slot) in slots.iter().enumerate() {
            let m = self.slot_matrix(*slot);
            let stride = n.pow((rank - 1 - s) as u32);
            for (idx, out) in tmp[..len].iter_mut().enumerate() {
                let a = (idx / stride) % n;
                let base = idx - a * stride;
                let mut acc = ZERO;
                for i in 0..n {
                    acc += m.a[i][a] * vals[base + i * stride];
                }
                *out = acc;
            }
            vals.copy_from_slice(&tmp[..len]);
        }
    }

    /// Squared frame norm of the components `vals`.
    pub fn norm_sq(&self, vals: &[C64], slots: &[Slot]) -> f64 {
        let mut v = [ZERO; 16];
        let v = &mut v[..vals.len()];
        v.copy_from_slice(vals);
        self.transform(v, slots);
        v.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// All derived Chern quantities of one metric.
#[derive(Clone, Debug)]
pub struct ChernPackage {
    pub metric: MetricField,
    pub inverse: Vec<SmallMat>,
    pub christoffel: TensorField,
    pub torsion: TensorField,
    pub dbar_torsion: TensorField,
    pub curvature_up: TensorField,
    pub curvature: TensorField,
    pub ricci: TensorField,
    /// `g^{k lbar} R_{i jbar k lbar}`.
    pub ricci_contraction: TensorField,
    /// `g^{k lbar} R_{k lbar i jbar}`.
    pub other_contraction: TensorField,
    /// Pointwise `|T|_g`.
    pub torsion_pointwise: Vec<f64>,
    /// Pointwise `|dbar T|_g`.
    pub dbar_torsion_pointwise: Vec<f64>,
    pub torsion_norm: f64,
    pub dbar_torsion_norm: f64,
}

impl ChernPackage {
    pub fn compute(g: &MetricField) -> Result<ChernPackage> {
        let grid = &g.grid;
        let n = grid.n();
        let np = grid.num_points();
        let inverse = g.inverse_upper()?;
        let christoffel = christoffel_with(g, &inverse)?;
        let torsion = antisymmetrize(&christoffel, "_i _j ^k");

        // anti-holomorphic derivatives of every connection component
        let anti_ops: Vec<DiffOp> = (0..n).map(|j| DiffOp::D(Dir::Anti(j))).collect();
        let dbar_gamma: Vec<Vec<Vec<C64>>> = christoffel
            .comps
            .iter()
            .map(|c| grid.apply(c, &anti_ops))
            .collect::<Result<_>>()?;

        let mut curvature_up = TensorField::zeros(grid, 4, "_i _jbar _k ^l");
        let mut dbar_torsion = TensorField::zeros(grid, 4, "_lbar _i _j ^k");
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let src = christoffel.index(&[i, k, l]);
                        let dst = curvature_up.index(&[i, j, k, l]);
                        curvature_up.comps[dst] = dbar_gamma[src][j].iter().map(|z| -z).collect();
                        // d_{jbar} T^l_{ik}
                        let swapped = christoffel.index(&[k, i, l]);
                        let dst = dbar_torsion.index(&[j, i, k, l]);
                        dbar_torsion.comps[dst] = dbar_gamma[src][j]
                            .iter()
                            .zip(&dbar_gamma[swapped][j])
                            .map(|(a, b)| a - b)
                            .collect();
                    }
                }
            }
        }
        let curvature = lower_last(&curvature_up, g);
        let ricci = ricci_form(g)?;

        let mut ricci_contraction = TensorField::zeros(grid, 2, "_i _jbar");
        let mut other_contraction = TensorField::zeros(grid, 2, "_i _jbar");
        for p in 0..np {
            let h = &inverse[p];
            for i in 0..n {
                for j in 0..n {
                    let mut a = ZERO;
                    let mut b = ZERO;
                    for k in 0..n {
                        for l in 0..n {
                            a += h.a[k][l] * curvature.comps[((i * n + j) * n + k) * n + l][p];
                            b += h.a[k][l] * curvature.comps[((k * n + l) * n + i) * n + j][p];
                        }
                    }
                    ricci_contraction.comps[i * n + j][p] = a;
                    other_contraction.comps[i * n + j][p] = b;
                }
            }
        }

        let mut torsion_pointwise = Vec::with_capacity(np);
        let mut dbar_torsion_pointwise = Vec::with_capacity(np);
        let mut buf3 = vec![ZERO; n * n * n];
        let mut buf4 = vec![ZERO; n * n * n * n];
        for p in 0..np {
            let frame = Frame::of(&g.at(p), p)?;
            for (c, v) in buf3.iter_mut().enumerate() {
                *v = torsion.comps[c][p];
            }
            torsion_pointwise
                .push(frame.norm_sq(&buf3, &[Slot::Lower, Slot::Lower, Slot::Upper]).sqrt());
            for (c, v) in buf4.iter_mut().enumerate() {
                *v = dbar_torsion.comps[c][p];
            }
            dbar_torsion_pointwise.push(
                frame
                    .norm_sq(&buf4, &[Slot::LowerBar, Slot::Lower, Slot::Lower, Slot::Upper])
                    .sqrt(),
            );
        }
        let torsion_norm = torsion_pointwise.iter().copied().fold(0.0, f64::max);
        let dbar_torsion_norm = dbar_torsion_pointwise.iter().copied().fold(0.0, f64::max);

        Ok(ChernPackage {
            metric: g.clone(),
            inverse,
            christoffel,
            torsion,
            dbar_torsion,
            curvature_up,
            curvature,
            ricci,
            ricci_contraction,
            other_contraction,
            torsion_pointwise,
            dbar_torsion_pointwise,
            torsion_norm,
            dbar_torsion_norm,
        })
    }

    pub fn grid(&self) -> &ComplexGrid {
        &self.metric.grid
    }

    /// Sup-norm of `g^{k lbar} R_{i jbar k lbar} - Ric_{i jbar}`.
    pub fn contraction_defect(&self) -> f64 {
        sup_diff(&self.ricci_contraction, &self.ricci)
    }

    /// Sup-norm of `g^{k lbar} R_{k lbar i jbar} - Ric_{i jbar}`.
    pub fn other_contraction_gap(&self) -> f64 {
        sup_diff(&self.other_contraction, &self.ricci)
    }

    /// Curvature components in the unitary frame at point `p`, stored `[a, b, c, d]`.
    pub fn frame_curvature(&self, p: usize) -> Result<Vec<C64>> {
        let n = self.metric.n();
        let frame = Frame::of(&self.metric.at(p), p)?;
        let mut v: Vec<C64> = (0..n.pow(4)).map(|c| self.curvature.comps[c][p]).collect();
        frame.transform(&mut v, &[Slot::Lower, Slot::LowerBar, Slot::Lower, Slot::LowerBar]);
        Ok(v)
    }

    /// Ricci matrix at point `p`.
    pub fn ricci_at(&self, p: usize) -> SmallMat {
        let n = self.metric.n();
        SmallMat::from_fn(n, |i, j| self.ricci.comps[i * n + j][p])
    }
}

fn sup_diff(a: &TensorField, b: &TensorField) -> f64 {
    crate::grid::sup_diff(&a.comps, &b.comps)
}

fn christoffel_with(g: &MetricField, inverse: &[SmallMat]) -> Result<TensorField> {
    let grid = &g.grid;
    let n = grid.n();
    let holo_ops: Vec<DiffOp> = (0..n).map(|i| DiffOp::D(Dir::Holo(i))).collect();
    // dg[c][i] = d_i g[c] with c = j * n + l
    let dg: Vec<Vec<Vec<C64>>> =
        g.comps.iter().map(|c| grid.apply(c, &holo_ops)).collect::<Result<_>>()?;
    let mut gamma = TensorField::zeros(grid, 3, "_i _j ^k");
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let dst = gamma.index(&[i, j, k]);
                for (p, out) in gamma.comps[dst].iter_mut().enumerate() {
                    let mut acc = ZERO;
                    for l in 0..n {
                        acc += inverse[p].a[k][l] * dg[j * n + l][i][p];
                    }
                    *out = acc;
                }
            }
        }
    }
    Ok(gamma)
}

fn antisymmetrize(gamma: &TensorField, signature: &'static str) -> TensorField {
    let n = gamma.grid.n();
    let mut t = TensorField::zeros(&gamma.grid, 3, signature);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let a = &gamma.comps[gamma.index(&[i, j, k])];
                let b = &gamma.comps[gamma.index(&[j, i, k])];
                let dst = t.index(&[i, j, k]);
                t.comps[dst] = a.iter().zip(b).map(|(x, y)| x - y).collect();
            }
        }
    }
    t
}

/// Lower the last (upper) index of a rank-4 tensor with `g_{p lbar}`.
fn lower_last(up: &TensorField, g: &MetricField) -> TensorField {
    let n = g.n();
    let mut low = TensorField::zeros(&g.grid, 4, "_i _jbar _k _lbar");
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let dst = low.index(&[i, j, k, l]);
                    let src: Vec<&Vec<C64>> =
                        (0..n).map(|p| &up.comps[up.index(&[i, j, k, p])]).collect();
                    for (pt, out) in low.comps[dst].iter_mut().enumerate() {
                        let mut acc = ZERO;
                        for (p, s) in src.iter().enumerate() {
                            acc += g.comps[p * n + l][pt] * s[pt];
                        }
                        *out = acc;
                    }
                }
            }
        }
    }
    low
}

/// `-d_i d_jbar log det g`.
fn ricci_form(g: &MetricField) -> Result<TensorField> {
    let grid = &g.grid;
    let n = grid.n();
    let ld: Vec<C64> = g.log_det()?.into_iter().map(|v| C64::new(v, 0.0)).collect();
    let ops: Vec<DiffOp> =
        (0..n * n).map(|c| DiffOp::DD(Dir::Holo(c / n), Dir::Anti(c % n))).collect();
    let mut ric = TensorField::zeros(grid, 2, "_i _jbar");
    for (dst, d) in ric.comps.iter_mut().zip(grid.apply(&ld, &ops)?) {
        *dst = d.into_iter().map(|z| -z).collect();
    }
    Ok(ric)
}

/// Connection coefficients `Gamma^k_{ij} = g^{k lbar} d_i g_{j lbar}`.
pub fn christoffel(g: &MetricField) -> Result<TensorField> {
    christoffel_with(g, &g.inverse_upper()?)
}

/// Torsion field with its pointwise and sup frame norms.
#[derive(Clone, Debug)]
pub struct Torsion {
    pub field: TensorField,
    pub dbar: TensorField,
    pub norm: f64,
    pub dbar_norm: f64,
}

pub fn torsion(g: &MetricField) -> Result<Torsion> {
    let pkg = ChernPackage::compute(g)?;
    Ok(Torsion {
        field: pkg.torsion,
        dbar: pkg.dbar_torsion,
        norm: pkg.torsion_norm,
        dbar_norm: pkg.dbar_torsion_norm,
    })
}

/// Curvature in both index placements.
#[derive(Clone, Debug)]
pub struct Curvature {
    pub up: TensorField,
    pub low: TensorField,
}

pub fn chern_curvature(g: &MetricField) -> Result<Curvature> {
    let inverse = g.inverse_upper()?;
    let gamma = christoffel_with(g, &inverse)?;
    let grid = &g.grid;
    let n = grid.n();
    let mut up = TensorField::zeros(grid, 4, "_i _jbar _k ^l");
    for i in 0..n {
        for k in 0..n {
            for l in 0..n {
                let src = &gamma.comps[gamma.index(&[i, k, l])];
                for j in 0..n {
                    let d = grid.apply_one(src, DiffOp::D(Dir::Anti(j)))?;
                    let dst = up.index(&[i, j, k, l]);
                    up.comps[dst] = d.into_iter().map(|z| -z).collect();
                }
            }
        }
    }
    let low = lower_last(&up, g);
    Ok(Curvature { up, low })
}

/// Chern-Ricci form from the log-determinant together with both traces of
/// the lowered curvature.
#[derive(Clone, Debug)]
pub struct Ricci {
    pub ricci: TensorField,
    pub contraction: TensorField,
    pub other_contraction: TensorField,
}

pub fn chern_ricci(g: &MetricField) -> Result<Ricci> {
    let pkg = ChernPackage::compute(g)?;
    Ok(Ricci {
        ricci: pkg.ricci,
        contraction: pkg.ricci_contraction,
        other_contraction: pkg.other_contraction,
    })
}

/// Only the Chern-Ricci form; the cheap path used inside time stepping.
pub fn ricci_only(g: &MetricField) -> Result<TensorField> {
    ricci_form(g)
}

/// Sup-norm of `d_k g_{i jbar} - d_i g_{k jbar}`, the coordinate form of `d theta`.
pub fn kahler_defect(g: &MetricField) -> Result<f64> {
    let grid = &g.grid;
    let n = grid.n();
    let ops: Vec<DiffOp> = (0..n).map(|i| DiffOp::D(Dir::Holo(i))).collect();
    let dg: Vec<Vec<Vec<C64>>> =
        g.comps.iter().map(|c| grid.apply(c, &ops)).collect::<Result<_>>()?;
    let mut sup: f64 = 0.0;
    for i in 0..n {
        for k in 0..n {
            for j in 0..n {
                for (a, b) in dg[i * n + j][k].iter().zip(&dg[k * n + j][i]) {
                    sup = sup.max((a - b).norm_sqr());
                }
            }
        }
    }
    Ok(sup.sqrt())
}
