//! Two-sided residuals of the Chern commutation formulas, the torsion Bianchi
//! identities and the conformal change laws.
//!
//! Every residual evaluates both sides on the grid with the grid's own
//! derivative operators and reports the sup-norm of the difference. Lowered
//! torsion conventions:
//!
//! * `T_{i k lbar} = g_{p lbar} T^p_{ik}`
//! * `T_{jbar lbar k} = g_{k qbar} conj(T^q_{jl})`
//!
//! Covariant derivatives act on unbarred lower indices through `Gamma` for
//! holomorphic directions and on barred lower indices through
//! `conj(Gamma)` for antiholomorphic directions; all other actions are
//! trivial.

use crate::chern::ChernPackage;
use crate::error::{Error, Result};
use crate::grid::{ComplexGrid, DiffOp, Dir, TensorField, C64};
use crate::metric::{MetricField, TrigPoly};
use crate::rng::SeedStream;

fn d(grid: &ComplexGrid, data: &[C64], dir: Dir) -> Result<Vec<C64>> {
    grid.apply_one(data, DiffOp::D(dir))
}

/// Random complex band-limited field with unit-order values.
fn random_complex(grid: &ComplexGrid, seed: u64) -> Vec<C64> {
    let mut s = SeedStream::new(seed);
    let re = TrigPoly::random(grid.n(), 3, s.next_u64()).normalized_value(1.0);
    let im = TrigPoly::random(grid.n(), 3, s.next_u64()).normalized_value(1.0);
    re.sample(grid)
        .into_iter()
        .zip(im.sample(grid))
        .map(|(a, b)| C64::new(a, b))
        .collect()
}

/// Sup-norms of the two commutation residuals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CommutationResidual {
    /// `[nabla_i, nabla_jbar] X^l - R_{i jbar k}^l X^k`
    pub vector: f64,
    /// `[nabla_i, nabla_jbar] a_k + R_{i jbar k}^l a_l`
    pub form: f64,
}

impl CommutationResidual {
    pub fn max(&self) -> f64 {
        self.vector.max(self.form)
    }
}

pub fn commutation_residual(pkg: &ChernPackage, seed: u64) -> Result<CommutationResidual> {
    let grid = pkg.grid();
    let n = grid.n();
    let np = grid.num_points();
    let gamma = &pkg.christoffel;
    let r_up = &pkg.curvature_up;
    let mut seeds = SeedStream::new(seed);
    let x: Vec<Vec<C64>> = (0..n).map(|_| random_complex(grid, seeds.next_u64())).collect();
    let a: Vec<Vec<C64>> = (0..n).map(|_| random_complex(grid, seeds.next_u64())).collect();

    let mut vector: f64 = 0.0;
    let mut form: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            // Y^l = d_jbar X^l ; B_k = d_jbar a_k
            let y: Vec<Vec<C64>> = x.iter().map(|c| d(grid, c, Dir::Anti(j))).collect::<Result<_>>()?;
            let b: Vec<Vec<C64>> = a.iter().map(|c| d(grid, c, Dir::Anti(j))).collect::<Result<_>>()?;
            for l in 0..n {
                // nabla_i (nabla_jbar X)^l = d_i Y^l + Gamma^l_{ik} Y^k
                let dy = d(grid, &y[l], Dir::Holo(i))?;
                // nabla_i X^l = d_i X^l + Gamma^l_{ik} X^k, then d_jbar
                let dx = d(grid, &x[l], Dir::Holo(i))?;
                let zx: Vec<C64> = (0..np)
                    .map(|p| dx[p] + (0..n).map(|k| gamma.at(p, &[i, k, l]) * x[k][p]).sum::<C64>())
                    .collect();
                let dzx = d(grid, &zx, Dir::Anti(j))?;
                for p in 0..np {
                    let lhs = dy[p] + (0..n).map(|k| gamma.at(p, &[i, k, l]) * y[k][p]).sum::<C64>()
                        - dzx[p];
                    let rhs: C64 = (0..n).map(|k| r_up.at(p, &[i, j, k, l]) * x[k][p]).sum();
                    vector = vector.max((lhs - rhs).norm_sqr());
                }
                // form, with free index k := l
                let k = l;
                let db = d(grid, &b[k], Dir::Holo(i))?;
                let da = d(grid, &a[k], Dir::Holo(i))?;
                let za: Vec<C64> = (0..np)
                    .map(|p| da[p] - (0..n).map(|q| gamma.at(p, &[i, k, q]) * a[q][p]).sum::<C64>())
                    .collect();
                let dza = d(grid, &za, Dir::Anti(j))?;
                for p in 0..np {
                    let lhs = db[p] - (0..n).map(|q| gamma.at(p, &[i, k, q]) * b[q][p]).sum::<C64>()
                        - dza[p];
                    let rhs: C64 = (0..n).map(|q| r_up.at(p, &[i, j, k, q]) * a[q][p]).sum();
                    form = form.max((lhs + rhs).norm_sqr());
                }
            }
        }
    }
    Ok(CommutationResidual { vector: vector.sqrt(), form: form.sqrt() })
}

/// Sup-norms of the five torsion Bianchi residuals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BianchiResidual(pub [f64; 5]);

impl BianchiResidual {
    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }
}

fn lowered_torsion(pkg: &ChernPackage) -> (TensorField, TensorField) {
    let grid = pkg.grid();
    let n = grid.n();
    let g = &pkg.metric;
    let t = &pkg.torsion;
    let mut low = TensorField::zeros(grid, 3, "_i _k _lbar");
    let mut bar = TensorField::zeros(grid, 3, "_jbar _lbar _k");
    for i in 0..n {
        for k in 0..n {
            for l in 0..n {
                let dst = low.index(&[i, k, l]);
                let dstb = bar.index(&[i, k, l]);
                for p in 0..grid.num_points() {
                    low.comps[dst][p] =
                        (0..n).map(|q| g.comps[q * n + l][p] * t.at(p, &[i, k, q])).sum();
                    // T_{ibar kbar l} = g_{l qbar} conj(T^q_{ik})
                    bar.comps[dstb][p] =
                        (0..n).map(|q| g.comps[l * n + q][p] * t.at(p, &[i, k, q]).conj()).sum();
                }
            }
        }
    }
    (low, bar)
}

/// Point-major copy: `out[p * ncomp + c]`.
fn point_major(comps: &[Vec<C64>]) -> Vec<C64> {
    let nc = comps.len();
    let np = comps.first().map_or(0, |c| c.len());
    let mut out = vec![C64::new(0.0, 0.0); nc * np];
    // tiled so the scattered writes stay in cache
    const TILE: usize = 64;
    for start in (0..np).step_by(TILE) {
        let end = (start + TILE).min(np);
        for (c, comp) in comps.iter().enumerate() {
            for p in start..end {
                out[p * nc + c] = comp[p];
            }
        }
    }
    out
}

pub fn bianchi_torsion_residual(pkg: &ChernPackage) -> Result<BianchiResidual> {
    let grid = pkg.grid();
    let n = grid.n();
    let np = grid.num_points();
    let (n3, n4) = (n * n * n, n * n * n * n);
    let (tlow, tbar) = lowered_torsion(pkg);
    let holo: Vec<DiffOp> = (0..n).map(|i| DiffOp::D(Dir::Holo(i))).collect();
    let anti: Vec<DiffOp> = (0..n).map(|i| DiffOp::D(Dir::Anti(i))).collect();

    let gam = point_major(&pkg.christoffel.comps);
    let tor = point_major(&pkg.torsion.comps);
    let r = point_major(&pkg.curvature.comps);
    let tl = point_major(&tlow.comps);
    let tb = point_major(&tbar.comps);
    // dtl[(j * n3 + c)] = d_jbar T_{c}, dtb[(i * n3 + c)] = d_i T_{c}
    let deriv = |t: &TensorField, ops: &[DiffOp]| -> Result<Vec<C64>> {
        let mut flat = vec![Vec::new(); n * n3];
        for (c, comp) in t.comps.iter().enumerate() {
            for (dir, v) in grid.apply(comp, ops)?.into_iter().enumerate() {
                flat[dir * n3 + c] = v;
            }
        }
        Ok(point_major(&flat))
    };
    let dtl = deriv(&tlow, &anti)?;
    let dtb = deriv(&tbar, &holo)?;
    drop((tlow, tbar));

    let i3 = |a: usize, b: usize, c: usize| (a * n + b) * n + c;
    let i4 = |a: usize, b: usize, c: usize, d: usize| ((a * n + b) * n + c) * n + d;
    let i5 = |a: usize, b: usize, c: usize, d: usize, e: usize| i4(a, b, c, d) * n + e;

    let zero = C64::new(0.0, 0.0);
    let mut res = [0.0f64; 5];
    // nbl[i4(j, i, k, l)] = nabla_jbar T_{i k lbar}; nb[i4(i, j, l, k)] = nabla_i T_{jbar lbar k}
    let mut nbl = [zero; 16];
    let mut nb = [zero; 16];
    for p in 0..np {
        let g = &gam[p * n3..(p + 1) * n3];
        let rp = &r[p * n4..(p + 1) * n4];
        let tlp = &tl[p * n3..(p + 1) * n3];
        let tbp = &tb[p * n3..(p + 1) * n3];
        let dtlp = &dtl[p * n * n3..(p + 1) * n * n3];
        let dtbp = &dtb[p * n * n3..(p + 1) * n * n3];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let mut v = dtlp[a * n3 + i3(b, c, d)];
                        let mut w = dtbp[a * n3 + i3(b, c, d)];
                        for q in 0..n {
                            v -= g[i3(a, d, q)].conj() * tlp[i3(b, c, q)];
                            w -= g[i3(a, d, q)] * tbp[i3(b, c, q)];
                        }
                        nbl[i4(a, b, c, d)] = v;
                        nb[i4(a, b, c, d)] = w;
                    }
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let base = rp[i4(i, j, k, l)];
                        let e1 = base - rp[i4(k, j, i, l)] + nbl[i4(j, i, k, l)];
                        let e2 = base - rp[i4(i, l, k, j)] + nb[i4(i, j, l, k)];
                        let sym = base - rp[i4(k, l, i, j)];
                        let e3a = sym + nbl[i4(j, i, k, l)] + nb[i4(k, j, l, i)];
                        let e3b = sym + nb[i4(i, j, l, k)] + nbl[i4(l, i, k, j)];
                        res[0] = res[0].max(e1.norm_sqr());
                        res[1] = res[1].max(e2.norm_sqr());
                        res[2] = res[2].max(e3a.norm_sqr()).max(e3b.norm_sqr());
                    }
                }
            }
        }
    }
    drop((dtl, dtb));

    // Differential identities from all first derivatives of the curvature.
    let r_comps = &pkg.curvature.comps;
    let mut dr_holo = vec![Vec::new(); n4 * n];
    let mut dr_anti = vec![Vec::new(); n4 * n];
    let both: Vec<DiffOp> = holo.iter().chain(&anti).copied().collect();
    for (c, comp) in r_comps.iter().enumerate() {
        let mut d = grid.apply(comp, &both)?;
        let a = d.split_off(n);
        for (dir, v) in d.into_iter().enumerate() {
            dr_holo[dir * n4 + c] = v;
        }
        for (dir, v) in a.into_iter().enumerate() {
            dr_anti[dir * n4 + c] = v;
        }
    }
    let drh = point_major(&dr_holo);
    drop(dr_holo);
    let dra = point_major(&dr_anti);
    drop(dr_anti);
    // nr[i5(p, i, j, k, l)] = nabla_p R_{i jbar k lbar}; nq[i5(q, i, j, k, l)] = nabla_qbar R_{i jbar k lbar}
    let mut nr = [zero; 32];
    let mut nq = [zero; 32];
    for pt in 0..np {
        let g = &gam[pt * n3..(pt + 1) * n3];
        let t = &tor[pt * n3..(pt + 1) * n3];
        let rp = &r[pt * n4..(pt + 1) * n4];
        let dh = &drh[pt * n * n4..(pt + 1) * n * n4];
        let da = &dra[pt * n * n4..(pt + 1) * n * n4];
        for p in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            let c = i4(i, j, k, l);
                            let mut v = dh[p * n4 + c];
                            let mut w = da[p * n4 + c];
                            for s in 0..n {
                                v -= g[i3(p, i, s)] * rp[i4(s, j, k, l)]
                                    + g[i3(p, k, s)] * rp[i4(i, j, s, l)];
                                w -= g[i3(p, j, s)].conj() * rp[i4(i, s, k, l)]
                                    + g[i3(p, l, s)].conj() * rp[i4(i, j, k, s)];
                            }
                            nr[i5(p, i, j, k, l)] = v;
                            nq[i5(p, i, j, k, l)] = w;
                        }
                    }
                }
            }
        }
        for a in 0..n {
            for b in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            // a = p, b = i
                            let mut e = nr[i5(a, b, j, k, l)] - nr[i5(b, a, j, k, l)];
                            // a = q, b = j, with j := i slot reused as the first index
                            let (i, q, jj) = (j, a, b);
                            let mut f = nq[i5(q, i, jj, k, l)] - nq[i5(jj, i, q, k, l)];
                            for s in 0..n {
                                e += t[i3(a, b, s)] * rp[i4(s, j, k, l)];
                                f += t[i3(q, jj, s)].conj() * rp[i4(i, s, k, l)];
                            }
                            res[3] = res[3].max(e.norm_sqr());
                            res[4] = res[4].max(f.norm_sqr());
                        }
                    }
                }
            }
        }
    }
    Ok(BianchiResidual(res.map(f64::sqrt)))
}

/// Residuals of the four conformal laws: prediction from `(g, F)` minus
/// direct recomputation on `h = e^{2F} g`.
#[derive(Clone, Debug)]
pub struct ConformalResidual {
    pub christoffel: f64,
    pub torsion: f64,
    pub curvature: f64,
    pub ricci: f64,
}

impl ConformalResidual {
    pub fn max(&self) -> f64 {
        self.christoffel.max(self.torsion).max(self.curvature).max(self.ricci)
    }
}

/// Predicted quantities for `h = e^{2F} g`.
#[derive(Clone, Debug)]
pub struct ConformalPrediction {
    pub christoffel: TensorField,
    pub torsion: TensorField,
    /// Stored `[k, l, i, j]` as `R~_{k lbar i jbar}`.
    pub curvature: TensorField,
    pub ricci: TensorField,
}

fn sup_diff(a: &TensorField, b: &TensorField) -> f64 {
    crate::grid::sup_diff(&a.comps, &b.comps)
}

/// Apply the conformal laws to the package of `g` with `F` sampled on the grid.
pub fn conformal_prediction(pkg: &ChernPackage, f: &[f64]) -> Result<ConformalPrediction> {
    let grid = pkg.grid();
    let n = grid.n();
    let np = grid.num_points();
    if f.len() != np {
        return Err(Error::GridMismatch);
    }
    let fc: Vec<C64> = f.iter().map(|&v| C64::new(v, 0.0)).collect();
    let first: Vec<DiffOp> = (0..n).map(|i| DiffOp::D(Dir::Holo(i))).collect();
    let fi = grid.apply(&fc, &first)?;
    let mixed: Vec<DiffOp> =
        (0..n * n).map(|c| DiffOp::DD(Dir::Holo(c / n), Dir::Anti(c % n))).collect();
    let fkl = grid.apply(&fc, &mixed)?;
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };

    let mut christoffel = pkg.christoffel.clone();
    let mut torsion = pkg.torsion.clone();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let c = christoffel.index(&[i, j, k]);
                for p in 0..np {
                    christoffel.comps[c][p] += fi[i][p] * 2.0 * delta(j, k);
                    torsion.comps[c][p] += fi[i][p] * 2.0 * delta(j, k) - fi[j][p] * 2.0 * delta(i, k);
                }
            }
        }
    }
    let mut curvature = pkg.curvature.clone();
    for k in 0..n {
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let c = curvature.index(&[k, l, i, j]);
                    for p in 0..np {
                        let gij = pkg.metric.comps[i * n + j][p];
                        curvature.comps[c][p] = (curvature.comps[c][p] - gij * fkl[k * n + l][p] * 2.0)
                            * (2.0 * f[p]).exp();
                    }
                }
            }
        }
    }
    let mut ricci = pkg.ricci.clone();
    for (c, comp) in ricci.comps.iter_mut().enumerate() {
        for (p, z) in comp.iter_mut().enumerate() {
            *z -= fkl[c][p] * (2.0 * n as f64);
        }
    }
    Ok(ConformalPrediction { christoffel, torsion, curvature, ricci })
}

/// Returns `h = e^{2F} g`, the predicted package and the law residuals.
pub fn conformal_change(
    g: &MetricField,
    f: &[f64],
) -> Result<(MetricField, ConformalPrediction, ConformalResidual)> {
    let pkg = ChernPackage::compute(g)?;
    let pred = conformal_prediction(&pkg, f)?;
    let h = g.conformal(f);
    let direct = ChernPackage::compute(&h)?;
    let res = ConformalResidual {
        christoffel: sup_diff(&pred.christoffel, &direct.christoffel),
        torsion: sup_diff(&pred.torsion, &direct.torsion),
        curvature: sup_diff(&pred.curvature, &direct.curvature),
        ricci: sup_diff(&pred.ricci, &direct.ricci),
    };
    Ok((h, pred, res))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Scheme;
    use crate::metric::{kahler_potential, random_metric};

    #[test]
    fn flat_residuals_vanish() {
        let gr = ComplexGrid::new(2, 8, Scheme::Spectral).unwrap();
        let pkg = ChernPackage::compute(&MetricField::flat(&gr)).unwrap();
        assert!(commutation_residual(&pkg, 1).unwrap().max() < 1e-12);
        assert!(bianchi_torsion_residual(&pkg).unwrap().max() < 1e-12);
    }

    #[test]
    fn kahler_bianchi_reduces_to_symmetries() {
        let gr = ComplexGrid::new(2, 16, Scheme::Spectral).unwrap();
        let pkg = ChernPackage::compute(&kahler_potential(&gr, 0.1, 4).unwrap()).unwrap();
        assert!(pkg.torsion_norm < 1e-8);
        let b = bianchi_torsion_residual(&pkg).unwrap();
        assert!(b.max() < 1e-6, "{b:?} {}", pkg.torsion_norm);
    }

    #[test]
    fn random_metric_identities_small() {
        let gr = ComplexGrid::new(2, 16, Scheme::Spectral).unwrap();
        let pkg = ChernPackage::compute(&random_metric(&gr, 0.1, 3)).unwrap();
        assert!(pkg.torsion_norm > 1e-3);
        let c = commutation_residual(&pkg, 3).unwrap();
        let b = bianchi_torsion_residual(&pkg).unwrap();
        assert!(c.max() < 1e-7, "{c:?}");
        assert!(b.max() < 1e-7, "{b:?}");
    }

    #[test]
    fn constant_conformal_factor_is_scaling() {
        let gr = ComplexGrid::new(2, 8, Scheme::Spectral).unwrap();
        let g = random_metric(&gr, 0.1, 8);
        let f = vec![0.3; gr.num_points()];
        let (_, _, res) = conformal_change(&g, &f).unwrap();
        assert!(res.max() < 1e-12, "{res:?}");
    }
}
