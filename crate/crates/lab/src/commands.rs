//! The non-scenario subcommands and output directory resolution.

use std::path::{Path, PathBuf};

use chernlab::chern::ChernPackage;
use chernlab::cutoff::{build_profile, check_profile, CutoffProfile};
use chernlab::identities::{bianchi_torsion_residual, commutation_residual, conformal_change};
use chernlab::metric::{random_metric, TrigPoly};
use chernlab::{ComplexGrid, Scheme};

use crate::error::{LabError, LabResult};
use crate::output;
use crate::OUT_ENV;

const DEFAULT_ROOT: &str = "chernlab-out";

/// Sup-norm amplitude of the random metric perturbation in `identities`.
pub const IDENTITY_AMPLITUDE: f64 = 0.2;
/// Sup-norm of the conformal factor in `identities`.
pub const CONFORMAL_AMPLITUDE: f64 = 0.2;

/// Output root: `--out`, else `$CHERNLAB_OUT`, else `chernlab-out`.
pub fn output_root(out: Option<&Path>) -> PathBuf {
    match out {
        Some(p) => p.to_path_buf(),
        None => std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_ROOT)),
    }
}

/// Directory of one scenario. `--out` wins over the config's `output.dir`,
/// which wins over the environment default; roots get the config stem appended.
pub fn scenario_dir(out: Option<&Path>, config_dir: Option<&str>, stem: &str) -> PathBuf {
    match (out, config_dir) {
        (None, Some(dir)) => PathBuf::from(dir),
        _ => output_root(out).join(stem),
    }
}

/// Identity residuals of one seeded random metric, as `(quantity, value)`.
pub fn identities(seed: u64, n: usize, size: usize, scheme: Scheme) -> LabResult<Vec<(String, f64)>> {
    let grid = ComplexGrid::new(n, size, scheme)?;
    let g = random_metric(&grid, IDENTITY_AMPLITUDE, seed);
    let pkg = ChernPackage::compute(&g)?;
    let comm = commutation_residual(&pkg, seed)?;
    let bianchi = bianchi_torsion_residual(&pkg)?;
    let f = TrigPoly::random(n, 3, seed ^ 0x5EED).normalized_value(CONFORMAL_AMPLITUDE).sample(&grid);
    let (_, _, conf) = conformal_change(&g, &f)?;
    let mut out = vec![
        ("commutation_vector".to_string(), comm.vector),
        ("commutation_form".to_string(), comm.form),
    ];
    out.extend(bianchi.0.iter().enumerate().map(|(i, v)| (format!("bianchi_{}", i + 1), *v)));
    out.extend([
        ("conformal_christoffel".to_string(), conf.christoffel),
        ("conformal_torsion".to_string(), conf.torsion),
        ("conformal_curvature".to_string(), conf.curvature),
        ("conformal_ricci".to_string(), conf.ricci),
        ("contraction_defect".to_string(), pkg.contraction_defect()),
        ("torsion_sup".to_string(), pkg.torsion_norm),
    ]);
    Ok(out)
}

pub fn write_identities(dir: &Path, rows: &[(String, f64)]) -> LabResult<()> {
    std::fs::create_dir_all(dir).map_err(LabError::io(dir))?;
    output::write_pairs(&dir.join("identities.csv"), ["quantity", "value"], rows)
}

/// Profile table and its check summary.
pub fn profile(kappa: f64, nodes: usize) -> LabResult<(CutoffProfile, Vec<(String, f64)>)> {
    let profile = build_profile(kappa, nodes)?;
    let check = check_profile(&profile, 3)?;
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    let mut summary: Vec<(String, f64)> = check
        .weighted_sup
        .iter()
        .enumerate()
        .map(|(k, v)| (format!("weighted_sup_{}", k + 1), *v))
        .collect();
    summary.extend([
        ("max_dphi".to_string(), check.max_dphi),
        ("monotone".to_string(), flag(check.monotone)),
        ("zero_before_transition".to_string(), flag(check.zero_before_transition)),
        ("c2".to_string(), check.c2),
        ("c3".to_string(), check.c3),
    ]);
    Ok((profile, summary))
}

pub fn write_profile(dir: &Path, profile: &CutoffProfile, summary: &[(String, f64)]) -> LabResult<()> {
    std::fs::create_dir_all(dir).map_err(LabError::io(dir))?;
    output::write_profile(&dir.join("profile.csv"), profile)?;
    output::write_pairs(&dir.join("profile_check.csv"), ["quantity", "value"], summary)
}
