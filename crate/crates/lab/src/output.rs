//! CSV persistence. Every file starts with a `# schema_version: 1` line;
//! floats use the shortest text that parses back to the same value.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use chernlab::cutoff::CutoffProfile;
use chernlab::estimates::MonitorRecord;

use crate::config::fmt_f64;
use crate::error::{LabError, LabResult};
use crate::runner::SnapshotRow;
use crate::SCHEMA_VERSION;

pub const TRAJECTORY_HEADER: [&str; 14] = [
    "t",
    "min_eig_g",
    "max_eig_g",
    "psi_min",
    "psi_max",
    "psidot_min",
    "psidot_max",
    "torsion_sup",
    "dbar_torsion_sup",
    "bk_min",
    "bk_max",
    "kahler_defect",
    "res_psi_evo",
    "res_lambda_evo",
];

pub const MONITORS_HEADER: [&str; 6] = ["monitor", "t", "measured", "bound", "margin", "verdict"];

pub const PROFILE_HEADER: [&str; 7] = ["s", "f", "phi", "F", "F1", "F2", "F3"];

/// Write a versioned CSV table.
pub fn write_table<I, R>(path: &Path, header: &[&str], rows: I) -> LabResult<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut file = File::create(path).map_err(LabError::io(path))?;
    writeln!(file, "# schema_version: {SCHEMA_VERSION}").map_err(LabError::io(path))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header).map_err(LabError::csv(path))?;
    for row in rows {
        w.write_record(row.into_iter()).map_err(LabError::csv(path))?;
    }
    w.flush().map_err(LabError::io(path))
}

fn floats(values: &[f64]) -> Vec<String> {
    values.iter().map(|v| fmt_f64(*v)).collect()
}

pub fn write_trajectory(path: &Path, rows: &[SnapshotRow]) -> LabResult<()> {
    write_table(path, &TRAJECTORY_HEADER, rows.iter().map(|r| floats(&r.values())))
}

pub fn write_monitors(path: &Path, records: &[MonitorRecord]) -> LabResult<()> {
    write_table(
        path,
        &MONITORS_HEADER,
        records.iter().map(|r| {
            let mut row = vec![r.monitor.clone()];
            row.extend(floats(&[r.t, r.measured, r.bound, r.margin]));
            row.push(r.verdict.to_string());
            row
        }),
    )
}

pub fn write_profile(path: &Path, profile: &CutoffProfile) -> LabResult<()> {
    write_table(path, &PROFILE_HEADER, profile.rows().map(|r| floats(&r)))
}

/// Two-column `name,value` table for scalar summaries.
pub fn write_pairs(path: &Path, header: [&str; 2], pairs: &[(String, f64)]) -> LabResult<()> {
    write_table(path, &header, pairs.iter().map(|(k, v)| vec![k.clone(), fmt_f64(*v)]))
}
