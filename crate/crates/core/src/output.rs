//! CSV emission. Numbers are written with 17 significant digits so that
//! every `f64` round-trips exactly and runs can be diffed byte for byte.

use crate::basestate::BaseState;
use crate::error::{Error, Result};
use crate::radiative::BasicRadiation;
use crate::stability::{CriticalMode, NeutralBranch};
use std::io::Write;
use std::path::Path;

/// `v` with 17 significant digits in scientific notation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

/// Writes a header row and then every record.
pub fn write_csv<W: Write>(out: W, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(out);
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(std::io::BufWriter::new(file), header, rows)
}

fn numeric_rows(columns: &[&[f64]]) -> Vec<Vec<String>> {
    let n = columns.first().map_or(0, |c| c.len());
    (0..n).map(|i| columns.iter().map(|c| fmt_f64(c[i])).collect()).collect()
}

pub const RADIATION_HEADER: [&str; 5] = ["tau", "G", "q", "G_collimated", "q_collimated"];

pub fn radiation_rows(rad: &BasicRadiation) -> Vec<Vec<String>> {
    numeric_rows(&[rad.tau_grid.points(), &rad.g, &rad.q, &rad.g_coll, &rad.q_coll])
}

pub const BASE_STATE_HEADER: [&str; 8] = ["z", "n_s", "tau", "G_s", "q_s", "G_s_collimated", "M_s", "dM_dG"];

pub fn base_state_rows(bs: &BaseState) -> Vec<Vec<String>> {
    numeric_rows(&[bs.z(), &bs.n_s, &bs.tau_of_z, &bs.g_s, &bs.q_s, &bs.g_s_coll, &bs.m_s, &bs.dmdg])
}

pub const BRANCH_HEADER: [&str; 4] = ["k", "R", "sigma", "branch_kind"];

/// One row per neutral point, stationary branch first.
pub fn branch_rows(branches: &[NeutralBranch]) -> Vec<Vec<String>> {
    branches
        .iter()
        .flat_map(|b| {
            b.points
                .iter()
                .map(move |p| vec![fmt_f64(p.k), fmt_f64(p.r), fmt_f64(p.sigma), b.kind.as_str().to_string()])
        })
        .collect()
}

/// Table column order, followed by the extra critical-mode fields.
pub const SUMMARY_HEADER: [&str; 13] = [
    "Vc",
    "tauH",
    "omega",
    "B",
    "theta_i",
    "A1",
    "lambda_c",
    "R_c",
    "Im_gamma",
    "k_c",
    "overstable",
    "mode_number",
    "status",
];

pub fn summary_row(p: &crate::basestate::SuspensionParams, cm: &CriticalMode) -> Vec<String> {
    let mut row: Vec<String> = [p.vc, p.tau_h, p.omega, p.b, p.theta_i_deg, p.a1, cm.lambda_c, cm.r_c, cm.sigma_c, cm.k_c]
        .iter()
        .map(|&v| fmt_f64(v))
        .collect();
    row.push(cm.overstable.to_string());
    row.push(cm.mode_number.to_string());
    row.push("ok".into());
    row
}

/// Summary row for a case whose solve failed; numeric fields are empty.
pub fn failed_summary_row(p: &crate::basestate::SuspensionParams, stage: &str) -> Vec<String> {
    let mut row: Vec<String> = [p.vc, p.tau_h, p.omega, p.b, p.theta_i_deg, p.a1].iter().map(|&v| fmt_f64(v)).collect();
    row.extend(std::iter::repeat_n(String::new(), 6));
    row.push(format!("failed: {stage}"));
    row
}
