//! Machine-readable result files: the moment CSV, the drift CSV, and the
//! verdict JSON. Numbers use the shortest round-trip float formatting, so a
//! fixed seed reproduces the files byte for byte.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use msb_core::sim::{BoundednessVerdict, DriftReport, MomentSeries};

use crate::error::CliError;

/// `moments.csv` body: one row per recorded time.
pub fn moments_csv(series: &MomentSeries) -> String {
    let mut out = String::from("t,E_norm_x_sq,se_x,E_norm_x2_sq,se_x2,max_u_norm\n");
    for i in 0..series.times.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            series.times[i],
            series.mean_x_sq[i],
            series.se_x_sq[i],
            series.mean_x2_sq[i],
            series.se_x2_sq[i],
            series.window_max_control[i],
        );
    }
    out
}

/// `drift.csv` body: one row per probe.
pub fn drift_csv(report: &DriftReport) -> String {
    let mut out = String::from("probe_radius,estimate,se,threshold,pass\n");
    for probe in &report.probes {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            probe.probe_norm, probe.estimate, probe.se, report.threshold, probe.pass,
        );
    }
    out
}

#[derive(Debug, Serialize)]
pub struct VerdictFile {
    pub feasible: bool,
    pub bounded_pass: bool,
    pub zeta_hat: f64,
    pub seed: u64,
    pub scenario_sha256: String,
    pub tool_version: String,
}

pub fn verdict_json(
    verdict: &BoundednessVerdict,
    feasible: bool,
    seed: u64,
    scenario_sha256: &str,
) -> String {
    let file = VerdictFile {
        feasible,
        bounded_pass: verdict.pass,
        zeta_hat: verdict.zeta_hat,
        seed,
        scenario_sha256: scenario_sha256.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("verdict serializes");
    text.push('\n');
    text
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::Io(format!("{}: {e}", parent.display())))?;
        }
    }
    std::fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Best-effort removal of partial outputs after a failure.
pub fn remove_files(paths: &[&Path]) {
    for path in paths {
        let _ = std::fs::remove_file(path);
    }
}
