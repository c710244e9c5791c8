//! JSON/CSV writers for diagnostics, solve history and refinement tables.

use crate::refine::{Level, RefinementRow};
use mfg_core::coupled::OuterRecord;
use mfg_core::estimates::DiagnosticsReport;
use std::path::Path;

pub const DIAGNOSTICS_HEADER: [&str; 16] = [
    "lower_bound_margin",
    "duality_residual",
    "energy_mgq2",
    "energy_g",
    "energy_mfm",
    "entropy_max",
    "sqrt_m_h1_sum",
    "m_lalpha",
    "dhm_lalpha",
    "dtm_hminus1",
    "kh_worst_mass_drift",
    "kh_worst_min",
    "eta",
    "eps",
    "alpha_density",
    "alpha_gradient",
];

fn diagnostics_fields(report: &DiagnosticsReport) -> [f64; 16] {
    [
        report.lower_bound_margin,
        report.duality_residual,
        report.energy_mgq2,
        report.energy_g,
        report.energy_mfm,
        report.entropy_max,
        report.sqrt_m_h1_sum,
        report.m_lalpha,
        report.dhm_lalpha,
        report.dtm_hminus1,
        report.kh_worst_mass_drift,
        report.kh_worst_min,
        report.eta,
        report.eps,
        report.alpha_density,
        report.alpha_gradient,
    ]
}

pub fn write_diagnostics_json(path: &Path, report: &DiagnosticsReport) -> anyhow::Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(report)?)?;
    Ok(())
}

pub fn write_diagnostics_csv(path: &Path, report: &DiagnosticsReport) -> anyhow::Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(DIAGNOSTICS_HEADER)?;
    writer.write_record(diagnostics_fields(report).map(|v| format!("{v:.17e}")))?;
    writer.flush()?;
    Ok(())
}

pub fn write_history_csv(path: &Path, history: &[OuterRecord]) -> anyhow::Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["iteration", "delta"])?;
    for record in history {
        writer.write_record([record.iteration.to_string(), format!("{:.17e}", record.delta)])?;
    }
    writer.flush()?;
    Ok(())
}

fn optional(value: Option<f64>) -> String {
    value.map(|v| format!("{v:.17e}")).unwrap_or_default()
}

pub fn write_refinement_csv(path: &Path, rows: &[RefinementRow]) -> anyhow::Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["coarse", "fine", "diff_u_l1q", "diff_m_l1q", "ratio_u", "ratio_m"])?;
    for row in rows {
        writer.write_record([
            row.coarse.to_string(),
            row.fine.to_string(),
            optional(row.diff_u),
            optional(row.diff_m),
            optional(row.ratio_u),
            optional(row.ratio_m),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Per-level diagnostics: one row per solved level (refinement boundedness
/// studies read ratios off this table).
pub fn write_level_diagnostics_csv(
    path: &Path,
    rows: &[(Level, Option<DiagnosticsReport>)],
) -> anyhow::Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec!["level".to_string()];
    header.extend(DIAGNOSTICS_HEADER.iter().map(|s| s.to_string()));
    writer.write_record(&header)?;
    for (level, report) in rows {
        let mut record = vec![level.to_string()];
        match report {
            Some(r) => record.extend(diagnostics_fields(r).map(|v| format!("{v:.17e}"))),
            None => record.extend(std::iter::repeat_n(String::new(), DIAGNOSTICS_HEADER.len())),
        }
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}
