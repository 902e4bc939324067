//! Plot-ready tidy CSVs, one per figure concept.

use std::path::Path;

use anyhow::{bail, Result};
use selkov_lattice::report::{fmt_f64, write_csv};
use selkov_lattice::{MomentReport, StudyReport, TailReport};

/// Moment-check outcome: one row per violation (none means the bound held).
pub fn write_violation_summary(path: impl AsRef<Path>, report: &MomentReport) -> Result<()> {
    let rows: Vec<Vec<String>> = report
        .violations
        .iter()
        .map(|m| {
            let k = report.m_grid.iter().position(|x| x == m).unwrap();
            vec![
                m.to_string(),
                fmt_f64(report.estimated[k]),
                fmt_f64(report.ci_halfwidth[k]),
                fmt_f64(report.bound[k]),
            ]
        })
        .collect();
    write_csv(path, &["m", "estimate", "ci_halfwidth", "bound"], rows)?;
    Ok(())
}

/// Tail mass against the cutoff at the final recorded step.
pub fn write_tail_profile(path: impl AsRef<Path>, report: &TailReport) -> Result<()> {
    let Some(last) = report.estimates.last() else {
        bail!("empty tail report");
    };
    let m = report.m_grid.last().unwrap();
    let rows: Vec<Vec<String>> = report
        .i_grid
        .iter()
        .zip(last)
        .map(|(cutoff, (mean, hw))| {
            vec![
                m.to_string(),
                cutoff.to_string(),
                fmt_f64(*mean),
                fmt_f64(mean - hw),
                fmt_f64(mean + hw),
            ]
        })
        .collect();
    write_csv(path, &["m", "cutoff", "estimate", "ci_low", "ci_high"], rows)?;
    Ok(())
}

fn aggregated_rows(
    report: &StudyReport,
    statistic: &str,
    x_of: impl Fn(&selkov_lattice::StudyRow) -> String,
) -> Vec<Vec<String>> {
    report
        .rows
        .iter()
        .filter(|r| r.statistic == statistic)
        .map(|r| {
            vec![
                x_of(r),
                fmt_f64(r.value),
                r.ci_low.map(fmt_f64).unwrap_or_default(),
                r.ci_high.map(fmt_f64).unwrap_or_default(),
            ]
        })
        .collect()
}

/// Distance between successive-dt invariant measures, aggregated over seeds.
pub fn write_distance_vs_dt(path: impl AsRef<Path>, report: &StudyReport) -> Result<()> {
    let rows = aggregated_rows(report, "bl_to_next_dt_mean", |r| fmt_f64(r.dt));
    if rows.is_empty() {
        bail!("empty dt study");
    }
    write_csv(path, &["dt", "distance", "ci_low", "ci_high"], rows)?;
    Ok(())
}

/// Distance to the reference truncation per N, aggregated over seeds.
pub fn write_distance_vs_n(path: impl AsRef<Path>, report: &StudyReport) -> Result<()> {
    let rows = aggregated_rows(report, "bl_to_reference_mean", |r| r.n.to_string());
    if rows.is_empty() {
        bail!("empty n study");
    }
    write_csv(path, &["n", "distance", "ci_low", "ci_high"], rows)?;
    Ok(())
}

/// Coupled-gap exceedance frequencies per N and eta.
pub fn write_exceedance_vs_n(path: impl AsRef<Path>, report: &StudyReport) -> Result<()> {
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .filter(|r| r.statistic.starts_with("exceedance_eta_"))
        .map(|r| {
            vec![
                r.n.to_string(),
                r.statistic.trim_start_matches("exceedance_eta_").to_string(),
                fmt_f64(r.value),
                r.ci_low.map(fmt_f64).unwrap_or_default(),
                r.ci_high.map(fmt_f64).unwrap_or_default(),
            ]
        })
        .collect();
    if rows.is_empty() {
        bail!("empty exceedance table");
    }
    write_csv(path, &["n", "eta", "frequency", "ci_low", "ci_high"], rows)?;
    Ok(())
}

/// Distance matrix cells (dt, n) -> mean distance to the reference cell.
pub fn write_double_limit_matrix(path: impl AsRef<Path>, report: &StudyReport) -> Result<()> {
    let rows = report
        .rows
        .iter()
        .filter(|r| r.statistic == "bl_to_reference_mean")
        .map(|r| {
            vec![
                fmt_f64(r.dt),
                r.n.to_string(),
                fmt_f64(r.value),
                r.ci_low.map(fmt_f64).unwrap_or_default(),
                r.ci_high.map(fmt_f64).unwrap_or_default(),
            ]
        })
        .collect::<Vec<_>>();
    if rows.is_empty() {
        bail!("empty double-limit study");
    }
    write_csv(path, &["dt", "n", "distance", "ci_low", "ci_high"], rows)?;
    Ok(())
}
