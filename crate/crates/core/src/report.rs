//! CSV serialization of trajectories, measures, and study reports.
//!
//! Floats are written with the shortest round-trip representation, so a
//! re-parsed file reproduces the report exactly and identical runs produce
//! byte-identical output.

use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::field::PairState;
use crate::measure::EmpiricalMeasure;
use crate::scheme::Trajectory;
use crate::study::{MomentReport, StudyReport, StudyRow, TailReport};

pub fn fmt_f64(x: f64) -> String {
    let magnitude = x.abs();
    if x != 0.0 && (magnitude < 1e-4 || magnitude >= 1e16) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn write_csv<P: AsRef<Path>>(
    path: P,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

impl From<csv::Error> for crate::error::CoreError {
    fn from(e: csv::Error) -> Self {
        crate::error::CoreError::Io(std::io::Error::other(e))
    }
}

/// Trajectory dump: commented key=value header (dt, n, seed, params hash),
/// then rows (step, site, u, v).
pub fn write_trajectory_csv<P: AsRef<Path>>(
    path: P,
    trajectory: &Trajectory,
    seed: u64,
    params_hash: &str,
) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    writeln!(file, "# dt={}", fmt_f64(trajectory.dt))?;
    writeln!(
        file,
        "# n_sites={}",
        trajectory.states.first().map_or(0, |s| s.radius())
    )?;
    writeln!(file, "# seed={seed}")?;
    writeln!(file, "# params_hash={params_hash}")?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["step", "site", "u", "v"])?;
    for (j, state) in trajectory.states.iter().enumerate() {
        let step = trajectory.step_of(j);
        for site in state.u.sites() {
            w.write_record([
                step.to_string(),
                site.to_string(),
                fmt_f64(state.u.get(site)),
                fmt_f64(state.v.get(site)),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Measure dump: rows (sample, weight, site, u, v).
pub fn write_measure_csv<P: AsRef<Path>>(path: P, measure: &EmpiricalMeasure) -> Result<()> {
    let rows = measure
        .samples()
        .iter()
        .zip(measure.weights())
        .enumerate()
        .flat_map(|(k, (state, w))| {
            state
                .u
                .sites()
                .map(|site| {
                    vec![
                        k.to_string(),
                        fmt_f64(*w),
                        site.to_string(),
                        fmt_f64(state.u.get(site)),
                        fmt_f64(state.v.get(site)),
                    ]
                })
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>();
    write_csv(path, &["sample", "weight", "site", "u", "v"], rows)
}

/// Per-sample summary of a measure: rows (sample, weight, norm_sq).
pub fn write_measure_summary_csv<P: AsRef<Path>>(
    path: P,
    measure: &EmpiricalMeasure,
    geometry: &crate::field::WeightedGeometry,
) -> Result<()> {
    let rows = measure
        .samples()
        .iter()
        .zip(measure.weights())
        .enumerate()
        .map(|(k, (state, w))| {
            vec![
                k.to_string(),
                fmt_f64(*w),
                fmt_f64(geometry.norm_sq(state)),
            ]
        })
        .collect::<Vec<_>>();
    write_csv(path, &["sample", "weight", "norm_sq"], rows)
}

/// Moment curve: rows (m, estimate, ci_low, ci_high, bound).
pub fn moment_rows(report: &MomentReport) -> Vec<Vec<String>> {
    report
        .m_grid
        .iter()
        .enumerate()
        .map(|(k, m)| {
            vec![
                m.to_string(),
                fmt_f64(report.estimated[k]),
                fmt_f64(report.estimated[k] - report.ci_halfwidth[k]),
                fmt_f64(report.estimated[k] + report.ci_halfwidth[k]),
                fmt_f64(report.bound[k]),
            ]
        })
        .collect()
}

pub fn write_moment_csv<P: AsRef<Path>>(path: P, report: &MomentReport) -> Result<()> {
    write_csv(
        path,
        &["m", "estimate", "ci_low", "ci_high", "bound"],
        moment_rows(report),
    )
}

/// Tail masses: rows (m, cutoff, estimate, ci_low, ci_high).
pub fn write_tail_csv<P: AsRef<Path>>(path: P, report: &TailReport) -> Result<()> {
    let mut rows = Vec::new();
    for (mi, m) in report.m_grid.iter().enumerate() {
        for (ii, cutoff) in report.i_grid.iter().enumerate() {
            let (mean, hw) = report.estimates[mi][ii];
            rows.push(vec![
                m.to_string(),
                cutoff.to_string(),
                fmt_f64(mean),
                fmt_f64(mean - hw),
                fmt_f64(mean + hw),
            ]);
        }
    }
    write_csv(path, &["m", "cutoff", "estimate", "ci_low", "ci_high"], rows)
}

pub const STUDY_HEADER: [&str; 8] = [
    "study", "dt", "n", "seed", "statistic", "value", "ci_low", "ci_high",
];

pub fn study_rows(report: &StudyReport) -> Vec<Vec<String>> {
    report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.study.clone(),
                fmt_f64(r.dt),
                r.n.to_string(),
                r.seed.to_string(),
                r.statistic.clone(),
                fmt_f64(r.value),
                fmt_opt(r.ci_low),
                fmt_opt(r.ci_high),
            ]
        })
        .collect()
}

pub fn write_study_csv<P: AsRef<Path>>(path: P, report: &StudyReport) -> Result<()> {
    write_csv(path, &STUDY_HEADER, study_rows(report))
}

/// Parse a study CSV back (for round-trip checks).
pub fn read_study_csv<P: AsRef<Path>>(path: P) -> Result<StudyReport> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path.as_ref())
        .map_err(|e| crate::error::CoreError::Io(std::io::Error::other(e)))?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let r = record?;
        let opt = |s: &str| {
            if s.is_empty() {
                None
            } else {
                Some(s.parse::<f64>().unwrap())
            }
        };
        rows.push(StudyRow {
            study: r[0].to_string(),
            dt: r[1].parse().unwrap(),
            n: r[2].parse().unwrap(),
            seed: r[3].parse().unwrap(),
            statistic: r[4].to_string(),
            value: r[5].parse().unwrap(),
            ci_low: opt(&r[6]),
            ci_high: opt(&r[7]),
        });
    }
    Ok(StudyReport { rows })
}

/// Dump one pair state as rows (site, u, v).
pub fn write_state_csv<P: AsRef<Path>>(path: P, state: &PairState) -> Result<()> {
    let rows = state
        .u
        .sites()
        .map(|site| {
            vec![
                site.to_string(),
                fmt_f64(state.u.get(site)),
                fmt_f64(state.v.get(site)),
            ]
        })
        .collect::<Vec<_>>();
    write_csv(path, &["site", "u", "v"], rows)
}
