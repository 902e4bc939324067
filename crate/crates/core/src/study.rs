//! Desk-scale experiments: Monte Carlo checks of the mean-square and tail
//! bounds, and the refinement studies measuring how the numerical invariant
//! measures move as dt shrinks and the truncation grows.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::field::PairState;
use crate::measure::{bl_distance, krylov_bogolyubov_measure, BlMethod, EmpiricalMeasure};
use crate::noise::{CoupledIncrements, NoiseStream, WienerIncrements};
use crate::params::ModelParams;
use crate::pool::run_tasks;
use crate::scheme::{fold_trajectory, simulate_coupled_pair, simulate_trajectory, SchemeConfig, SchemeContext};
use crate::stats::{ks_statistic, Accumulator};

/// Monte Carlo check of
///   E ||psi_m||_X^2 <= ||psi_0||_X^2 e^{m ln(1 - lambda dt / 4)} + M.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentReport {
    pub m_grid: Vec<usize>,
    pub estimated: Vec<f64>,
    pub ci_halfwidth: Vec<f64>,
    pub bound: Vec<f64>,
    pub offset: f64,
    /// Steps where estimate - ci_halfwidth > bound.
    pub violations: Vec<usize>,
}

/// Monte Carlo tail energy beyond each cutoff, per recorded step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailReport {
    pub m_grid: Vec<usize>,
    pub i_grid: Vec<usize>,
    /// estimates[mi][ii] = (mean, ci_halfwidth) at step m_grid[mi], cutoff i_grid[ii].
    pub estimates: Vec<Vec<(f64, f64)>>,
    /// Tail mass non-increasing in the cutoff at every recorded step.
    pub monotone_in_cutoff: bool,
}

/// Long-format study output: one statistic per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub study: String,
    pub dt: f64,
    pub n: usize,
    pub seed: u64,
    pub statistic: String,
    pub value: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StudyReport {
    pub rows: Vec<StudyRow>,
}

impl StudyReport {
    pub fn push(&mut self, row: StudyRow) {
        self.rows.push(row);
    }

    /// Values of one statistic in row order, with their x-keys.
    pub fn series(&self, statistic: &str) -> Vec<&StudyRow> {
        self.rows
            .iter()
            .filter(|r| r.statistic == statistic)
            .collect()
    }
}

/// How an invariant measure is extracted from one trajectory. Spacings are
/// in time units so measures at different dt are comparable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureProtocol {
    pub n_samples: usize,
    /// None: drop the first 20% of recorded states, or wait for the running
    /// mean of ||psi||_X^2 to stabilize within 1%, whichever is later.
    pub burn_in_time: Option<f64>,
    pub spacing_time: f64,
}

impl MeasureProtocol {
    fn thinning_steps(&self, dt: f64) -> usize {
        ((self.spacing_time / dt).round() as usize).max(1)
    }
}

/// Burn-in by the later of the 20% rule and running-mean stabilization
/// within 1% over a trailing window.
pub fn default_burn_in(norms_sq: &[f64]) -> usize {
    let len = norms_sq.len();
    if len < 3 {
        return 0;
    }
    let fifth = len / 5;
    let window = (len / 20).max(5).min(len - 1);
    let mut running = Vec::with_capacity(len);
    let mut sum = 0.0;
    for (i, x) in norms_sq.iter().enumerate() {
        sum += x;
        running.push(sum / (i + 1) as f64);
    }
    let mut stabilized = len - 1;
    for t in window..len {
        let now = running[t];
        let then = running[t - window];
        if (now - then).abs() <= 0.01 * now.abs().max(1e-12) {
            stabilized = t;
            break;
        }
    }
    fifth.max(stabilized).min(len - 1)
}

/// Simulate one trajectory and time-average it into an empirical measure.
pub fn invariant_measure<W: WienerIncrements + ?Sized>(
    params: &ModelParams,
    cfg: &SchemeConfig,
    psi_0: &PairState,
    protocol: &MeasureProtocol,
    stream: &W,
) -> Result<EmpiricalMeasure> {
    let ctx = SchemeContext::new(params, cfg)?;
    let thin = protocol.thinning_steps(cfg.dt);
    // Record at the thinning stride; burn-in counts recorded states.
    let burn_recorded = match protocol.burn_in_time {
        Some(t) => ((t / (cfg.dt * thin as f64)).ceil() as usize).max(1),
        None => {
            // generous provisional budget, trimmed by the stabilization rule
            protocol.n_samples
        }
    };
    let n_steps = (burn_recorded + protocol.n_samples) * thin;
    let traj = simulate_trajectory(&ctx, psi_0, n_steps, stream, thin)?;
    let burn = match protocol.burn_in_time {
        Some(_) => burn_recorded,
        None => {
            // retain at most n_samples states: the later of the automatic
            // rule and the tail window
            let norms: Vec<f64> = traj.states.iter().map(|s| ctx.geometry.norm_sq(s)).collect();
            default_burn_in(&norms)
                .max(traj.states.len().saturating_sub(protocol.n_samples))
                .min(traj.states.len() - 1)
        }
    };
    krylov_bogolyubov_measure(&traj, burn, 1)
}

/// Measures compared across step sizes pair their samples by time, so the
/// sampling times must land on every level's grid.
fn check_time_alignment(dt_grid: &[f64], protocol: &MeasureProtocol) -> Result<()> {
    if protocol.burn_in_time.is_none() {
        return Err(CoreError::rejected(
            "coupled step-size studies set burn_in_time",
            "auto burn-in",
            "explicit burn_in_time (keeps sample times aligned across levels)",
        ));
    }
    for dt in dt_grid {
        let ratio = protocol.spacing_time / dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio < 0.5 {
            return Err(CoreError::rejected(
                "spacing_time is an integer multiple of each dt",
                format!("spacing {} vs dt {dt}", protocol.spacing_time),
                "integer ratio",
            ));
        }
        if let Some(burn) = protocol.burn_in_time {
            let ratio = burn / protocol.spacing_time;
            if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
                return Err(CoreError::rejected(
                    "burn_in_time is a multiple of spacing_time",
                    format!("burn {burn} vs spacing {}", protocol.spacing_time),
                    "integer ratio",
                ));
            }
        }
    }
    Ok(())
}

fn preconditions_for_bounds(params: &ModelParams, cfg: &SchemeConfig) -> Result<()> {
    params.check_positive()?;
    params.check_noise_dominated()?;
    params.check_step_size(cfg.dt)?;
    cfg.validate()
}

/// Monte Carlo estimate of E ||psi_m||_X^2 against the analytic bound.
pub fn check_moment_bound(
    params: &ModelParams,
    cfg: &SchemeConfig,
    psi_0: &PairState,
    n_trajectories: usize,
    horizon: usize,
    seed: u64,
    workers: usize,
) -> Result<MomentReport> {
    preconditions_for_bounds(params, cfg)?;
    let ctx = SchemeContext::new(params, cfg)?;
    let geometry = ctx.geometry;
    let per_traj: Vec<Result<Vec<f64>>> = run_tasks(n_trajectories, workers, |t| {
        let ctx = ctx.clone();
        let stream = NoiseStream::new(seed, t as u64);
        let mut norms = Vec::with_capacity(horizon + 1);
        fold_trajectory(&ctx, psi_0, horizon, &stream, |_, psi, _| {
            norms.push(geometry.norm_sq(psi));
        })?;
        Ok(norms)
    });
    let mut accs = vec![Accumulator::default(); horizon + 1];
    for traj in per_traj {
        let norms = traj?;
        for (m, x) in norms.iter().enumerate() {
            accs[m].push(*x);
        }
    }
    let initial_energy = geometry.norm_sq(psi_0);
    let mut report = MomentReport {
        m_grid: (0..=horizon).collect(),
        estimated: accs.iter().map(|a| a.mean()).collect(),
        ci_halfwidth: accs.iter().map(|a| a.ci_halfwidth()).collect(),
        bound: (0..=horizon)
            .map(|m| params.moment_bound(initial_energy, cfg.dt, m))
            .collect(),
        offset: params.moment_bound_offset(),
        violations: Vec::new(),
    };
    for m in 0..=horizon {
        if report.estimated[m] - report.ci_halfwidth[m] > report.bound[m] {
            report.violations.push(m);
        }
    }
    Ok(report)
}

/// Monte Carlo tail energy beyond each cutoff in i_grid at each step.
pub fn check_tail_bound(
    params: &ModelParams,
    cfg: &SchemeConfig,
    psi_0: &PairState,
    n_trajectories: usize,
    horizon: usize,
    i_grid: &[usize],
    seed: u64,
    workers: usize,
) -> Result<TailReport> {
    preconditions_for_bounds(params, cfg)?;
    if i_grid.is_empty() {
        return Err(CoreError::EmptyStudy {
            context: "tail cutoff grid".into(),
        });
    }
    if i_grid.iter().any(|i| *i >= cfg.n_sites) {
        return Err(CoreError::rejected(
            "max(i_grid) < N",
            format!("{:?}", i_grid),
            format!("< {}", cfg.n_sites),
        ));
    }
    let ctx = SchemeContext::new(params, cfg)?;
    let geometry = ctx.geometry;
    let per_traj: Vec<Result<Vec<Vec<f64>>>> = run_tasks(n_trajectories, workers, |t| {
        let ctx = ctx.clone();
        let stream = NoiseStream::new(seed, t as u64);
        let mut tails = Vec::with_capacity(horizon + 1);
        fold_trajectory(&ctx, psi_0, horizon, &stream, |_, psi, _| {
            tails.push(
                i_grid
                    .iter()
                    .map(|cutoff| geometry.tail_mass(psi, *cutoff))
                    .collect::<Vec<f64>>(),
            );
        })?;
        Ok(tails)
    });
    let mut accs = vec![vec![Accumulator::default(); i_grid.len()]; horizon + 1];
    for traj in per_traj {
        let tails = traj?;
        for (m, per_cutoff) in tails.iter().enumerate() {
            for (ii, x) in per_cutoff.iter().enumerate() {
                accs[m][ii].push(*x);
            }
        }
    }
    let estimates: Vec<Vec<(f64, f64)>> = accs
        .iter()
        .map(|row| row.iter().map(|a| (a.mean(), a.ci_halfwidth())).collect())
        .collect();
    let monotone = estimates
        .iter()
        .all(|row| row.windows(2).all(|w| w[1].0 <= w[0].0 + 1e-15));
    Ok(TailReport {
        m_grid: (0..=horizon).collect(),
        i_grid: i_grid.to_vec(),
        estimates,
        monotone_in_cutoff: monotone,
    })
}

fn measure_summaries(
    geometry: &crate::field::WeightedGeometry,
    mu: &EmpiricalMeasure,
) -> (f64, f64) {
    let mean_norm = mu.mean_observable(|s| geometry.norm(s));
    let mean_norm_sq = mu.mean_observable(|s| geometry.norm_sq(s));
    (mean_norm, mean_norm_sq)
}

/// Max two-sample KS statistic over per-site u and v marginals near the
/// center of the window.
fn max_marginal_ks(mu1: &EmpiricalMeasure, mu2: &EmpiricalMeasure) -> f64 {
    let radius = mu1.samples()[0].radius().min(mu2.samples()[0].radius()) as i64;
    let sites: Vec<i64> = [0i64, 1, -1, 2, -2]
        .into_iter()
        .filter(|i| i.abs() <= radius)
        .collect();
    let mut worst = 0.0f64;
    for site in sites {
        for pick_u in [true, false] {
            let a: Vec<f64> = mu1
                .samples()
                .iter()
                .map(|s| if pick_u { s.u.get(site) } else { s.v.get(site) })
                .collect();
            let b: Vec<f64> = mu2
                .samples()
                .iter()
                .map(|s| if pick_u { s.u.get(site) } else { s.v.get(site) })
                .collect();
            worst = worst.max(ks_statistic(&a, &b));
        }
    }
    worst
}

fn push_aggregate(report: &mut StudyReport, template: &StudyRow, values: &[f64]) {
    let mut acc = Accumulator::default();
    for v in values {
        acc.push(*v);
    }
    let hw = acc.ci_halfwidth();
    report.push(StudyRow {
        seed: 0,
        statistic: format!("{}_mean", template.statistic),
        value: acc.mean(),
        ci_low: Some(acc.mean() - hw),
        ci_high: Some(acc.mean() + hw),
        ..template.clone()
    });
}

/// Distances between numerical invariant measures at successive dt values,
/// plus cheaper convergence diagnostics.
pub fn dt_refinement_study(
    params: &ModelParams,
    base_cfg: &SchemeConfig,
    dt_grid: &[f64],
    protocol: &MeasureProtocol,
    psi_0: &PairState,
    seeds: &[u64],
    workers: usize,
) -> Result<StudyReport> {
    if dt_grid.len() < 2 || seeds.is_empty() {
        return Err(CoreError::EmptyStudy {
            context: "dt grid needs at least two entries and one seed".into(),
        });
    }
    if dt_grid.windows(2).any(|w| w[1] > w[0]) {
        return Err(CoreError::rejected(
            "dt_grid non-increasing",
            format!("{dt_grid:?}"),
            "sorted from coarse to fine",
        ));
    }
    params.check_noise_dominated()?;
    for dt in dt_grid {
        params.check_step_size(*dt)?;
    }
    check_time_alignment(dt_grid, protocol)?;
    let dt_base = *dt_grid.last().unwrap();
    let geometry = params.geometry();
    // One measure per (seed, dt) task. Runs at different dt share the same
    // Brownian base path, so the retained samples are pathwise coupled and
    // the distance column reflects the discretization gap rather than the
    // sampling floor of independent clouds.
    let tasks: Vec<(u64, f64)> = seeds
        .iter()
        .flat_map(|s| dt_grid.iter().map(move |dt| (*s, *dt)))
        .collect();
    let measures: Vec<Result<EmpiricalMeasure>> = run_tasks(tasks.len(), workers, |i| {
        let (seed, dt) = tasks[i];
        let cfg = SchemeConfig {
            dt,
            ..base_cfg.clone()
        };
        let increments = CoupledIncrements::at_level(NoiseStream::new(seed, 0), dt_base, dt)
            .ok_or_else(|| {
                CoreError::rejected(
                    "dt_grid entries are integer multiples of the finest",
                    dt,
                    format!("multiple of {dt_base}"),
                )
            })?;
        invariant_measure(params, &cfg, psi_0, protocol, &increments)
    });
    let mut by_task = Vec::with_capacity(tasks.len());
    for m in measures {
        by_task.push(m?);
    }
    let measure_at = |si: usize, di: usize| &by_task[si * dt_grid.len() + di];

    let mut report = StudyReport::default();
    for di in 0..dt_grid.len() - 1 {
        let mut dists = Vec::new();
        for (si, seed) in seeds.iter().enumerate() {
            let mu_coarse = measure_at(si, di);
            let mu_fine = measure_at(si, di + 1);
            let d = bl_distance(&geometry, mu_coarse, mu_fine, BlMethod::ExactLp)?;
            let (n1, s1) = measure_summaries(&geometry, mu_coarse);
            let (n2, s2) = measure_summaries(&geometry, mu_fine);
            let ks = max_marginal_ks(mu_coarse, mu_fine);
            let base = StudyRow {
                study: "dt_refinement".into(),
                dt: dt_grid[di],
                n: base_cfg.n_sites,
                seed: *seed,
                statistic: "bl_to_next_dt".into(),
                value: d.value,
                ci_low: None,
                ci_high: None,
            };
            dists.push(d.value);
            report.push(base.clone());
            report.push(StudyRow {
                statistic: "mean_norm_delta".into(),
                value: (n1 - n2).abs(),
                ..base.clone()
            });
            report.push(StudyRow {
                statistic: "mean_norm_sq_delta".into(),
                value: (s1 - s2).abs(),
                ..base.clone()
            });
            report.push(StudyRow {
                statistic: "ks_max".into(),
                value: ks,
                ..base
            });
        }
        push_aggregate(
            &mut report,
            &StudyRow {
                study: "dt_refinement".into(),
                dt: dt_grid[di],
                n: base_cfg.n_sites,
                seed: 0,
                statistic: "bl_to_next_dt".into(),
                value: 0.0,
                ci_low: None,
                ci_high: None,
            },
            &dists,
        );
    }
    Ok(report)
}

/// Knobs for the coupled-noise part of the truncation study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledGapProbe {
    pub n_streams: usize,
    pub horizon: usize,
    /// Step at which the gap is probed.
    pub probe_step: usize,
    pub eta_grid: Vec<f64>,
}

/// Truncation study: (a) coupled-noise pathwise gap exceedance frequencies
/// per N against the reference truncation, (b) distances between invariant
/// measures at N and at the reference, restricted to the common sites.
pub fn n_refinement_study(
    params: &ModelParams,
    base_cfg: &SchemeConfig,
    n_grid: &[usize],
    n_ref: usize,
    protocol: &MeasureProtocol,
    psi_0: &PairState,
    seeds: &[u64],
    probe: &CoupledGapProbe,
    workers: usize,
) -> Result<StudyReport> {
    if n_grid.is_empty() || seeds.is_empty() {
        return Err(CoreError::EmptyStudy {
            context: "n grid / seeds".into(),
        });
    }
    if n_grid.windows(2).any(|w| w[1] < w[0]) || *n_grid.last().unwrap() > n_ref {
        return Err(CoreError::rejected(
            "n_grid increasing and <= n_ref",
            format!("{n_grid:?} vs {n_ref}"),
            "increasing, max <= reference",
        ));
    }
    params.check_noise_dominated()?;
    params.check_step_size(base_cfg.dt)?;
    let geometry = params.geometry();
    let mut report = StudyReport::default();

    // (a) coupled exceedance frequencies, shared streams across all N
    for &n in n_grid {
        let cfg_small = SchemeConfig {
            n_sites: n,
            ..base_cfg.clone()
        };
        let cfg_large = SchemeConfig {
            n_sites: n_ref,
            ..base_cfg.clone()
        };
        let gaps: Vec<Result<f64>> = run_tasks(probe.n_streams, workers, |s| {
            let stream = NoiseStream::new(seeds[0], s as u64);
            let psi_small = psi_0.resized(n.min(psi_0.radius()));
            let (_, _, gap) = simulate_coupled_pair(
                params,
                &cfg_small,
                &cfg_large,
                &psi_small,
                probe.horizon,
                &stream,
                probe.horizon.max(1),
            )?;
            Ok(gap[probe.probe_step.min(gap.len() - 1)])
        });
        let mut gap_values = Vec::with_capacity(probe.n_streams);
        for g in gaps {
            gap_values.push(g?);
        }
        for eta in &probe.eta_grid {
            let count = gap_values.iter().filter(|g| **g >= *eta).count();
            let freq = count as f64 / gap_values.len() as f64;
            let hw = 1.96 * (freq * (1.0 - freq) / gap_values.len() as f64).sqrt();
            report.push(StudyRow {
                study: "n_refinement".into(),
                dt: base_cfg.dt,
                n,
                seed: seeds[0],
                statistic: format!("exceedance_eta_{eta:e}"),
                value: freq,
                ci_low: Some((freq - hw).max(0.0)),
                ci_high: Some((freq + hw).min(1.0)),
            });
        }
        let (gap_mean, gap_hw) = crate::stats::mean_and_ci(&gap_values);
        report.push(StudyRow {
            study: "n_refinement".into(),
            dt: base_cfg.dt,
            n,
            seed: seeds[0],
            statistic: "gap_mean".into(),
            value: gap_mean,
            ci_low: Some(gap_mean - gap_hw),
            ci_high: Some(gap_mean + gap_hw),
        });
    }

    // (b) invariant-measure distances to the reference truncation
    let mut grids: Vec<usize> = n_grid.to_vec();
    grids.push(n_ref);
    let tasks: Vec<(u64, usize)> = seeds
        .iter()
        .flat_map(|s| grids.iter().map(move |n| (*s, *n)))
        .collect();
    let measures: Vec<Result<EmpiricalMeasure>> = run_tasks(tasks.len(), workers, |i| {
        let (seed, n) = tasks[i];
        let cfg = SchemeConfig {
            n_sites: n,
            ..base_cfg.clone()
        };
        let psi_start = psi_0.resized(n.min(psi_0.radius())).resized(n);
        invariant_measure(params, &cfg, &psi_start, protocol, &NoiseStream::new(seed, 0))
    });
    let mut by_task = Vec::with_capacity(tasks.len());
    for m in measures {
        by_task.push(m?);
    }
    let measure_at = |si: usize, ni: usize| &by_task[si * grids.len() + ni];
    for (ni, &n) in n_grid.iter().enumerate() {
        let mut dists = Vec::new();
        for (si, seed) in seeds.iter().enumerate() {
            let mu_n = measure_at(si, ni);
            let mu_ref = measure_at(si, grids.len() - 1).resized(n);
            let d = bl_distance(&geometry, mu_n, &mu_ref, BlMethod::ExactLp)?;
            dists.push(d.value);
            report.push(StudyRow {
                study: "n_refinement".into(),
                dt: base_cfg.dt,
                n,
                seed: *seed,
                statistic: "bl_to_reference".into(),
                value: d.value,
                ci_low: None,
                ci_high: None,
            });
        }
        push_aggregate(
            &mut report,
            &StudyRow {
                study: "n_refinement".into(),
                dt: base_cfg.dt,
                n,
                seed: 0,
                statistic: "bl_to_reference".into(),
                value: 0.0,
                ci_low: None,
                ci_high: None,
            },
            &dists,
        );
    }
    Ok(report)
}

/// Matrix of distances between the measure at (dt, N) and the reference at
/// (dt_min, N_max), restricted to the common sites.
pub fn double_limit_study(
    params: &ModelParams,
    base_cfg: &SchemeConfig,
    dt_grid: &[f64],
    n_grid: &[usize],
    protocol: &MeasureProtocol,
    psi_0: &PairState,
    seeds: &[u64],
    workers: usize,
) -> Result<StudyReport> {
    if dt_grid.is_empty() || n_grid.is_empty() || seeds.is_empty() {
        return Err(CoreError::EmptyStudy {
            context: "double-limit grids".into(),
        });
    }
    params.check_noise_dominated()?;
    for dt in dt_grid {
        params.check_step_size(*dt)?;
    }
    check_time_alignment(dt_grid, protocol)?;
    let geometry = params.geometry();
    let dt_min = dt_grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let n_max = *n_grid.iter().max().unwrap();
    let tasks: Vec<(u64, f64, usize)> = seeds
        .iter()
        .flat_map(|s| {
            dt_grid
                .iter()
                .flat_map(move |dt| n_grid.iter().map(move |n| (*s, *dt, *n)))
        })
        .collect();
    let measures: Vec<Result<EmpiricalMeasure>> = run_tasks(tasks.len(), workers, |i| {
        let (seed, dt, n) = tasks[i];
        let cfg = SchemeConfig {
            dt,
            n_sites: n,
            ..base_cfg.clone()
        };
        let psi_start = psi_0.resized(n.min(psi_0.radius())).resized(n);
        let increments = CoupledIncrements::at_level(NoiseStream::new(seed, 0), dt_min, dt)
            .ok_or_else(|| {
                CoreError::rejected(
                    "dt_grid entries are integer multiples of the finest",
                    dt,
                    format!("multiple of {dt_min}"),
                )
            })?;
        invariant_measure(params, &cfg, &psi_start, protocol, &increments)
    });
    let mut by_task = Vec::with_capacity(tasks.len());
    for m in measures {
        by_task.push(m?);
    }
    let cell = |si: usize, di: usize, ni: usize| {
        &by_task[si * dt_grid.len() * n_grid.len() + di * n_grid.len() + ni]
    };
    let di_ref = dt_grid.iter().position(|d| *d == dt_min).unwrap();
    let ni_ref = n_grid.iter().position(|n| *n == n_max).unwrap();

    let mut report = StudyReport::default();
    for (di, &dt) in dt_grid.iter().enumerate() {
        for (ni, &n) in n_grid.iter().enumerate() {
            let mut dists = Vec::new();
            for (si, seed) in seeds.iter().enumerate() {
                let mu = cell(si, di, ni);
                // zero-extended comparison in the full reference window, so
                // the truncation's missing tail mass counts
                let d = bl_distance(&geometry, mu, cell(si, di_ref, ni_ref), BlMethod::ExactLp)?;
                dists.push(d.value);
                report.push(StudyRow {
                    study: "double_limit".into(),
                    dt,
                    n,
                    seed: *seed,
                    statistic: "bl_to_reference".into(),
                    value: d.value,
                    ci_low: None,
                    ci_high: None,
                });
            }
            push_aggregate(
                &mut report,
                &StudyRow {
                    study: "double_limit".into(),
                    dt,
                    n,
                    seed: 0,
                    statistic: "bl_to_reference".into(),
                    value: 0.0,
                    ci_low: None,
                    ci_high: None,
                },
                &dists,
            );
        }
    }
    Ok(report)
}
