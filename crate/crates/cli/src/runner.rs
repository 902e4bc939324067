//! Study dispatch, deterministic seeding, and the run manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use selkov_lattice::report;
use selkov_lattice::{
    bl_distance, check_moment_bound, check_tail_bound, double_limit_study, dt_refinement_study,
    invariant_measure, krylov_bogolyubov_measure, n_refinement_study, simulate_trajectory,
    BlMethod, CoupledGapProbe, MeasureProtocol, NoiseStream, SchemeContext, StudyReport, StudyRow,
};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, StudyKind};
use crate::emit;

/// Trajectory seed = hash(root_seed, study_id, replicate, trajectory_index):
/// studies are independently reproducible and extensible without
/// reshuffling existing streams.
pub fn derive_seed(root_seed: u64, study_id: &str, replicate: u32, trajectory_index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(root_seed.to_le_bytes());
    hasher.update((study_id.len() as u64).to_le_bytes());
    hasher.update(study_id.as_bytes());
    hasher.update(replicate.to_le_bytes());
    hasher.update(trajectory_index.to_le_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub code_version: String,
    pub config_hash: String,
    pub study: String,
    pub root_seed: u64,
    pub workers: usize,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<OutputFile>,
    /// Full configuration embedded for reproducibility.
    pub config: ExperimentConfig,
}

fn measure_protocol(config: &ExperimentConfig) -> MeasureProtocol {
    let sp = &config.study_params;
    MeasureProtocol {
        n_samples: sp.n_samples.unwrap_or(200),
        burn_in_time: sp.burn_in_time,
        spacing_time: sp.spacing_time.unwrap_or(0.5),
    }
}

fn replicate_seeds(config: &ExperimentConfig, study_id: &str) -> Vec<u64> {
    (0..config.seeds.n_replicates.max(1))
        .map(|r| derive_seed(config.seeds.root_seed, study_id, r, 0))
        .collect()
}

/// Execute the configured study, writing CSV artifacts and a JSON manifest
/// (written last) into `out_dir`.
pub fn run(
    config: &ExperimentConfig,
    config_bytes: &[u8],
    out_dir: &Path,
    workers: usize,
) -> Result<RunManifest> {
    let start = Instant::now();
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;

    let params = config
        .model_params()
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let cfg = config.scheme_config();
    let psi_0 = config
        .initial_state()
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let params_hash = sha256_hex(&format!("{params:?}|{cfg:?}").into_bytes());
    let mc = &config.monte_carlo;
    let root = config.seeds.root_seed;

    match config.study {
        StudyKind::Simulate => {
            for r in 0..config.seeds.n_replicates.max(1) {
                let seed = derive_seed(root, "simulate", r, 0);
                let ctx = SchemeContext::new(&params, &cfg)?;
                let stream = NoiseStream::new(seed, 0);
                let traj = simulate_trajectory(
                    &ctx,
                    &psi_0,
                    mc.horizon,
                    &stream,
                    mc.thinning.max(1),
                )?;
                report::write_trajectory_csv(
                    out_dir.join(format!("trajectory_rep{r}.csv")),
                    &traj,
                    seed,
                    &params_hash,
                )?;
            }
        }
        StudyKind::Moments => {
            let seed = derive_seed(root, "moments", 0, 0);
            let rep = check_moment_bound(
                &params,
                &cfg,
                &psi_0,
                mc.n_trajectories,
                mc.horizon,
                seed,
                workers,
            )?;
            report::write_moment_csv(out_dir.join("moments.csv"), &rep)?;
            emit::write_violation_summary(out_dir.join("moments_summary.csv"), &rep)?;
        }
        StudyKind::Tails => {
            let seed = derive_seed(root, "tails", 0, 0);
            let rep = check_tail_bound(
                &params,
                &cfg,
                &psi_0,
                mc.n_trajectories,
                mc.horizon,
                &config.study_params.i_grid,
                seed,
                workers,
            )?;
            report::write_tail_csv(out_dir.join("tails.csv"), &rep)?;
            emit::write_tail_profile(out_dir.join("tail_vs_cutoff.csv"), &rep)?;
        }
        StudyKind::Invariant => {
            let protocol = measure_protocol(config);
            let seeds = replicate_seeds(config, "invariant");
            let geometry = params.geometry();
            let mut measures = Vec::new();
            for (r, seed) in seeds.iter().enumerate() {
                let mu = if config.study_params.n_samples.is_some()
                    || config.study_params.spacing_time.is_some()
                {
                    invariant_measure(&params, &cfg, &psi_0, &protocol, &NoiseStream::new(*seed, 0))?
                } else {
                    // fall back to the raw monte_carlo knobs
                    let ctx = SchemeContext::new(&params, &cfg)?;
                    let traj = simulate_trajectory(
                        &ctx,
                        &psi_0,
                        mc.horizon,
                        &NoiseStream::new(*seed, 0),
                        mc.thinning.max(1),
                    )?;
                    krylov_bogolyubov_measure(&traj, mc.burn_in, 1)?
                };
                report::write_measure_summary_csv(
                    out_dir.join(format!("measure_summary_rep{r}.csv")),
                    &mu,
                    &geometry,
                )?;
                report::write_measure_csv(out_dir.join(format!("measure_rep{r}.csv")), &mu)?;
                measures.push(mu);
            }
            // Cross-replicate distances: recorded as data (the invariant
            // measure need not be unique), never asserted.
            let mut table = StudyReport::default();
            for i in 0..measures.len() {
                for j in (i + 1)..measures.len() {
                    let d = bl_distance(&geometry, &measures[i], &measures[j], BlMethod::ExactLp)?;
                    table.push(StudyRow {
                        study: "invariant".into(),
                        dt: cfg.dt,
                        n: cfg.n_sites,
                        seed: seeds[i],
                        statistic: format!("bl_to_replicate_{j}"),
                        value: d.value,
                        ci_low: None,
                        ci_high: None,
                    });
                }
            }
            report::write_study_csv(out_dir.join("replicate_distances.csv"), &table)?;
        }
        StudyKind::DtStudy => {
            let protocol = measure_protocol(config);
            let seeds = replicate_seeds(config, "dt_study");
            let rep = dt_refinement_study(
                &params,
                &cfg,
                &config.study_params.dt_grid,
                &protocol,
                &psi_0,
                &seeds,
                workers,
            )?;
            report::write_study_csv(out_dir.join("dt_study.csv"), &rep)?;
            emit::write_distance_vs_dt(out_dir.join("distance_vs_dt.csv"), &rep)?;
        }
        StudyKind::NStudy => {
            let protocol = measure_protocol(config);
            let seeds = replicate_seeds(config, "n_study");
            let sp = &config.study_params;
            let n_ref = sp.n_ref.context("n_study requires study_params.n_ref")?;
            let probe = CoupledGapProbe {
                n_streams: sp.gap_streams.unwrap_or(200),
                horizon: sp.gap_horizon.unwrap_or(50),
                probe_step: sp.probe_step.unwrap_or(sp.gap_horizon.unwrap_or(50)),
                eta_grid: sp.eta_grid.clone(),
            };
            let rep = n_refinement_study(
                &params, &cfg, &sp.n_grid, n_ref, &protocol, &psi_0, &seeds, &probe, workers,
            )?;
            report::write_study_csv(out_dir.join("n_study.csv"), &rep)?;
            emit::write_distance_vs_n(out_dir.join("distance_vs_n.csv"), &rep)?;
            emit::write_exceedance_vs_n(out_dir.join("exceedance_vs_n.csv"), &rep)?;
        }
        StudyKind::DoubleLimit => {
            let protocol = measure_protocol(config);
            let seeds = replicate_seeds(config, "double_limit");
            let sp = &config.study_params;
            let rep = double_limit_study(
                &params,
                &cfg,
                &sp.dt_grid,
                &sp.n_grid,
                &protocol,
                &psi_0,
                &seeds,
                workers,
            )?;
            report::write_study_csv(out_dir.join("double_limit.csv"), &rep)?;
            emit::write_double_limit_matrix(out_dir.join("double_limit_matrix.csv"), &rep)?;
        }
        StudyKind::OpsCheck => {
            let table = selkov_lattice::opscheck::full_table(root);
            let rows: Vec<Vec<String>> = table
                .iter()
                .map(|r| {
                    vec![
                        r.name.clone(),
                        if r.passed { "pass" } else { "fail" }.to_string(),
                        r.detail.clone(),
                    ]
                })
                .collect();
            report::write_csv(out_dir.join("ops_check.csv"), &["check", "result", "detail"], rows)?;
            for r in &table {
                println!("{:40} {}  {}", r.name, if r.passed { "pass" } else { "FAIL" }, r.detail);
            }
            if table.iter().any(|r| !r.passed) {
                bail!("ops-check reported failures");
            }
        }
    }

    // Manifest completeness: every file in the output directory is listed
    // with a content checksum (the manifest itself is written last and is
    // the one exception).
    let mut outputs = Vec::new();
    let mut paths: Vec<PathBuf> = walk_files(out_dir)?;
    paths.sort();
    for path in paths {
        let rel = path
            .strip_prefix(out_dir)
            .unwrap()
            .to_string_lossy()
            .into_owned();
        if rel == "manifest.json" {
            continue;
        }
        let bytes = std::fs::read(&path)?;
        outputs.push(OutputFile {
            path: rel,
            sha256: sha256_hex(&bytes),
            bytes: bytes.len() as u64,
        });
    }
    let manifest = RunManifest {
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: sha256_hex(config_bytes),
        study: config.study.id().to_string(),
        root_seed: root,
        workers,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        outputs,
        config: config.clone(),
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(out_dir.join("manifest.json"), json)?;
    Ok(manifest)
}

fn walk_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        if path.is_dir() {
            out.extend(walk_files(&path)?);
        } else {
            out.push(path);
        }
    }
    Ok(out)
}
