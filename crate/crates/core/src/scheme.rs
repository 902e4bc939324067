//! The implicit backward Euler-Maruyama time stepper.
//!
//! One step solves the nonlinear system
//!   Op(u, v) = (u + d1 A u dt + a1 u dt - b1 u^{2p} v dt + b2 u^{2p+1} dt,
//!               v + d2 A v dt + a2 v dt + b1 u^{2p} v dt - b2 u^{2p+1} dt)
//!             = D,
//! where the right-hand side D collects the previous state, the drift
//! forcing, and the explicitly evaluated noise increment. Op is strictly
//! monotone for small dt and coercive with <psi, Op psi> >= (1 + lambda dt)
//! ||psi||_X^2, so the root exists and is unique; we find it by Newton with
//! an analytic banded Jacobian (trust-region clipped) and fall back to a
//! damped fixed-point iteration on the residual when Newton stagnates.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::field::{Boundary, LatticeField, PairState, WeightedGeometry};
use crate::linalg::{BandedMatrix, BandedSystem};
use crate::noise::WienerIncrements;
use crate::ops;
use crate::params::ModelParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    /// Time step.
    pub dt: f64,
    /// Window half-width N; the state has 2N+1 sites.
    pub n_sites: usize,
    pub boundary: Boundary,
    /// Residual tolerance in the weighted norm.
    pub newton_tol: f64,
    pub newton_max_iters: usize,
    pub fallback_max_iters: usize,
    /// Max Newton update norm per iteration; None means 10 ||psi||_X + 1.
    pub trust_radius: Option<f64>,
    /// Optional declared ceiling on dt, checked on construction of a run.
    pub dt_ceiling: Option<f64>,
}

impl SchemeConfig {
    pub fn new(dt: f64, n_sites: usize, boundary: Boundary) -> Self {
        SchemeConfig {
            dt,
            n_sites,
            boundary,
            newton_tol: 1e-10,
            newton_max_iters: 50,
            fallback_max_iters: 500,
            trust_radius: None,
            dt_ceiling: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(CoreError::rejected("dt > 0", self.dt, "positive finite"));
        }
        if let Some(ceiling) = self.dt_ceiling {
            if self.dt > ceiling {
                return Err(CoreError::rejected("dt <= dt_ceiling", self.dt, ceiling));
            }
        }
        if !(self.newton_tol > 0.0) {
            return Err(CoreError::rejected(
                "newton_tol > 0",
                self.newton_tol,
                "positive",
            ));
        }
        Ok(())
    }
}

/// Known right-hand side of the implicit system:
///   u part: u_m + f dt + [h + sigma(u_m)] dW_m
///   v part: v_m + g dt + [h + sigma(v_m)] dW_m
#[derive(Debug, Clone, PartialEq)]
pub struct RightHandSide {
    pub u: LatticeField,
    pub v: LatticeField,
}

impl RightHandSide {
    pub fn as_state(&self) -> PairState {
        PairState {
            u: self.u.clone(),
            v: self.v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverKind {
    Newton,
    FixedPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub iterations: usize,
    pub final_residual: f64,
    pub solver_used: SolverKind,
    /// <psi1 - psi2, Op psi1 - Op psi2> between the last two iterates, when
    /// the solve took more than one iterate. Positive in the monotone
    /// regime; recorded, not asserted.
    pub monotonicity_witness: Option<f64>,
}

/// Per-run bundle: parameters masked to the window, scheme configuration,
/// and the weighted geometry. All stepping goes through this.
#[derive(Debug, Clone)]
pub struct SchemeContext {
    pub params: ModelParams,
    pub cfg: SchemeConfig,
    pub geometry: WeightedGeometry,
}

impl SchemeContext {
    pub fn new(params: &ModelParams, cfg: &SchemeConfig) -> Result<Self> {
        params.check_positive()?;
        cfg.validate()?;
        let mut masked = params.resized(cfg.n_sites);
        masked.f = masked.f.with_boundary(cfg.boundary);
        masked.g = masked.g.with_boundary(cfg.boundary);
        masked.h = masked.h.with_boundary(cfg.boundary);
        Ok(SchemeContext {
            params: masked,
            cfg: cfg.clone(),
            geometry: params.geometry(),
        })
    }

    pub fn zero_state(&self) -> PairState {
        PairState::zeros(self.cfg.n_sites, self.cfg.boundary)
    }

    fn check_state(&self, psi: &PairState) -> Result<()> {
        if psi.radius() != self.cfg.n_sites || psi.boundary() != self.cfg.boundary {
            return Err(CoreError::mismatched(format!(
                "state window {}/{:?} vs scheme {}/{:?}",
                psi.radius(),
                psi.boundary(),
                self.cfg.n_sites,
                self.cfg.boundary
            )));
        }
        if !psi.is_finite() {
            return Err(CoreError::NonFiniteState { step: None });
        }
        Ok(())
    }
}

/// Laplacian as an endomorphism of the run window: periodic fields keep
/// their window; zero-padded fields are restricted back after the exact
/// application (Galerkin truncation of the bi-infinite operator).
fn window_laplacian(u: &LatticeField) -> LatticeField {
    match u.boundary() {
        Boundary::Periodic => ops::laplacian(u),
        Boundary::ZeroPad => ops::laplacian(u).resized(u.radius()),
    }
}

/// Assemble D from the previous state and the noise increment.
pub fn assemble_rhs(ctx: &SchemeContext, psi_m: &PairState, dw: f64, dt: f64) -> Result<RightHandSide> {
    ctx.check_state(psi_m)?;
    let p = &ctx.params;
    let sig_u = p.sigma.eval(&psi_m.u);
    let sig_v = p.sigma.eval(&psi_m.v);
    let mut du = psi_m.u.clone();
    let mut dv = psi_m.v.clone();
    for (((x, f), h), s) in du
        .values_mut()
        .iter_mut()
        .zip(p.f.values())
        .zip(p.h.values())
        .zip(sig_u.values())
    {
        *x += f * dt + (h + s) * dw;
    }
    for (((x, g), h), s) in dv
        .values_mut()
        .iter_mut()
        .zip(p.g.values())
        .zip(p.h.values())
        .zip(sig_v.values())
    {
        *x += g * dt + (h + s) * dw;
    }
    if !du.is_finite() || !dv.is_finite() {
        return Err(CoreError::NonFiniteState { step: None });
    }
    Ok(RightHandSide { u: du, v: dv })
}

/// Evaluate the implicit operator at psi.
pub fn implicit_operator(ctx: &SchemeContext, psi: &PairState) -> Result<PairState> {
    if !psi.is_finite() {
        return Err(CoreError::NonFiniteState { step: None });
    }
    let p = &ctx.params;
    let dt = ctx.cfg.dt;
    let au = window_laplacian(&psi.u);
    let av = window_laplacian(&psi.v);
    let cross = ops::forward_reaction(&psi.u, &psi.v, p.p)?;
    let back = ops::reverse_reaction(&psi.u, p.p)?;
    let mut gu = psi.u.clone();
    let mut gv = psi.v.clone();
    for i in 0..gu.len() {
        let reaction = -p.b1 * cross.values()[i] + p.b2 * back.values()[i];
        gu.values_mut()[i] +=
            dt * (p.d1 * au.values()[i] + p.a1 * psi.u.values()[i] + reaction);
        gv.values_mut()[i] +=
            dt * (p.d2 * av.values()[i] + p.a2 * psi.v.values()[i] - reaction);
    }
    if !gu.is_finite() || !gv.is_finite() {
        return Err(CoreError::NonFiniteState { step: None });
    }
    Ok(PairState { u: gu, v: gv })
}

/// Analytic Jacobian of the implicit operator at psi, interleaved per site
/// as (u_k, v_k): tridiagonal-with-coupling band of half-width 2, plus
/// wrap-around corners in periodic mode.
pub fn jacobian(ctx: &SchemeContext, psi: &PairState) -> BandedSystem {
    let p = &ctx.params;
    let dt = ctx.cfg.dt;
    let sites = 2 * ctx.cfg.n_sites + 1;
    let n = 2 * sites;
    let mut sys = BandedSystem {
        banded: BandedMatrix::new(n, 2, 2),
        corners: Vec::new(),
    };
    let pw = p.p as i32;
    for k in 0..sites {
        let u = psi.u.values()[k];
        let v = psi.v.values()[k];
        let u2pm1 = u.powi(2 * pw - 1);
        let u2p = u2pm1 * u;
        let dcross_du = 2.0 * pw as f64 * u2pm1 * v;
        let dback_du = (2 * pw + 1) as f64 * u2p;
        let ru = 2 * k;
        let rv = 2 * k + 1;
        sys.add(ru, ru, 1.0 + dt * (p.a1 - p.b1 * dcross_du + p.b2 * dback_du));
        sys.add(ru, rv, -dt * p.b1 * u2p);
        sys.add(rv, ru, dt * (p.b1 * dcross_du - p.b2 * dback_du));
        sys.add(rv, rv, 1.0 + dt * (p.a2 + p.b1 * u2p));
        // diffusion stencil: +2 on the diagonal, -1 toward each neighbor
        sys.add(ru, ru, 2.0 * dt * p.d1);
        sys.add(rv, rv, 2.0 * dt * p.d2);
        for dir in [-1i64, 1] {
            let neighbor = k as i64 + dir;
            let target = match ctx.cfg.boundary {
                Boundary::ZeroPad => {
                    if neighbor < 0 || neighbor >= sites as i64 {
                        continue;
                    }
                    neighbor as usize
                }
                Boundary::Periodic => neighbor.rem_euclid(sites as i64) as usize,
            };
            sys.add(ru, 2 * target, -dt * p.d1);
            sys.add(rv, 2 * target + 1, -dt * p.d2);
        }
    }
    sys
}

fn flatten_residual(r: &PairState) -> Vec<f64> {
    let sites = r.u.len();
    let mut out = vec![0.0; 2 * sites];
    for k in 0..sites {
        out[2 * k] = r.u.values()[k];
        out[2 * k + 1] = r.v.values()[k];
    }
    out
}

fn unflatten(update: &[f64], template: &PairState) -> PairState {
    let mut out = template.clone();
    let sites = out.u.len();
    for k in 0..sites {
        out.u.values_mut()[k] = update[2 * k];
        out.v.values_mut()[k] = update[2 * k + 1];
    }
    out
}

fn residual(ctx: &SchemeContext, psi: &PairState, rhs: &RightHandSide) -> Result<(PairState, f64)> {
    let op = implicit_operator(ctx, psi)?;
    let r = PairState {
        u: op.u.sub(&rhs.u)?,
        v: op.v.sub(&rhs.v)?,
    };
    let norm = ctx.geometry.norm(&r);
    Ok((r, norm))
}

/// Residual norm treating non-finite trials as infinitely bad, so line
/// searches back off instead of erroring out.
fn trial_residual(ctx: &SchemeContext, psi: &PairState, rhs: &RightHandSide) -> (Option<PairState>, f64) {
    match residual(ctx, psi, rhs) {
        Ok((r, norm)) if norm.is_finite() => (Some(r), norm),
        _ => (None, f64::INFINITY),
    }
}

/// Solve Op(psi) = D to the configured residual tolerance.
///
/// The direct Newton/fixed-point iteration from the given guess handles
/// every step the scheme actually takes (the root is O(dt) from the
/// previous state). For adversarial right-hand sides far from the guess
/// the residual norm can have spurious local minima; existence of a root
/// is still guaranteed by coercivity, so we recover by continuation in the
/// step size: at dt = 0 the operator is the identity with root D, and the
/// root path is followed in a few warm-started stages back to the full dt.
pub fn solve_implicit(
    ctx: &SchemeContext,
    rhs: &RightHandSide,
    guess: PairState,
) -> Result<(PairState, StepDiagnostics)> {
    let direct = iterate_to_root(ctx, rhs, guess);
    let Err(CoreError::SolverDiverged {
        newton_iters,
        fallback_iters,
        residual,
        ..
    }) = direct
    else {
        return direct;
    };

    let mut tau = 0.0f64;
    let mut step = 0.25f64;
    let mut psi = rhs.as_state();
    let mut total_iterations = newton_iters + fallback_iters;
    while tau < 1.0 {
        let next = (tau + step).min(1.0);
        let mut staged = ctx.clone();
        staged.cfg.dt = ctx.cfg.dt * next;
        match iterate_to_root(&staged, rhs, psi.clone()) {
            Ok((root, diag)) => {
                total_iterations += diag.iterations;
                psi = root;
                tau = next;
                if tau >= 1.0 {
                    return Ok((
                        psi,
                        StepDiagnostics {
                            iterations: total_iterations,
                            ..diag
                        },
                    ));
                }
                step = (step * 2.0).min(1.0 - tau);
            }
            Err(CoreError::SolverDiverged { .. }) => {
                step *= 0.5;
                if step < 1e-3 {
                    break;
                }
            }
            Err(other) => return Err(other),
        }
    }
    Err(CoreError::SolverDiverged {
        step: 0,
        residual,
        newton_iters,
        fallback_iters,
        tol: ctx.cfg.newton_tol,
    })
}

fn iterate_to_root(
    ctx: &SchemeContext,
    rhs: &RightHandSide,
    guess: PairState,
) -> Result<(PairState, StepDiagnostics)> {
    ctx.check_state(&guess)?;
    let tol = ctx.cfg.newton_tol;
    let mut psi = guess;
    let mut previous: Option<PairState> = None;
    let mut iterations = 0usize;
    let mut newton_iters = 0usize;

    let finish = |ctx: &SchemeContext,
                  psi: PairState,
                  previous: Option<PairState>,
                  iterations: usize,
                  res: f64,
                  solver: SolverKind|
     -> Result<(PairState, StepDiagnostics)> {
        let witness = match &previous {
            Some(prev) if prev != &psi => {
                let d = psi.sub(prev)?;
                let gd = implicit_operator(ctx, &psi)?.sub(&implicit_operator(ctx, prev)?)?;
                Some(ctx.geometry.inner(&d, &gd)?)
            }
            _ => None,
        };
        Ok((
            psi,
            StepDiagnostics {
                iterations,
                final_residual: res,
                solver_used: solver,
                monotonicity_witness: witness,
            },
        ))
    };

    let (mut r, mut res) = residual(ctx, &psi, rhs)?;
    if res <= tol {
        return finish(ctx, psi, None, 0, res, SolverKind::Newton);
    }

    // Rounds interleave a trust-region-clipped, deeply backtracked Newton
    // step with a damped residual step psi <- psi - omega (Op psi - D).
    // The Newton direction is a descent direction for the residual norm
    // whenever the Jacobian is nonsingular, so deep backtracking makes
    // progress; the damped step covers the singular cases, with progress
    // for small omega guaranteed by coercivity near the root.
    let lambda = ctx.params.lambda();
    let mut omega = 1.0 / (1.0 + lambda * ctx.cfg.dt);
    let mut fallback_iters = 0usize;
    let mut last_kind = SolverKind::Newton;
    let budget = ctx.cfg.newton_max_iters + ctx.cfg.fallback_max_iters;
    while iterations < budget {
        iterations += 1;
        let mut improved = false;

        if newton_iters < ctx.cfg.newton_max_iters {
            if let Ok(mut step) = jacobian(ctx, &psi).solve(&flatten_residual(&r)) {
                newton_iters += 1;
                for s in &mut step {
                    *s = -*s;
                }
                let mut update = unflatten(&step, &psi);
                let radius = ctx
                    .cfg
                    .trust_radius
                    .unwrap_or_else(|| 10.0 * ctx.geometry.norm(&psi) + 1.0);
                let step_norm = ctx.geometry.norm(&update);
                if step_norm > radius {
                    let scale = radius / step_norm;
                    update.u = update.u.scaled(scale);
                    update.v = update.v.scaled(scale);
                }
                let mut alpha = 1.0;
                for _ in 0..45 {
                    let mut trial = psi.clone();
                    trial.add_scaled(alpha, &update)?;
                    let (trial_r, trial_res) = trial_residual(ctx, &trial, rhs);
                    if trial_res < res {
                        previous = Some(std::mem::replace(&mut psi, trial));
                        r = trial_r.expect("finite residual");
                        res = trial_res;
                        improved = true;
                        last_kind = SolverKind::Newton;
                        break;
                    }
                    alpha *= 0.5;
                }
            }
        }

        if !improved && fallback_iters < ctx.cfg.fallback_max_iters {
            fallback_iters += 1;
            while omega >= 1e-14 {
                let mut trial = psi.clone();
                trial.add_scaled(-omega, &r)?;
                let (trial_r, trial_res) = trial_residual(ctx, &trial, rhs);
                if trial_res < res {
                    previous = Some(std::mem::replace(&mut psi, trial));
                    r = trial_r.expect("finite residual");
                    res = trial_res;
                    improved = true;
                    last_kind = SolverKind::FixedPoint;
                    omega = (omega * 1.2).min(1.0);
                    break;
                }
                omega *= 0.5;
            }
        }

        if res <= tol {
            return finish(ctx, psi, previous, iterations, res, last_kind);
        }
        if !improved {
            break;
        }
    }

    Err(CoreError::SolverDiverged {
        step: 0,
        residual: res,
        newton_iters,
        fallback_iters,
        tol,
    })
}

/// One scheme step: assemble the right-hand side from (psi_m, dW_m) and
/// solve the implicit system, starting Newton from psi_m.
pub fn bem_step(
    ctx: &SchemeContext,
    psi_m: &PairState,
    dw: f64,
) -> Result<(PairState, StepDiagnostics)> {
    let rhs = assemble_rhs(ctx, psi_m, dw, ctx.cfg.dt)?;
    solve_implicit(ctx, &rhs, psi_m.clone())
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrajectoryDiagnostics {
    pub total_iterations: usize,
    pub max_residual: f64,
    pub fallback_steps: usize,
}

/// A simulated path, persisting every `stride`-th state (thinning).
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<PairState>,
    pub stride: usize,
    pub dt: f64,
    pub n_steps: usize,
    pub diagnostics: TrajectoryDiagnostics,
}

impl Trajectory {
    /// Step index of the j-th recorded state.
    pub fn step_of(&self, j: usize) -> usize {
        j * self.stride
    }
}

/// Drive the scheme for n_steps, calling `observe(m, psi_m)` for every
/// state including the initial one. Errors carry the failing step index.
pub fn fold_trajectory<W: WienerIncrements + ?Sized>(
    ctx: &SchemeContext,
    psi_0: &PairState,
    n_steps: usize,
    stream: &W,
    mut observe: impl FnMut(usize, &PairState, Option<&StepDiagnostics>),
) -> Result<PairState> {
    ctx.check_state(psi_0)?;
    let mut psi = psi_0.clone();
    observe(0, &psi, None);
    for m in 0..n_steps {
        let dw = stream.increment(m as u64, ctx.cfg.dt);
        let (next, diag) = bem_step(ctx, &psi, dw).map_err(|e| e.at_step(m))?;
        psi = next;
        observe(m + 1, &psi, Some(&diag));
    }
    Ok(psi)
}

pub fn simulate_trajectory<W: WienerIncrements + ?Sized>(
    ctx: &SchemeContext,
    psi_0: &PairState,
    n_steps: usize,
    stream: &W,
    stride: usize,
) -> Result<Trajectory> {
    assert!(stride >= 1);
    let mut states = Vec::with_capacity(n_steps / stride + 1);
    let mut diag = TrajectoryDiagnostics::default();
    fold_trajectory(ctx, psi_0, n_steps, stream, |m, psi, step_diag| {
        if m % stride == 0 {
            states.push(psi.clone());
        }
        if let Some(d) = step_diag {
            diag.total_iterations += d.iterations;
            diag.max_residual = diag.max_residual.max(d.final_residual);
            if d.solver_used == SolverKind::FixedPoint {
                diag.fallback_steps += 1;
            }
        }
    })?;
    Ok(Trajectory {
        states,
        stride,
        dt: ctx.cfg.dt,
        n_steps,
        diagnostics: diag,
    })
}

/// Run the same noise through two truncations N1 <= N2 and record the
/// squared weighted gap per step, zero-extending the small state.
pub fn simulate_coupled_pair<W: WienerIncrements + ?Sized>(
    params: &ModelParams,
    cfg_small: &SchemeConfig,
    cfg_large: &SchemeConfig,
    psi_0: &PairState,
    n_steps: usize,
    stream: &W,
    stride: usize,
) -> Result<(Trajectory, Trajectory, Vec<f64>)> {
    if cfg_small.n_sites > cfg_large.n_sites {
        return Err(CoreError::mismatched(format!(
            "coupled pair needs N1 <= N2, got {} > {}",
            cfg_small.n_sites, cfg_large.n_sites
        )));
    }
    if psi_0.radius() > cfg_small.n_sites {
        return Err(CoreError::mismatched(format!(
            "initial state radius {} exceeds small window {}",
            psi_0.radius(),
            cfg_small.n_sites
        )));
    }
    let ctx_small = SchemeContext::new(params, cfg_small)?;
    let ctx_large = SchemeContext::new(params, cfg_large)?;
    let geometry = params.geometry();
    let mut small = psi_0.resized(cfg_small.n_sites);
    small.u = small.u.with_boundary(cfg_small.boundary);
    small.v = small.v.with_boundary(cfg_small.boundary);
    let mut large = psi_0.resized(cfg_large.n_sites);
    large.u = large.u.with_boundary(cfg_large.boundary);
    large.v = large.v.with_boundary(cfg_large.boundary);

    let mut gap_series = Vec::with_capacity(n_steps + 1);
    let mut small_states = Vec::new();
    let mut large_states = Vec::new();
    let mut diag_small = TrajectoryDiagnostics::default();
    let mut diag_large = TrajectoryDiagnostics::default();
    let record = |m: usize,
                      small: &PairState,
                      large: &PairState,
                      small_states: &mut Vec<PairState>,
                      large_states: &mut Vec<PairState>,
                      gap_series: &mut Vec<f64>| {
        let gap = geometry.distance(large, small).powi(2);
        gap_series.push(gap);
        if m % stride == 0 {
            small_states.push(small.clone());
            large_states.push(large.clone());
        }
    };
    record(0, &small, &large, &mut small_states, &mut large_states, &mut gap_series);
    for m in 0..n_steps {
        let dw = stream.increment(m as u64, cfg_small.dt);
        let (next_small, ds) = bem_step(&ctx_small, &small, dw).map_err(|e| e.at_step(m))?;
        let (next_large, dl) = bem_step(&ctx_large, &large, dw).map_err(|e| e.at_step(m))?;
        small = next_small;
        large = next_large;
        diag_small.total_iterations += ds.iterations;
        diag_small.max_residual = diag_small.max_residual.max(ds.final_residual);
        diag_large.total_iterations += dl.iterations;
        diag_large.max_residual = diag_large.max_residual.max(dl.final_residual);
        record(m + 1, &small, &large, &mut small_states, &mut large_states, &mut gap_series);
    }
    let make = |states: Vec<PairState>, dt: f64, diagnostics: TrajectoryDiagnostics| Trajectory {
        states,
        stride,
        dt,
        n_steps,
        diagnostics,
    };
    Ok((
        make(small_states, cfg_small.dt, diag_small),
        make(large_states, cfg_large.dt, diag_large),
        gap_series,
    ))
}
