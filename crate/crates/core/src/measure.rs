//! Empirical measures on the phase space and the bounded-Lipschitz
//! (Dudley) distance between them.
//!
//! The distance is
//!   d(mu1, mu2) = sup { |(phi, mu1) - (phi, mu2)| :
//!                       ||phi||_inf + Lip(phi) <= 1 },
//! which metrizes weak convergence. Restricted to two empirical measures it
//! is a finite linear program over the test-function values at the pooled
//! sample points and a Lipschitz budget L in [0, 1]:
//!   maximize sum_i w_i v_i
//!   subject to |v_i - v_j| <= L d_ij  and  |v_i| <= 1 - L,
//! where w = mu1 - mu2 as signed weights (any feasible v extends to a valid
//! phi on the whole space by the McShane envelope, so the LP value equals
//! the distance). For fixed L the LP is the dual of a minimum-cost transport
//! between the positive and negative parts of w, with the sup-norm box
//! encoded as a virtual origin node at arc cost 1 - L; we solve it exactly
//! by successive shortest paths and read the test function off the node
//! potentials. The feasible set shrinks concavely in L, so the outer
//! maximization is a one-dimensional concave search.
//!
//! The returned value is always the objective of an explicitly
//! feasibility-checked test function, hence a certified lower bound; the
//! primal-dual gap is reported alongside.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::field::{PairState, WeightedGeometry};
use crate::scheme::Trajectory;

/// Weighted sample cloud representing a numerical invariant measure.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    samples: Vec<PairState>,
    weights: Vec<f64>,
}

impl EmpiricalMeasure {
    pub fn new(samples: Vec<PairState>, weights: Vec<f64>) -> Result<Self> {
        if samples.is_empty() || samples.len() != weights.len() {
            return Err(CoreError::EmptyMeasure);
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 || weights.iter().any(|w| *w < 0.0) {
            return Err(CoreError::rejected(
                "weights sum to 1",
                total,
                "1 +/- 1e-12, nonnegative",
            ));
        }
        for s in &samples[1..] {
            samples[0].check_aligned(s)?;
        }
        Ok(EmpiricalMeasure { samples, weights })
    }

    pub fn dirac(state: PairState) -> Self {
        EmpiricalMeasure {
            samples: vec![state],
            weights: vec![1.0],
        }
    }

    pub fn samples(&self) -> &[PairState] {
        &self.samples
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Expectation of an observable under the measure.
    pub fn mean_observable(&self, f: impl Fn(&PairState) -> f64) -> f64 {
        self.samples
            .iter()
            .zip(&self.weights)
            .map(|(s, w)| w * f(s))
            .sum()
    }

    /// Restrict or zero-extend every sample to the window |i| <= radius.
    pub fn resized(&self, radius: usize) -> EmpiricalMeasure {
        EmpiricalMeasure {
            samples: self.samples.iter().map(|s| s.resized(radius)).collect(),
            weights: self.weights.clone(),
        }
    }
}

/// Time average of a recorded trajectory: equal weights 1/n over the states
/// at recorded indices burn_in, burn_in + k, ..., with
/// n = floor((len - burn_in) / k).
pub fn krylov_bogolyubov_measure(
    trajectory: &Trajectory,
    burn_in: usize,
    thinning: usize,
) -> Result<EmpiricalMeasure> {
    assert!(thinning >= 1);
    let len = trajectory.states.len();
    if len <= burn_in {
        return Err(CoreError::EmptyWindow { len, burn_in });
    }
    let n = (len - burn_in) / thinning;
    if n == 0 {
        return Err(CoreError::EmptyWindow { len, burn_in });
    }
    let samples: Vec<PairState> = (0..n)
        .map(|j| trajectory.states[burn_in + j * thinning].clone())
        .collect();
    let w = 1.0 / n as f64;
    EmpiricalMeasure::new(samples, vec![w; n])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlMethod {
    /// Exact LP over pooled samples (certified, with gap report).
    ExactLp,
    /// Fixed library of normalized test functions (cheap lower bound).
    Dictionary,
}

#[derive(Debug, Clone)]
pub struct BlDistanceResult {
    /// Objective of the certified test function: a rigorous lower bound of
    /// the distance, and exact for ExactLp up to the reported gap.
    pub value: f64,
    /// Lipschitz budget L of the certificate.
    pub lipschitz_budget: f64,
    /// Test-function values at the pooled samples (mu1's, then mu2's).
    pub certificate: Vec<f64>,
    pub method: BlMethod,
    /// |primal transport cost - certificate objective| for ExactLp;
    /// 0 by construction for Dictionary.
    pub gap: f64,
}

/// Pooled and deduplicated geometry of a pair of measures.
struct Pooled {
    /// Unique states.
    points: Vec<PairState>,
    /// Signed weight mu1 - mu2 per unique state.
    signed: Vec<f64>,
    /// Unique index of each original sample (mu1's then mu2's).
    assignment: Vec<usize>,
    /// Pairwise distances between unique states.
    dist: Vec<Vec<f64>>,
}

fn pool(geometry: &WeightedGeometry, mu1: &EmpiricalMeasure, mu2: &EmpiricalMeasure) -> Result<Pooled> {
    mu1.samples[0].check_aligned(&mu2.samples[0])?;
    let mut points: Vec<PairState> = Vec::new();
    let mut signed: Vec<f64> = Vec::new();
    let mut assignment = Vec::with_capacity(mu1.len() + mu2.len());
    let add = |state: &PairState, w: f64, points: &mut Vec<PairState>, signed: &mut Vec<f64>| {
        if let Some(k) = points.iter().position(|p| p == state) {
            signed[k] += w;
            k
        } else {
            points.push(state.clone());
            signed.push(w);
            points.len() - 1
        }
    };
    for (s, w) in mu1.samples.iter().zip(&mu1.weights) {
        assignment.push(add(s, *w, &mut points, &mut signed));
    }
    for (s, w) in mu2.samples.iter().zip(&mu2.weights) {
        assignment.push(add(s, -*w, &mut points, &mut signed));
    }
    let n = points.len();
    let mut dist = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = geometry.distance(&points[i], &points[j]);
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    Ok(Pooled {
        points,
        signed,
        assignment,
        dist,
    })
}

/// Minimum-cost transport of the signed weights for a fixed Lipschitz
/// budget, by successive shortest paths with potentials over the active
/// points plus the virtual origin node (index 0). Returns the transport
/// cost and the dual test-function values at the active points.
fn transport_value(dist: &[Vec<f64>], weights: &[f64], budget: f64) -> (f64, Vec<f64>) {
    let box_cost = 1.0 - budget;
    let k = weights.len();
    let n = k + 1; // node 0 is the origin
    let cost = |a: usize, b: usize| -> f64 {
        if a == b {
            0.0
        } else if a == 0 || b == 0 {
            box_cost
        } else {
            budget * dist[a - 1][b - 1]
        }
    };
    let mut excess = vec![0.0; n];
    excess[1..].copy_from_slice(weights);
    let total_mass: f64 = weights.iter().map(|w| w.abs()).sum();
    let eps = 1e-13 * total_mass.max(1.0);
    let mut net = vec![0.0; n * n]; // antisymmetric net flow
    let mut pot = vec![0.0; n];
    let mut dist_buf = vec![0.0; n];
    let mut parent = vec![0usize; n];
    let mut settled = vec![false; n];

    loop {
        let Some(source) = (0..n).find(|i| excess[*i] > eps) else {
            break;
        };
        // Dijkstra over reduced costs; reverse arcs of carried flow are free
        // to undo at negative cost.
        for i in 0..n {
            dist_buf[i] = f64::INFINITY;
            settled[i] = false;
            parent[i] = usize::MAX;
        }
        dist_buf[source] = 0.0;
        let mut target = usize::MAX;
        loop {
            let mut best = f64::INFINITY;
            let mut at = usize::MAX;
            for i in 0..n {
                if !settled[i] && dist_buf[i] < best {
                    best = dist_buf[i];
                    at = i;
                }
            }
            if at == usize::MAX {
                break;
            }
            settled[at] = true;
            if excess[at] < -eps {
                target = at;
                break;
            }
            for b in 0..n {
                if settled[b] || b == at {
                    continue;
                }
                let arc = if net[b * n + at] > eps {
                    -cost(b, at)
                } else {
                    cost(at, b)
                };
                let rc = (arc + pot[at] - pot[b]).max(0.0);
                let cand = dist_buf[at] + rc;
                if cand < dist_buf[b] {
                    dist_buf[b] = cand;
                    parent[b] = at;
                }
            }
        }
        if target == usize::MAX {
            // residual supply is rounding dust with no matching deficit
            break;
        }
        let reach = dist_buf[target];
        for i in 0..n {
            pot[i] += dist_buf[i].min(reach);
        }
        // capacity along the path: only undone (reverse) arcs are bounded
        let mut amount = excess[source].min(-excess[target]);
        let mut at = target;
        while at != source {
            let prev = parent[at];
            if net[at * n + prev] > eps {
                amount = amount.min(net[at * n + prev]);
            }
            at = prev;
        }
        let mut at = target;
        while at != source {
            let prev = parent[at];
            net[prev * n + at] += amount;
            net[at * n + prev] -= amount;
            at = prev;
        }
        excess[source] -= amount;
        excess[target] += amount;
    }

    let mut total_cost = 0.0;
    for a in 0..n {
        for b in 0..n {
            if net[a * n + b] > 0.0 {
                total_cost += net[a * n + b] * cost(a, b);
            }
        }
    }
    // Dual potentials give the test function, pinned to 0 at the origin.
    let values: Vec<f64> = (1..n).map(|i| pot[0] - pot[i]).collect();
    (total_cost, values)
}

/// Extend test-function values from the active points to every pooled
/// point by the McShane envelope (including the origin's box term), then
/// clamp into the box. Feasible by construction; fixed points of the
/// envelope are the already-feasible actives.
fn extend_certificate(
    pooled: &Pooled,
    active_idx: &[usize],
    active_values: &[f64],
    budget: f64,
) -> Vec<f64> {
    let box_cap = 1.0 - budget;
    let n = pooled.points.len();
    let mut out = vec![0.0; n];
    for q in 0..n {
        let mut best = box_cap; // origin term: 0 + box cost
        for (slot, &a) in active_idx.iter().enumerate() {
            let cand = active_values[slot] + budget * pooled.dist[q][a];
            if cand < best {
                best = cand;
            }
        }
        out[q] = best.clamp(-box_cap, box_cap);
    }
    out
}

/// Check |v_i| <= 1 - L and |v_i - v_j| <= L d_ij, returning the largest
/// violation (0 when feasible).
fn certificate_violation(dist: &[Vec<f64>], values: &[f64], budget: f64) -> f64 {
    let box_cap = 1.0 - budget;
    let mut worst = 0.0f64;
    for (i, vi) in values.iter().enumerate() {
        worst = worst.max(vi.abs() - box_cap);
        for (j, vj) in values.iter().enumerate().skip(i + 1) {
            worst = worst.max((vi - vj).abs() - budget * dist[i][j]);
        }
    }
    worst.max(0.0)
}

fn exact_lp(pooled: &Pooled) -> BlDistanceResult {
    let active_idx: Vec<usize> = (0..pooled.points.len())
        .filter(|&i| pooled.signed[i].abs() > 1e-14)
        .collect();
    if active_idx.is_empty() {
        return BlDistanceResult {
            value: 0.0,
            lipschitz_budget: 0.0,
            certificate: vec![0.0; pooled.assignment.len()],
            method: BlMethod::ExactLp,
            gap: 0.0,
        };
    }
    let weights: Vec<f64> = active_idx.iter().map(|&i| pooled.signed[i]).collect();
    let dist: Vec<Vec<f64>> = active_idx
        .iter()
        .map(|&i| active_idx.iter().map(|&j| pooled.dist[i][j]).collect())
        .collect();

    let eval = |budget: f64| transport_value(&dist, &weights, budget);

    // Golden-section search for the concave cost profile over L in [0, 1].
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut l1 = hi - phi * (hi - lo);
    let mut l2 = lo + phi * (hi - lo);
    let mut f1 = eval(l1);
    let mut f2 = eval(l2);
    let iters = if pooled.points.len() <= 64 { 64 } else { 44 };
    for _ in 0..iters {
        if f1.0 >= f2.0 {
            hi = l2;
            l2 = l1;
            f2 = f1;
            l1 = hi - phi * (hi - lo);
            f1 = eval(l1);
        } else {
            lo = l1;
            l1 = l2;
            f1 = f2;
            l2 = lo + phi * (hi - lo);
            f2 = eval(l2);
        }
    }
    let (budget, (cost, active_values)) = if f1.0 >= f2.0 { (l1, f1) } else { (l2, f2) };

    let unique_values = extend_certificate(pooled, &active_idx, &active_values, budget);
    let value: f64 = pooled
        .signed
        .iter()
        .zip(&unique_values)
        .map(|(w, v)| w * v)
        .sum();
    let certificate: Vec<f64> = pooled.assignment.iter().map(|&k| unique_values[k]).collect();
    debug_assert!(certificate_violation(&pooled.dist, &unique_values, budget) < 1e-9);
    BlDistanceResult {
        value,
        lipschitz_budget: budget,
        certificate,
        method: BlMethod::ExactLp,
        gap: (cost - value).abs(),
    }
}

fn dictionary(geometry: &WeightedGeometry, pooled: &Pooled) -> BlDistanceResult {
    let n = pooled.points.len();
    let scale = pooled
        .dist
        .iter()
        .flatten()
        .fold(0.0f64, |m, d| m.max(*d))
        .max(1e-9);
    let mut best_obj = 0.0f64;
    let mut best_values = vec![0.0; n];
    let mut best_budget = 0.0f64;
    let mut consider = |values: Vec<f64>, lip: f64| {
        let obj: f64 = pooled
            .signed
            .iter()
            .zip(&values)
            .map(|(w, v)| w * v)
            .sum();
        if obj.abs() > best_obj {
            best_obj = obj.abs();
            best_budget = lip;
            best_values = if obj >= 0.0 {
                values
            } else {
                values.into_iter().map(|v| -v).collect()
            };
        }
    };
    // Clipped radial distances to anchor samples: phi(x) = s (r - min(d, r))
    // with s = 1/(1 + r), so sup + Lip = 1.
    let anchor_count = n.min(8);
    for a in 0..anchor_count {
        let anchor = a * n / anchor_count;
        for factor in [0.25, 0.5, 1.0, 2.0] {
            let r = factor * scale;
            let s = 1.0 / (1.0 + r);
            let values: Vec<f64> = (0..n)
                .map(|q| s * (r - pooled.dist[q][anchor].min(r)))
                .collect();
            consider(values, s);
        }
    }
    // Clipped coordinate projections at a few central sites.
    let radius = pooled.points[0].radius() as i64;
    let sites: Vec<i64> = [0i64, 1, -1, 2, -2, 4, -4]
        .into_iter()
        .filter(|i| i.abs() <= radius)
        .collect();
    for site in sites {
        for (lip_scale, pick) in [
            (1.0 / geometry.b2.sqrt(), true),
            (1.0 / geometry.b1.sqrt(), false),
        ] {
            let coords: Vec<f64> = pooled
                .points
                .iter()
                .map(|x| if pick { x.u.get(site) } else { x.v.get(site) })
                .collect();
            let cmax = coords.iter().fold(0.0f64, |m, c| m.max(c.abs())).max(1e-9);
            for factor in [0.5, 1.0] {
                let r = factor * cmax;
                let s = 1.0 / (r + lip_scale);
                let values: Vec<f64> = coords.iter().map(|c| s * c.clamp(-r, r)).collect();
                consider(values, s * lip_scale);
            }
        }
    }
    let certificate: Vec<f64> = pooled.assignment.iter().map(|&k| best_values[k]).collect();
    BlDistanceResult {
        value: best_obj,
        lipschitz_budget: best_budget,
        certificate,
        method: BlMethod::Dictionary,
        gap: 0.0,
    }
}

/// Bounded-Lipschitz distance between two empirical measures. Samples of
/// different truncations are zero-extended to the common window first.
pub fn bl_distance(
    geometry: &WeightedGeometry,
    mu1: &EmpiricalMeasure,
    mu2: &EmpiricalMeasure,
    method: BlMethod,
) -> Result<BlDistanceResult> {
    if mu1.is_empty() || mu2.is_empty() {
        return Err(CoreError::EmptyMeasure);
    }
    let r1 = mu1.samples[0].radius();
    let r2 = mu2.samples[0].radius();
    let common = r1.max(r2);
    let (mu1e, mu2e);
    let (m1, m2): (&EmpiricalMeasure, &EmpiricalMeasure) = if r1 == r2 {
        (mu1, mu2)
    } else {
        mu1e = mu1.resized(common);
        mu2e = mu2.resized(common);
        (&mu1e, &mu2e)
    };
    let pooled = pool(geometry, m1, m2)?;
    Ok(match method {
        BlMethod::ExactLp => exact_lp(&pooled),
        BlMethod::Dictionary => dictionary(geometry, &pooled),
    })
}

/// Re-verify a result's certificate against a fresh pooling of the inputs;
/// returns the largest constraint violation (0 when feasible).
pub fn verify_certificate(
    geometry: &WeightedGeometry,
    mu1: &EmpiricalMeasure,
    mu2: &EmpiricalMeasure,
    result: &BlDistanceResult,
) -> Result<f64> {
    let r1 = mu1.samples[0].radius();
    let r2 = mu2.samples[0].radius();
    let common = r1.max(r2);
    let m1 = mu1.resized(common);
    let m2 = mu2.resized(common);
    let all_states: Vec<&PairState> = m1.samples.iter().chain(m2.samples.iter()).collect();
    if all_states.len() != result.certificate.len() {
        return Err(CoreError::mismatched(
            "certificate length vs pooled samples".to_string(),
        ));
    }
    let box_cap = 1.0 - result.lipschitz_budget;
    let mut worst = 0.0f64;
    for (i, vi) in result.certificate.iter().enumerate() {
        worst = worst.max(vi.abs() - box_cap);
        for (j, vj) in result.certificate.iter().enumerate().skip(i + 1) {
            let d = geometry.distance(all_states[i], all_states[j]);
            worst = worst.max((vi - vj).abs() - result.lipschitz_budget * d);
        }
    }
    Ok(worst.max(0.0))
}
