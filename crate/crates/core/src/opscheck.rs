//! Deterministic property suites over the lattice kernels and the scheme,
//! runnable from the CLI as a pass/fail table.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::field::{Boundary, LatticeField, PairState};
use crate::noise::NoiseCoefficient;
use crate::ops;
use crate::params::ModelParams;
use crate::scheme::{implicit_operator, jacobian, SchemeConfig, SchemeContext};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn random_field(rng: &mut ChaCha8Rng, radius: usize, boundary: Boundary, scale: f64) -> LatticeField {
    let mut f = LatticeField::zeros(radius, boundary);
    for x in f.values_mut() {
        *x = rng.gen_range(-scale..scale);
    }
    f
}

fn record(results: &mut Vec<CheckResult>, name: &str, worst: f64, tol: f64) {
    results.push(CheckResult {
        name: name.to_string(),
        passed: worst <= tol,
        detail: format!("worst {worst:.3e} vs tol {tol:.1e}"),
    });
}

/// Direct-summation evaluations used as the reference side of the operator
/// identities; written against the stencil definitions, not the kernels.
mod reference {
    use crate::field::{Boundary, LatticeField};

    pub fn quadratic_form(u: &LatticeField) -> f64 {
        // (Au, u) summed from the stencil definition
        let r = u.radius() as i64;
        let mut acc = 0.0;
        match u.boundary() {
            Boundary::ZeroPad => {
                for i in -(r + 1)..=(r + 1) {
                    acc += (-u.get(i - 1) + 2.0 * u.get(i) - u.get(i + 1)) * u.get(i);
                }
            }
            Boundary::Periodic => {
                for i in -r..=r {
                    let left = if i == -r { r } else { i - 1 };
                    let right = if i == r { -r } else { i + 1 };
                    acc += (-u.get(left) + 2.0 * u.get(i) - u.get(right)) * u.get(i);
                }
            }
        }
        acc
    }

    pub fn gradient_energy(u: &LatticeField) -> f64 {
        // ||Bu||^2 summed from the stencil definition
        let r = u.radius() as i64;
        let mut acc = 0.0;
        match u.boundary() {
            Boundary::ZeroPad => {
                for i in -(r + 1)..=r {
                    acc += (u.get(i + 1) - u.get(i)).powi(2);
                }
            }
            Boundary::Periodic => {
                for i in -r..=r {
                    let right = if i == r { -r } else { i + 1 };
                    acc += (u.get(right) - u.get(i)).powi(2);
                }
            }
        }
        acc
    }
}

/// Operator identities: nonnegativity of (Au, u), the factorization
/// A = BB* = B*B, adjointness, and the norm bounds ||Au|| <= 4||u||,
/// ||Bu|| <= 2||u||.
pub fn operator_suite(rounds: usize, seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut results = Vec::new();
    for boundary in [Boundary::ZeroPad, Boundary::Periodic] {
        let tag = format!("{boundary:?}").to_lowercase();
        let mut worst_identity = 0.0f64;
        let mut worst_adjoint = 0.0f64;
        let mut worst_positive = 0.0f64;
        let mut worst_a_bound = 0.0f64;
        let mut worst_b_bound = 0.0f64;
        let mut worst_energy = 0.0f64;
        for _ in 0..rounds {
            let radius = rng.gen_range(1..=12);
            let u = random_field(&mut rng, radius, boundary, 5.0);
            let v = random_field(&mut rng, radius, boundary, 5.0);
            let scale = u.norm_sq().max(1e-30);

            let au = ops::laplacian(&u);
            let bbs = ops::forward_difference(&ops::backward_difference(&u));
            let bsb = ops::backward_difference(&ops::forward_difference(&u));
            let r = au.radius().max(bbs.radius()).max(bsb.radius()) as i64;
            for i in -r..=r {
                let a = au.get(i);
                worst_identity = worst_identity
                    .max((a - bbs.get(i)).abs() / scale.sqrt())
                    .max((a - bsb.get(i)).abs() / scale.sqrt());
            }

            let adj = ops::backward_difference(&u).inner(&v) - u.inner(&ops::forward_difference(&v));
            worst_adjoint = worst_adjoint.max(adj.abs() / scale.sqrt().max(v.norm()));

            let quad = reference::quadratic_form(&u);
            worst_positive = worst_positive.max(-quad / scale);
            worst_energy =
                worst_energy.max((au.inner(&u) - reference::gradient_energy(&u)).abs() / scale);

            worst_a_bound = worst_a_bound.max(au.norm_sq() / (16.0 * scale) - 1.0);
            worst_b_bound = worst_b_bound
                .max(ops::forward_difference(&u).norm_sq() / (4.0 * scale) - 1.0);
        }
        record(&mut results, &format!("factorization_{tag}"), worst_identity, 1e-12);
        record(&mut results, &format!("adjointness_{tag}"), worst_adjoint, 1e-12);
        record(&mut results, &format!("laplacian_nonnegative_{tag}"), worst_positive, 1e-12);
        record(&mut results, &format!("quadratic_form_energy_{tag}"), worst_energy, 1e-12);
        record(&mut results, &format!("laplacian_norm_bound_{tag}"), worst_a_bound, 0.0);
        record(&mut results, &format!("difference_norm_bound_{tag}"), worst_b_bound, 0.0);
    }
    results
}

/// The scalar dissipativity inequality over a fuzzed tuple cloud.
pub fn sign_inequality_suite(rounds: usize, seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..rounds {
        let x = rng.gen_range(-10.0..10.0);
        let y = rng.gen_range(-10.0..10.0);
        let b1 = rng.gen_range(0.05..4.0);
        let b2 = rng.gen_range(0.05..4.0);
        let p = rng.gen_range(1..=3);
        worst = worst.max(ops::reaction_sign_bound(x, y, b1, b2, p));
    }
    let mut results = Vec::new();
    record(&mut results, "reaction_sign_bound_nonpositive", worst, 0.0);
    results
}

/// Growth and Lipschitz contracts of the shipped sigma families on fuzzed
/// scalar pairs.
pub fn noise_contract_suite(rounds: usize, seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let delta = LatticeField::from_values(vec![0.3, 0.8, 0.5], Boundary::ZeroPad).unwrap();
    let families = [
        ("zero", NoiseCoefficient::zero()),
        ("linear", NoiseCoefficient::linear(0.2)),
        ("tanh", NoiseCoefficient::tanh(0.2, delta.clone())),
    ];
    let mut results = Vec::new();
    for (tag, sigma) in families {
        let lip = sigma.lipschitz();
        let beta = sigma.growth_slope();
        let mut worst_lip = 0.0f64;
        let mut worst_growth = 0.0f64;
        let mut worst_field_growth = 0.0f64;
        for _ in 0..rounds {
            let site = rng.gen_range(-1i64..=1);
            let s1 = rng.gen_range(-20.0..20.0);
            let s2 = rng.gen_range(-20.0..20.0);
            let d = (sigma.eval_scalar(site, s1) - sigma.eval_scalar(site, s2)).abs();
            worst_lip = worst_lip.max(d - lip * (s1 - s2).abs());
            let offset = match &sigma.family {
                crate::noise::SigmaFamily::Tanh { delta, .. } => delta.get(site).abs(),
                _ => 0.0,
            };
            worst_growth = worst_growth.max(sigma.eval_scalar(site, s1).abs() - offset - beta * s1.abs());

            let u = random_field(&mut rng, 3, Boundary::ZeroPad, 10.0);
            let lhs = sigma.eval(&u).norm_sq();
            let rhs = 2.0 * sigma.growth_offset_norm_sq() + 2.0 * beta * beta * u.norm_sq();
            worst_field_growth = worst_field_growth.max(lhs - rhs);
        }
        record(&mut results, &format!("sigma_lipschitz_{tag}"), worst_lip, 1e-12);
        record(&mut results, &format!("sigma_growth_{tag}"), worst_growth, 1e-12);
        record(&mut results, &format!("sigma_field_growth_{tag}"), worst_field_growth, 1e-12);
    }
    results
}

fn random_state(rng: &mut ChaCha8Rng, radius: usize, boundary: Boundary, scale: f64) -> PairState {
    PairState {
        u: random_field(rng, radius, boundary, scale),
        v: random_field(rng, radius, boundary, scale),
    }
}

fn fuzz_params(rng: &mut ChaCha8Rng) -> ModelParams {
    ModelParams {
        d1: rng.gen_range(0.01..1.0),
        d2: rng.gen_range(0.01..1.0),
        a1: rng.gen_range(0.2..2.0),
        a2: rng.gen_range(0.2..2.0),
        b1: rng.gen_range(0.2..2.0),
        b2: rng.gen_range(0.2..2.0),
        p: rng.gen_range(1..=2),
        f: LatticeField::zeros(0, Boundary::ZeroPad),
        g: LatticeField::zeros(0, Boundary::ZeroPad),
        h: LatticeField::zeros(0, Boundary::ZeroPad),
        sigma: NoiseCoefficient::zero(),
    }
}

/// Coercivity of the implicit operator: <psi, Op psi> >= (1 + lambda dt)
/// ||psi||_X^2, both boundary modes.
pub fn coercivity_suite(rounds: usize, seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut results = Vec::new();
    for boundary in [Boundary::ZeroPad, Boundary::Periodic] {
        let tag = format!("{boundary:?}").to_lowercase();
        let mut worst = 0.0f64;
        for _ in 0..rounds {
            let params = fuzz_params(&mut rng);
            let radius = rng.gen_range(0..=8);
            let dt = rng.gen_range(0.001..0.2);
            let cfg = SchemeConfig::new(dt, radius, boundary);
            let ctx = SchemeContext::new(&params, &cfg).unwrap();
            // norms up to 1e2 in the weighted metric
            let mut psi = random_state(&mut rng, radius, boundary, 1.0);
            let target: f64 = rng.gen_range(0.0..100.0);
            let norm = ctx.geometry.norm(&psi).max(1e-12);
            psi.u = psi.u.scaled(target / norm);
            psi.v = psi.v.scaled(target / norm);
            let gpsi = implicit_operator(&ctx, &psi).unwrap();
            let lhs = ctx.geometry.inner(&psi, &gpsi).unwrap();
            let rhs = (1.0 + params.lambda() * dt) * ctx.geometry.norm_sq(&psi);
            worst = worst.max((rhs - lhs) / rhs.max(1e-300));
        }
        record(&mut results, &format!("coercivity_{tag}"), worst, 1e-12);
    }
    results
}

/// Analytic Jacobian against central finite differences.
pub fn jacobian_suite(rounds: usize, seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut results = Vec::new();
    for boundary in [Boundary::ZeroPad, Boundary::Periodic] {
        let tag = format!("{boundary:?}").to_lowercase();
        let mut worst = 0.0f64;
        for _ in 0..rounds {
            let params = fuzz_params(&mut rng);
            let radius = rng.gen_range(0..=4);
            let dt = rng.gen_range(0.01..0.2);
            let cfg = SchemeConfig::new(dt, radius, boundary);
            let ctx = SchemeContext::new(&params, &cfg).unwrap();
            let psi = random_state(&mut rng, radius, boundary, 1.5);
            let sys = jacobian(&ctx, &psi);
            let sites = 2 * radius + 1;
            let step = 1e-6;
            for col_site in 0..sites {
                for pick_u in [true, false] {
                    let col = 2 * col_site + usize::from(!pick_u);
                    let mut plus = psi.clone();
                    let mut minus = psi.clone();
                    let site = col_site as i64 - radius as i64;
                    if pick_u {
                        plus.u.set(site, plus.u.get(site) + step);
                        minus.u.set(site, minus.u.get(site) - step);
                    } else {
                        plus.v.set(site, plus.v.get(site) + step);
                        minus.v.set(site, minus.v.get(site) - step);
                    }
                    let op_plus = implicit_operator(&ctx, &plus).unwrap();
                    let op_minus = implicit_operator(&ctx, &minus).unwrap();
                    for row_site in 0..sites {
                        let rs = row_site as i64 - radius as i64;
                        let fd_u = (op_plus.u.get(rs) - op_minus.u.get(rs)) / (2.0 * step);
                        let fd_v = (op_plus.v.get(rs) - op_minus.v.get(rs)) / (2.0 * step);
                        let scale = 1.0f64.max(fd_u.abs()).max(fd_v.abs());
                        worst = worst
                            .max((sys.get(2 * row_site, col) - fd_u).abs() / scale)
                            .max((sys.get(2 * row_site + 1, col) - fd_v).abs() / scale);
                    }
                }
            }
        }
        record(&mut results, &format!("jacobian_fd_{tag}"), worst, 1e-6);
    }
    results
}

/// The full table: every suite at its contract-level sample counts.
pub fn full_table(seed: u64) -> Vec<CheckResult> {
    let mut out = Vec::new();
    out.extend(operator_suite(1000, seed));
    out.extend(sign_inequality_suite(100_000, seed ^ 0x5e1f));
    out.extend(noise_contract_suite(1000, seed ^ 0xaa));
    out.extend(coercivity_suite(1000, seed ^ 0xc0e));
    out.extend(jacobian_suite(100, seed ^ 0x7ac));
    out
}
