//! The banded implicit solver against a fully independent dense Newton
//! oracle: the implicit map re-evaluated by scalar loops straight from the
//! update equations, differentiated by finite differences, solved with a
//! naive dense elimination.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use selkov_lattice::scheme::{solve_implicit, RightHandSide};
use selkov_lattice::{
    Boundary, LatticeField, ModelParams, NoiseCoefficient, PairState, SchemeConfig, SchemeContext,
    WeightedGeometry,
};

/// Scalar re-evaluation of the implicit map on the flattened state
/// [u_{-N}..u_N, v_{-N}..v_N], independent of the library kernels.
fn dense_implicit_map(params: &ModelParams, dt: f64, boundary: Boundary, z: &[f64]) -> Vec<f64> {
    let sites = z.len() / 2;
    let n = sites as i64;
    let lap = |w: &[f64], k: i64| -> f64 {
        let at = |i: i64| -> f64 {
            match boundary {
                Boundary::ZeroPad => {
                    if i < 0 || i >= n {
                        0.0
                    } else {
                        w[i as usize]
                    }
                }
                Boundary::Periodic => w[i.rem_euclid(n) as usize],
            }
        };
        -at(k - 1) + 2.0 * at(k) - at(k + 1)
    };
    let (u, v) = z.split_at(sites);
    let mut out = vec![0.0; 2 * sites];
    for k in 0..sites {
        let uk = u[k];
        let vk = v[k];
        let cross = uk.powi(2 * params.p as i32) * vk;
        let back = uk.powi(2 * params.p as i32 + 1);
        out[k] = uk
            + dt * (params.d1 * lap(u, k as i64) + params.a1 * uk - params.b1 * cross
                + params.b2 * back);
        out[sites + k] = vk
            + dt * (params.d2 * lap(v, k as i64) + params.a2 * vk + params.b1 * cross
                - params.b2 * back);
    }
    out
}

fn dense_gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let mut p = k;
        for i in (k + 1)..n {
            if a[i][k].abs() > a[p][k].abs() {
                p = i;
            }
        }
        a.swap(k, p);
        b.swap(k, p);
        assert!(a[k][k].abs() > 1e-300, "oracle matrix singular");
        for i in (k + 1)..n {
            let m = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= m * a[k][j];
            }
            b[i] -= m * b[k];
        }
    }
    for k in (0..n).rev() {
        for j in (k + 1)..n {
            b[k] -= a[k][j] * b[j];
        }
        b[k] /= a[k][k];
    }
    b
}

/// Dense Newton from the zero guess with finite-difference Jacobian.
fn dense_newton_oracle(
    params: &ModelParams,
    dt: f64,
    boundary: Boundary,
    rhs: &[f64],
) -> Vec<f64> {
    let n = rhs.len();
    let mut z = vec![0.0; n];
    for _ in 0..200 {
        let fz = dense_implicit_map(params, dt, boundary, &z);
        let res: Vec<f64> = fz.iter().zip(rhs).map(|(a, b)| a - b).collect();
        let norm: f64 = res.iter().map(|r| r * r).sum::<f64>().sqrt();
        if norm <= 1e-12 {
            return z;
        }
        let step = 1e-7;
        let mut jac = vec![vec![0.0; n]; n];
        for col in 0..n {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[col] += step;
            zm[col] -= step;
            let fp = dense_implicit_map(params, dt, boundary, &zp);
            let fm = dense_implicit_map(params, dt, boundary, &zm);
            for row in 0..n {
                jac[row][col] = (fp[row] - fm[row]) / (2.0 * step);
            }
        }
        let update = dense_gauss_solve(jac, res);
        for (zi, ui) in z.iter_mut().zip(&update) {
            *zi -= ui;
        }
    }
    panic!("dense oracle failed to converge");
}

fn random_params(rng: &mut ChaCha8Rng) -> ModelParams {
    ModelParams {
        d1: rng.gen_range(0.05..0.8),
        d2: rng.gen_range(0.05..0.8),
        a1: rng.gen_range(0.3..2.0),
        a2: rng.gen_range(0.3..2.0),
        b1: rng.gen_range(0.3..2.0),
        b2: rng.gen_range(0.3..2.0),
        p: rng.gen_range(1..=2),
        f: LatticeField::zeros(0, Boundary::ZeroPad),
        g: LatticeField::zeros(0, Boundary::ZeroPad),
        h: LatticeField::zeros(0, Boundary::ZeroPad),
        sigma: NoiseCoefficient::zero(),
    }
}

#[test]
fn banded_solver_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let geometry_of = |p: &ModelParams| WeightedGeometry::new(p.b1, p.b2);
    for boundary in [Boundary::ZeroPad, Boundary::Periodic] {
        for radius in [0usize, 1, 2] {
            for _ in 0..20 {
                let params = random_params(&mut rng);
                let dt = rng.gen_range(0.01..0.2);
                let cfg = SchemeConfig::new(dt, radius, boundary);
                let ctx = SchemeContext::new(&params, &cfg).unwrap();
                let sites = 2 * radius + 1;
                let rhs_flat: Vec<f64> = (0..2 * sites).map(|_| rng.gen_range(-0.8..0.8)).collect();
                let rhs = RightHandSide {
                    u: LatticeField::from_values(rhs_flat[..sites].to_vec(), boundary).unwrap(),
                    v: LatticeField::from_values(rhs_flat[sites..].to_vec(), boundary).unwrap(),
                };
                let (psi, diag) = solve_implicit(&ctx, &rhs, ctx.zero_state()).unwrap();
                assert!(
                    diag.final_residual <= 1e-10,
                    "residual contract: {}",
                    diag.final_residual
                );
                let oracle = dense_newton_oracle(&params, dt, boundary, &rhs_flat);
                let oracle_state = PairState::new(
                    LatticeField::from_values(oracle[..sites].to_vec(), boundary).unwrap(),
                    LatticeField::from_values(oracle[sites..].to_vec(), boundary).unwrap(),
                )
                .unwrap();
                let gap = geometry_of(&params).distance(&psi, &oracle_state);
                assert!(gap <= 1e-8, "solver vs oracle gap {gap}");
            }
        }
    }
}

#[test]
fn bem_step_matches_oracle_with_noise_sources() {
    // one full step at N=1 against the oracle, with forcing and noise terms
    let mut rng = ChaCha8Rng::seed_from_u64(405);
    for _ in 0..20 {
        let mut params = random_params(&mut rng);
        params.f = LatticeField::from_values(
            vec![rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)],
            Boundary::Periodic,
        )
        .unwrap();
        params.g = params.f.scaled(-0.5);
        params.h = LatticeField::from_values(vec![0.1, 0.2, 0.1], Boundary::Periodic).unwrap();
        params.sigma = NoiseCoefficient::linear(0.15);
        let dt = 0.05;
        let cfg = SchemeConfig::new(dt, 1, Boundary::Periodic);
        let ctx = SchemeContext::new(&params, &cfg).unwrap();
        let psi_m = PairState::new(
            LatticeField::from_values(
                vec![rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)],
                Boundary::Periodic,
            )
            .unwrap(),
            LatticeField::from_values(
                vec![rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)],
                Boundary::Periodic,
            )
            .unwrap(),
        )
        .unwrap();
        let dw = rng.gen_range(-0.3..0.3);
        let (next, _) = selkov_lattice::bem_step(&ctx, &psi_m, dw).unwrap();
        // oracle right-hand side assembled by scalar loop
        let mut rhs_flat = vec![0.0; 6];
        for k in 0..3 {
            let site = k as i64 - 1;
            rhs_flat[k] = psi_m.u.get(site)
                + params.f.get(site) * dt
                + (params.h.get(site) + 0.15 * psi_m.u.get(site)) * dw;
            rhs_flat[3 + k] = psi_m.v.get(site)
                + params.g.get(site) * dt
                + (params.h.get(site) + 0.15 * psi_m.v.get(site)) * dw;
        }
        let oracle = dense_newton_oracle(&params, dt, Boundary::Periodic, &rhs_flat);
        for k in 0..3 {
            let site = k as i64 - 1;
            assert!((next.u.get(site) - oracle[k]).abs() < 1e-8);
            assert!((next.v.get(site) - oracle[3 + k]).abs() < 1e-8);
        }
    }
}
