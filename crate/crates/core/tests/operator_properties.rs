//! Fuzzed identities of the lattice kernels against direct-summation
//! oracles written from the stencil definitions.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use selkov_lattice::ops;
use selkov_lattice::{Boundary, LatticeField, NoiseCoefficient};

fn random_field(rng: &mut ChaCha8Rng, radius: usize, boundary: Boundary, scale: f64) -> LatticeField {
    let mut f = LatticeField::zeros(radius, boundary);
    for x in f.values_mut() {
        *x = rng.gen_range(-scale..scale);
    }
    f
}

/// Direct summation of (Au, u) from the stencil, independent of the kernel.
fn quadratic_form_oracle(u: &LatticeField) -> f64 {
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

fn gradient_energy_oracle(u: &LatticeField) -> f64 {
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

#[test]
fn quadratic_form_equals_gradient_energy() {
    // random u at N=8: (Au, u) = ||Bu||^2 to 1e-12 relative
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for boundary in [Boundary::ZeroPad, Boundary::Periodic] {
        for _ in 0..200 {
            let u = random_field(&mut rng, 8, boundary, 3.0);
            let quad = ops::laplacian(&u).inner(&u);
            let energy = ops::forward_difference(&u).norm_sq();
            let oracle_quad = quadratic_form_oracle(&u);
            let oracle_energy = gradient_energy_oracle(&u);
            let scale = u.norm_sq().max(1e-12);
            assert!((quad - oracle_quad).abs() <= 1e-12 * scale);
            assert!((energy - oracle_energy).abs() <= 1e-12 * scale);
            assert!((quad - energy).abs() <= 1e-12 * scale);
        }
    }
}

#[test]
fn adjointness_direct_summation() {
    // (B*u, v) - (u, Bv) = 0 within 1e-12, random u, v at N=6
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for boundary in [Boundary::ZeroPad, Boundary::Periodic] {
        for _ in 0..200 {
            let u = random_field(&mut rng, 6, boundary, 3.0);
            let v = random_field(&mut rng, 6, boundary, 3.0);
            let lhs = ops::backward_difference(&u).inner(&v);
            let rhs = u.inner(&ops::forward_difference(&v));
            let scale = (u.norm() * v.norm()).max(1e-12);
            assert!((lhs - rhs).abs() <= 1e-12 * scale);
        }
    }
}

#[test]
fn factorization_both_orders_both_boundaries() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for boundary in [Boundary::ZeroPad, Boundary::Periodic] {
        for _ in 0..500 {
            let radius = rng.gen_range(0..=10);
            let u = random_field(&mut rng, radius, boundary, 4.0);
            let au = ops::laplacian(&u);
            let bbs = ops::forward_difference(&ops::backward_difference(&u));
            let bsb = ops::backward_difference(&ops::forward_difference(&u));
            let r = au.radius().max(bbs.radius()) as i64;
            let scale = u.norm().max(1e-12);
            for i in -r..=r {
                assert!((au.get(i) - bbs.get(i)).abs() <= 1e-12 * scale);
                assert!((au.get(i) - bsb.get(i)).abs() <= 1e-12 * scale);
            }
        }
    }
}

#[test]
fn norm_bounds_hold() {
    // ||Au|| <= 4 ||u|| and ||Bu|| <= 2 ||u||
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    for boundary in [Boundary::ZeroPad, Boundary::Periodic] {
        for _ in 0..1000 {
            let radius = rng.gen_range(0..=12);
            let u = random_field(&mut rng, radius, boundary, 5.0);
            assert!(ops::laplacian(&u).norm() <= 4.0 * u.norm() + 1e-12);
            assert!(ops::forward_difference(&u).norm() <= 2.0 * u.norm() + 1e-12);
            assert!(ops::backward_difference(&u).norm() <= 2.0 * u.norm() + 1e-12);
        }
    }
}

#[test]
fn odd_power_difference_is_monotone() {
    // (G(u) - G(v), u - v) >= 0 over 10^3 random pairs
    let mut rng = ChaCha8Rng::seed_from_u64(35);
    for _ in 0..1000 {
        let p = rng.gen_range(1..=3);
        let u = random_field(&mut rng, 5, Boundary::ZeroPad, 2.0);
        let v = random_field(&mut rng, 5, Boundary::ZeroPad, 2.0);
        let gu = ops::reverse_reaction(&u, p).unwrap();
        let gv = ops::reverse_reaction(&v, p).unwrap();
        let inner = gu.sub(&gv).unwrap().inner(&u.sub(&v).unwrap());
        assert!(inner >= -1e-12);
    }
}

/// Fitted local Lipschitz ratios of the reaction terms grow with the ball
/// radius; no universal constant is asserted, only boundedness per ball and
/// growth across balls.
#[test]
fn local_lipschitz_ratios_grow_with_ball() {
    let mut rng = ChaCha8Rng::seed_from_u64(36);
    let mut fitted_cross = Vec::new();
    let mut fitted_back = Vec::new();
    for &ball in &[1.0f64, 2.0, 4.0] {
        let mut worst_cross = 0.0f64;
        let mut worst_back = 0.0f64;
        for _ in 0..1000 {
            let draw = |rng: &mut ChaCha8Rng| {
                let f = random_field(rng, 4, Boundary::ZeroPad, 1.0);
                let norm = f.norm().max(1e-9);
                f.scaled(rng.gen_range(0.0..1.0) * ball / norm)
            };
            let (u1, v1, u2, v2) = (draw(&mut rng), draw(&mut rng), draw(&mut rng), draw(&mut rng));
            let df = ops::forward_reaction(&u1, &v1, 1)
                .unwrap()
                .sub(&ops::forward_reaction(&u2, &v2, 1).unwrap())
                .unwrap()
                .norm_sq();
            let denom = u1.sub(&u2).unwrap().norm_sq() + v1.sub(&v2).unwrap().norm_sq();
            if denom > 1e-12 {
                worst_cross = worst_cross.max(df / denom);
            }
            let dg = ops::reverse_reaction(&u1, 1)
                .unwrap()
                .sub(&ops::reverse_reaction(&u2, 1).unwrap())
                .unwrap()
                .norm_sq();
            let du = u1.sub(&u2).unwrap().norm_sq();
            if du > 1e-12 {
                worst_back = worst_back.max(dg / du);
            }
        }
        assert!(worst_cross.is_finite() && worst_back.is_finite());
        fitted_cross.push(worst_cross);
        fitted_back.push(worst_back);
    }
    assert!(fitted_cross[0] < fitted_cross[1] && fitted_cross[1] < fitted_cross[2]);
    assert!(fitted_back[0] < fitted_back[1] && fitted_back[1] < fitted_back[2]);
}

#[test]
fn sign_inequality_large_fuzz() {
    // 10^5 tuples with |x|, |y| <= 10, p in {1,2,3}: never positive
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    for _ in 0..100_000 {
        let x = rng.gen_range(-10.0..10.0);
        let y = rng.gen_range(-10.0..10.0);
        let b1 = rng.gen_range(0.01..5.0);
        let b2 = rng.gen_range(0.01..5.0);
        let p = rng.gen_range(1..=3);
        assert!(ops::reaction_sign_bound(x, y, b1, b2, p) <= 0.0);
    }
}

proptest! {
    #[test]
    fn prop_sign_bound_nonpositive(
        x in -50.0f64..50.0,
        y in -50.0f64..50.0,
        b1 in 0.01f64..10.0,
        b2 in 0.01f64..10.0,
        p in 1u32..4,
    ) {
        prop_assert!(ops::reaction_sign_bound(x, y, b1, b2, p) <= 0.0);
    }

    #[test]
    fn prop_adjointness(
        us in prop::collection::vec(-5.0f64..5.0, 7),
        vs in prop::collection::vec(-5.0f64..5.0, 7),
        periodic in any::<bool>(),
    ) {
        let boundary = if periodic { Boundary::Periodic } else { Boundary::ZeroPad };
        let u = LatticeField::from_values(us, boundary).unwrap();
        let v = LatticeField::from_values(vs, boundary).unwrap();
        let lhs = ops::backward_difference(&u).inner(&v);
        let rhs = u.inner(&ops::forward_difference(&v));
        let scale = (u.norm() * v.norm()).max(1.0);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
    }

    #[test]
    fn prop_sigma_growth(
        s in -100.0f64..100.0,
        beta in 0.0f64..2.0,
        delta in 0.0f64..3.0,
    ) {
        let field = LatticeField::from_values(vec![delta], Boundary::ZeroPad).unwrap();
        let sigma = NoiseCoefficient::tanh(beta, field);
        let val = sigma.eval_scalar(0, s).abs();
        prop_assert!(val <= delta + beta * s.abs() + 1e-12);
    }
}
