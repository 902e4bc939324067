//! Scheme-level contracts: coercivity, the per-step residual guarantee,
//! local monotonicity in its fitted step-size regime, and coupled-noise
//! truncation comparisons.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use selkov_lattice::scheme::{implicit_operator, solve_implicit, RightHandSide};
use selkov_lattice::{
    bem_step, simulate_coupled_pair, Boundary, LatticeField, ModelParams, NoiseCoefficient,
    NoiseStream, PairState, SchemeConfig, SchemeContext,
};

fn random_field(rng: &mut ChaCha8Rng, radius: usize, boundary: Boundary, scale: f64) -> LatticeField {
    let mut f = LatticeField::zeros(radius, boundary);
    for x in f.values_mut() {
        *x = rng.gen_range(-scale..scale);
    }
    f
}

fn random_state(rng: &mut ChaCha8Rng, radius: usize, boundary: Boundary, scale: f64) -> PairState {
    PairState {
        u: random_field(rng, radius, boundary, scale),
        v: random_field(rng, radius, boundary, scale),
    }
}

fn base_params() -> ModelParams {
    ModelParams {
        d1: 0.2,
        d2: 0.35,
        a1: 1.0,
        a2: 1.3,
        b1: 0.9,
        b2: 1.1,
        p: 1,
        f: LatticeField::zeros(0, Boundary::ZeroPad),
        g: LatticeField::zeros(0, Boundary::ZeroPad),
        h: LatticeField::zeros(0, Boundary::ZeroPad),
        sigma: NoiseCoefficient::zero(),
    }
}

#[test]
fn coercivity_ratio_over_fuzzed_states() {
    // <psi, Op psi> >= (1 + lambda dt) ||psi||_X^2 with ||psi||_X up to 1e2
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    for boundary in [Boundary::ZeroPad, Boundary::Periodic] {
        for _ in 0..1000 {
            let params = base_params();
            let dt = rng.gen_range(0.005..0.24);
            let radius = rng.gen_range(0..=10);
            let cfg = SchemeConfig::new(dt, radius, boundary);
            let ctx = SchemeContext::new(&params, &cfg).unwrap();
            let mut psi = random_state(&mut rng, radius, boundary, 1.0);
            let target: f64 = rng.gen_range(1e-3..100.0);
            let norm = ctx.geometry.norm(&psi).max(1e-12);
            psi.u = psi.u.scaled(target / norm);
            psi.v = psi.v.scaled(target / norm);
            let gpsi = implicit_operator(&ctx, &psi).unwrap();
            let lhs = ctx.geometry.inner(&psi, &gpsi).unwrap();
            let rhs = (1.0 + params.lambda() * dt) * ctx.geometry.norm_sq(&psi);
            assert!(lhs >= rhs - 1e-12 * rhs.abs(), "coercivity: {lhs} < {rhs}");
        }
    }
}

#[test]
fn residual_contract_on_random_steps() {
    let mut rng = ChaCha8Rng::seed_from_u64(72);
    let mut params = base_params();
    params.f = random_field(&mut rng, 6, Boundary::ZeroPad, 0.5);
    params.g = random_field(&mut rng, 6, Boundary::ZeroPad, 0.5);
    params.h = random_field(&mut rng, 6, Boundary::ZeroPad, 0.3);
    params.sigma = NoiseCoefficient::linear(0.2);
    for boundary in [Boundary::ZeroPad, Boundary::Periodic] {
        let cfg = SchemeConfig::new(0.1, 6, boundary);
        let ctx = SchemeContext::new(&params, &cfg).unwrap();
        for _ in 0..100 {
            let psi = random_state(&mut rng, 6, boundary, 1.0);
            let dw = rng.gen_range(-0.5..0.5);
            let (_, diag) = bem_step(&ctx, &psi, dw).unwrap();
            assert!(diag.final_residual <= cfg.newton_tol);
        }
    }
}

/// Local monotonicity: <psi1 - psi2, Op psi1 - Op psi2> > 0 holds whenever
/// dt is below a ceiling fitted from the nonlinearity on the ball. Outside
/// the fitted regime violations are only logged.
#[test]
fn local_monotonicity_in_fitted_regime() {
    let mut rng = ChaCha8Rng::seed_from_u64(73);
    let params = base_params();
    let radius = 4usize;
    let ball = 2.0f64;
    // Fit the worst nonlinear contribution rate K on the ball with a probe
    // step size, so dt_mono = 1 / (2 K) is safe.
    let probe_cfg = SchemeConfig::new(0.05, radius, Boundary::Periodic);
    let probe_ctx = SchemeContext::new(&params, &probe_cfg).unwrap();
    let mut fitted_rate = 0.0f64;
    let draw_in_ball = |rng: &mut ChaCha8Rng| {
        let mut s = random_state(rng, radius, Boundary::Periodic, 1.0);
        let norm = probe_ctx.geometry.norm(&s).max(1e-12);
        let target: f64 = rng.gen_range(0.0..ball);
        s.u = s.u.scaled(target / norm);
        s.v = s.v.scaled(target / norm);
        s
    };
    for _ in 0..400 {
        let s1 = draw_in_ball(&mut rng);
        let s2 = draw_in_ball(&mut rng);
        let d = s1.sub(&s2).unwrap();
        let dn = probe_ctx.geometry.norm_sq(&d);
        if dn < 1e-14 {
            continue;
        }
        let gd = implicit_operator(&probe_ctx, &s1)
            .unwrap()
            .sub(&implicit_operator(&probe_ctx, &s2).unwrap())
            .unwrap();
        let witness = probe_ctx.geometry.inner(&d, &gd).unwrap();
        // witness = dn + dt * (linear + nonlinear parts); anything below dn
        // came from the nonlinearity
        let rate = (dn - witness) / (probe_cfg.dt * dn);
        fitted_rate = fitted_rate.max(rate);
    }
    let dt_mono = 0.5 / fitted_rate.max(1e-6);
    let cfg = SchemeConfig::new(dt_mono.min(0.2), radius, Boundary::Periodic);
    let ctx = SchemeContext::new(&params, &cfg).unwrap();
    let mut checked = 0usize;
    for _ in 0..400 {
        let s1 = draw_in_ball(&mut rng);
        let s2 = draw_in_ball(&mut rng);
        let d = s1.sub(&s2).unwrap();
        if ctx.geometry.norm_sq(&d) < 1e-14 {
            continue;
        }
        let gd = implicit_operator(&ctx, &s1)
            .unwrap()
            .sub(&implicit_operator(&ctx, &s2).unwrap())
            .unwrap();
        let witness = ctx.geometry.inner(&d, &gd).unwrap();
        assert!(witness > 0.0, "monotonicity in fitted regime");
        checked += 1;
    }
    assert!(checked > 300);
    // outside the regime: log only
    let wild_cfg = SchemeConfig::new(0.24, radius, Boundary::Periodic);
    let wild_ctx = SchemeContext::new(&params, &wild_cfg).unwrap();
    let mut violations = 0usize;
    for _ in 0..100 {
        let mut s1 = random_state(&mut rng, radius, Boundary::Periodic, 1.0);
        let scale = 50.0 / wild_ctx.geometry.norm(&s1).max(1e-12);
        s1.u = s1.u.scaled(scale);
        s1.v = s1.v.scaled(scale);
        let s2 = random_state(&mut rng, radius, Boundary::Periodic, 1.0);
        let d = s1.sub(&s2).unwrap();
        let gd = implicit_operator(&wild_ctx, &s1)
            .unwrap()
            .sub(&implicit_operator(&wild_ctx, &s2).unwrap())
            .unwrap();
        if wild_ctx.geometry.inner(&d, &gd).unwrap() <= 0.0 {
            violations += 1;
        }
    }
    eprintln!("monotonicity violations outside fitted regime: {violations}/100 (logged, not asserted)");
}

#[test]
fn trust_region_recovers_from_distant_guess() {
    // Large right-hand side forces the polynomial terms into play; the
    // solver must still land on a certified-residual root.
    let mut rng = ChaCha8Rng::seed_from_u64(74);
    let params = base_params();
    let cfg = SchemeConfig::new(0.1, 3, Boundary::Periodic);
    let ctx = SchemeContext::new(&params, &cfg).unwrap();
    for _ in 0..20 {
        let rhs = RightHandSide {
            u: random_field(&mut rng, 3, Boundary::Periodic, 20.0),
            v: random_field(&mut rng, 3, Boundary::Periodic, 20.0),
        };
        let (_, diag) = solve_implicit(&ctx, &rhs, ctx.zero_state()).unwrap();
        assert!(diag.final_residual <= cfg.newton_tol);
    }
}

#[test]
fn coupled_gap_respects_support_propagation() {
    // Sources confined to |i| <= 2 inside N1 = 12: until the disturbance
    // reaches the wrap boundary, the truncated and reference runs agree to
    // far below the state scale (threshold frozen from a reference run).
    let mut f = LatticeField::zeros(2, Boundary::ZeroPad);
    f.set(0, 0.5);
    f.set(1, -0.3);
    f.set(-1, 0.2);
    let params = ModelParams {
        d1: 0.1,
        d2: 0.15,
        a1: 1.0,
        a2: 1.2,
        b1: 1.0,
        b2: 0.8,
        p: 1,
        f: f.clone(),
        g: f.scaled(0.7),
        h: f.scaled(0.5),
        sigma: NoiseCoefficient::zero(),
    };
    let cfg1 = SchemeConfig::new(0.1, 12, Boundary::Periodic);
    let cfg2 = SchemeConfig::new(0.1, 24, Boundary::Periodic);
    let psi0 = PairState::zeros(2, Boundary::ZeroPad);
    let stream = NoiseStream::new(99, 0);
    let (_, _, gap) =
        simulate_coupled_pair(&params, &cfg1, &cfg2, &psi0, 40, &stream, 40).unwrap();
    for (m, g) in gap.iter().enumerate().take(13) {
        assert!(*g <= 1e-34, "early gap at m={m}: {g}");
    }
    // the disturbance does eventually reach the boundary region
    assert!(gap[40] > gap[10]);
}

#[test]
fn coupled_gap_decreases_with_truncation() {
    // Lattice-wide decaying forcing makes the truncation error visible:
    // mean gap over shared streams shrinks as N1 grows toward N2.
    let radius = 32usize;
    let mut f = LatticeField::zeros(radius, Boundary::ZeroPad);
    let mut h = LatticeField::zeros(radius, Boundary::ZeroPad);
    for i in -(radius as i64)..=(radius as i64) {
        f.set(i, 0.4 * (-0.12 * i.abs() as f64).exp());
        h.set(i, 0.3 * (-0.1 * i.abs() as f64).exp());
    }
    let params = ModelParams {
        d1: 0.2,
        d2: 0.2,
        a1: 1.0,
        a2: 1.0,
        b1: 1.0,
        b2: 1.0,
        p: 1,
        f: f.clone(),
        g: f.scaled(-0.6),
        h,
        sigma: NoiseCoefficient::linear(0.2),
    };
    let psi0 = PairState::zeros(4, Boundary::ZeroPad);
    let n_streams = 30;
    let horizon = 30;
    let mut means = Vec::new();
    for n1 in [4usize, 8, 16] {
        let cfg1 = SchemeConfig::new(0.1, n1, Boundary::Periodic);
        let cfg2 = SchemeConfig::new(0.1, radius, Boundary::Periodic);
        let mut total = 0.0;
        for s in 0..n_streams {
            let stream = NoiseStream::new(1234, s);
            let (_, _, gap) =
                simulate_coupled_pair(&params, &cfg1, &cfg2, &psi0, horizon, &stream, horizon)
                    .unwrap();
            total += gap[horizon];
        }
        means.push(total / n_streams as f64);
    }
    assert!(
        means[0] > means[1] && means[1] > means[2],
        "gap means not decreasing: {means:?}"
    );
}
