//! Exact kernels on lattice fields: the discrete Laplacian A, the difference
//! operators B and B* with A = BB* = B*B and (B*u, v) = (u, Bv), and the
//! Selkov reaction nonlinearities u^{2p} v and u^{2p+1}.
//!
//! Boundary closure:
//!   * `ZeroPad` applies the bi-infinite operator to the zero-extended field.
//!     The image of a field of radius N has support inside radius N+1, so the
//!     result is returned on the grown window. This keeps the factorization
//!     and adjointness identities exact; callers that need a fixed window
//!     (the time stepper) restrict afterwards.
//!   * `Periodic` wraps indices on {-N..N} and preserves the window.

use crate::error::{CoreError, Result};
use crate::field::{Boundary, LatticeField};

fn stencil(u: &LatticeField, out_radius: usize, f: impl Fn(i64) -> f64) -> LatticeField {
    let mut out = LatticeField::zeros(out_radius, u.boundary());
    let r = out_radius as i64;
    for i in -r..=r {
        out.set(i, f(i));
    }
    out
}

fn wrap_left(i: i64, r: i64) -> i64 {
    if i == -r {
        r
    } else {
        i - 1
    }
}

fn wrap_right(i: i64, r: i64) -> i64 {
    if i == r {
        -r
    } else {
        i + 1
    }
}

/// (Au)_i = -u_{i-1} + 2 u_i - u_{i+1}.
pub fn laplacian(u: &LatticeField) -> LatticeField {
    let r = u.radius() as i64;
    match u.boundary() {
        Boundary::ZeroPad => stencil(u, u.radius() + 1, |i| {
            -u.get(i - 1) + 2.0 * u.get(i) - u.get(i + 1)
        }),
        Boundary::Periodic => stencil(u, u.radius(), |i| {
            -u.get(wrap_left(i, r)) + 2.0 * u.get(i) - u.get(wrap_right(i, r))
        }),
    }
}

/// (Bu)_i = u_{i+1} - u_i.
pub fn forward_difference(u: &LatticeField) -> LatticeField {
    let r = u.radius() as i64;
    match u.boundary() {
        Boundary::ZeroPad => stencil(u, u.radius() + 1, |i| u.get(i + 1) - u.get(i)),
        Boundary::Periodic => stencil(u, u.radius(), |i| u.get(wrap_right(i, r)) - u.get(i)),
    }
}

/// (B*u)_i = u_{i-1} - u_i.
pub fn backward_difference(u: &LatticeField) -> LatticeField {
    let r = u.radius() as i64;
    match u.boundary() {
        Boundary::ZeroPad => stencil(u, u.radius() + 1, |i| u.get(i - 1) - u.get(i)),
        Boundary::Periodic => stencil(u, u.radius(), |i| u.get(wrap_left(i, r)) - u.get(i)),
    }
}

fn finite_or_overflow(f: LatticeField) -> Result<LatticeField> {
    if f.is_finite() {
        Ok(f)
    } else {
        Err(CoreError::NonFiniteState { step: None })
    }
}

/// Componentwise u_i^{2p} v_i, the autocatalytic coupling term.
pub fn forward_reaction(u: &LatticeField, v: &LatticeField, p: u32) -> Result<LatticeField> {
    assert!(p >= 1, "exponent p must be >= 1");
    finite_or_overflow(u.zip_map(v, |ui, vi| ui.powi(2 * p as i32) * vi)?)
}

/// Componentwise u_i^{2p+1}, the odd-power back reaction. Sign-preserving.
pub fn reverse_reaction(u: &LatticeField, p: u32) -> Result<LatticeField> {
    assert!(p >= 1, "exponent p must be >= 1");
    finite_or_overflow(u.map(|ui| ui.powi(2 * p as i32 + 1)))
}

/// 2 b1 b2 x^{2p+1} y - x^{2p} (b2^2 x^2 + b1^2 y^2).
///
/// Equals -x^{2p} (b2 x - b1 y)^2, hence always <= 0: the scalar kernel of
/// the dissipativity estimates. Exposed for fuzzing.
pub fn reaction_sign_bound(x: f64, y: f64, b1: f64, b2: f64, p: u32) -> f64 {
    let x2p = x.powi(2 * p as i32);
    2.0 * b1 * b2 * x2p * x * y - x2p * (b2 * b2 * x * x + b1 * b1 * y * y)
}
