//! Model coefficients for the random lattice reversible Selkov system and
//! the derived constants used by the bound checks.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::field::{LatticeField, WeightedGeometry};
use crate::noise::NoiseCoefficient;

/// Coefficients of
///   du_i = (d1 (u_{i+1} - 2u_i + u_{i-1}) - a1 u_i + b1 u_i^{2p} v_i
///           - b2 u_i^{2p+1} + f_i) dt + [h_i + sigma_i(u_i)] dW,
///   dv_i = (d2 (v_{i+1} - 2v_i + v_{i-1}) - a2 v_i - b1 u_i^{2p} v_i
///           + b2 u_i^{2p+1} + g_i) dt + [h_i + sigma_i(v_i)] dW,
/// with scalar Wiener process W and a single noise intensity field h shared
/// by both species.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub d1: f64,
    pub d2: f64,
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub p: u32,
    pub f: LatticeField,
    pub g: LatticeField,
    pub h: LatticeField,
    pub sigma: NoiseCoefficient,
}

impl ModelParams {
    /// Dissipation rate lambda = min(a1, a2).
    pub fn lambda(&self) -> f64 {
        self.a1.min(self.a2)
    }

    pub fn geometry(&self) -> WeightedGeometry {
        WeightedGeometry::new(self.b1, self.b2)
    }

    /// Positivity of all structural coefficients and p >= 1.
    pub fn check_positive(&self) -> Result<()> {
        let checks = [
            ("d1", self.d1),
            ("d2", self.d2),
            ("a1", self.a1),
            ("a2", self.a2),
            ("b1", self.b1),
            ("b2", self.b2),
        ];
        for (name, value) in checks {
            if !(value > 0.0) || !value.is_finite() {
                return Err(CoreError::rejected(
                    &format!("{name} > 0"),
                    value,
                    "positive finite",
                ));
            }
        }
        if self.p < 1 {
            return Err(CoreError::rejected("p >= 1", self.p, ">= 1"));
        }
        for (name, field) in [("f", &self.f), ("g", &self.g), ("h", &self.h)] {
            if !field.is_finite() {
                return Err(CoreError::rejected(
                    &format!("{name} finite"),
                    "non-finite entries",
                    "finite",
                ));
            }
        }
        Ok(())
    }

    /// Dissipation-dominates-noise condition lambda > 16 beta^2, required by
    /// the invariant-measure and moment studies.
    pub fn check_noise_dominated(&self) -> Result<()> {
        let lambda = self.lambda();
        let beta = self.sigma.growth_slope();
        if lambda <= 16.0 * beta * beta {
            return Err(CoreError::rejected(
                "lambda > 16 beta^2",
                format!("lambda={lambda}, 16 beta^2={}", 16.0 * beta * beta),
                "lambda strictly larger",
            ));
        }
        Ok(())
    }

    /// Step-size restriction dt < 1/(4 lambda) for the mean-square decay
    /// factor 1 - lambda dt / 4.
    pub fn check_step_size(&self, dt: f64) -> Result<()> {
        let lambda = self.lambda();
        if !(dt > 0.0) || dt >= 1.0 / (4.0 * lambda) {
            return Err(CoreError::rejected(
                "0 < dt < 1/(4 lambda)",
                dt,
                format!("< {}", 1.0 / (4.0 * lambda)),
            ));
        }
        Ok(())
    }

    /// The constant offset M of the mean-square bound
    ///   E ||psi_m||_X^2 <= ||psi_0||_X^2 e^{m ln(1 - lambda dt / 4)} + M,
    /// independent of psi_0 and dt:
    ///   M = (b2 ||f||^2 / lambda + b1 ||g||^2 / lambda
    ///        + 2 (b2 + b1) ||h||^2 + 4 (b2 + b1) ||delta||^2) * 4 / lambda.
    pub fn moment_bound_offset(&self) -> f64 {
        let lambda = self.lambda();
        let delta_sq = self.sigma.growth_offset_norm_sq();
        let inner = self.b2 * self.f.norm_sq() / lambda
            + self.b1 * self.g.norm_sq() / lambda
            + 2.0 * self.b2 * self.h.norm_sq()
            + 2.0 * self.b1 * self.h.norm_sq()
            + 4.0 * self.b2 * delta_sq
            + 4.0 * self.b1 * delta_sq;
        inner * 4.0 / lambda
    }

    /// Bound value at step m for initial energy ||psi_0||_X^2.
    pub fn moment_bound(&self, initial_energy: f64, dt: f64, m: usize) -> f64 {
        let lambda = self.lambda();
        let factor = (m as f64 * (1.0 - lambda * dt / 4.0).ln()).exp();
        initial_energy * factor + self.moment_bound_offset()
    }

    /// Mask all forcing and noise data to the window |i| <= radius.
    pub fn resized(&self, radius: usize) -> ModelParams {
        ModelParams {
            f: self.f.resized(radius),
            g: self.g.resized(radius),
            h: self.h.resized(radius),
            sigma: self.sigma.resized(radius),
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Boundary;

    fn base() -> ModelParams {
        ModelParams {
            d1: 0.1,
            d2: 0.1,
            a1: 1.0,
            a2: 1.0,
            b1: 1.0,
            b2: 1.0,
            p: 1,
            f: LatticeField::zeros(0, Boundary::ZeroPad),
            g: LatticeField::zeros(0, Boundary::ZeroPad),
            h: LatticeField::zeros(0, Boundary::ZeroPad),
            sigma: NoiseCoefficient::zero(),
        }
    }

    #[test]
    fn noise_domination_threshold() {
        // beta = 0.2: 16 beta^2 = 0.64 < 1 accepted
        let mut p = base();
        p.sigma = NoiseCoefficient::linear(0.2);
        assert!(p.check_noise_dominated().is_ok());
        // beta = 0.3: 16 beta^2 = 1.44 > 1 rejected
        p.sigma = NoiseCoefficient::linear(0.3);
        assert!(p.check_noise_dominated().is_err());
    }

    #[test]
    fn step_size_ceiling() {
        let p = base();
        assert!(p.check_step_size(0.2).is_ok());
        // dt = 0.3 violates dt < 0.25 at lambda = 1
        assert!(p.check_step_size(0.3).is_err());
    }

    #[test]
    fn moment_offset_vanishes_without_sources() {
        assert_eq!(base().moment_bound_offset(), 0.0);
    }

    #[test]
    fn decay_factor_matches_power_form() {
        // lambda=1, dt=0.1, m=10: e^{10 ln(1-0.025)} = (1-0.025)^10
        let p = base();
        let bound = p.moment_bound(1.0, 0.1, 10);
        assert!((bound - 0.975f64.powi(10)).abs() < 1e-14);
    }
}
