//! Noise coefficients sigma_i(s) with certified Lipschitz and linear-growth
//! constants, and the replayable scalar Wiener increment stream.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::field::LatticeField;

/// Concrete sigma families. Each certifies its own Lipschitz constant and
/// the linear-growth envelope |sigma_i(s)| <= delta_i + beta |s|.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SigmaFamily {
    /// sigma_i(s) = 0.
    Zero,
    /// sigma_i(s) = beta * s.
    Linear { beta: f64 },
    /// sigma_i(s) = delta_i * tanh(s) + beta * s.
    Tanh { beta: f64, delta: LatticeField },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseCoefficient {
    pub family: SigmaFamily,
}

impl NoiseCoefficient {
    pub fn zero() -> Self {
        NoiseCoefficient {
            family: SigmaFamily::Zero,
        }
    }

    pub fn linear(beta: f64) -> Self {
        NoiseCoefficient {
            family: SigmaFamily::Linear { beta },
        }
    }

    pub fn tanh(beta: f64, delta: LatticeField) -> Self {
        NoiseCoefficient {
            family: SigmaFamily::Tanh { beta, delta },
        }
    }

    /// Componentwise sigma_i(u_i). The delta field is aligned by site and
    /// reads as zero outside its support.
    pub fn eval(&self, u: &LatticeField) -> LatticeField {
        match &self.family {
            SigmaFamily::Zero => LatticeField::zeros(u.radius(), u.boundary()),
            SigmaFamily::Linear { beta } => u.scaled(*beta),
            SigmaFamily::Tanh { beta, delta } => {
                let mut out = LatticeField::zeros(u.radius(), u.boundary());
                for i in u.sites() {
                    let s = u.get(i);
                    out.set(i, delta.get(i) * s.tanh() + beta * s);
                }
                out
            }
        }
    }

    /// Scalar sigma_i(s) at one site.
    pub fn eval_scalar(&self, site: i64, s: f64) -> f64 {
        match &self.family {
            SigmaFamily::Zero => 0.0,
            SigmaFamily::Linear { beta } => beta * s,
            SigmaFamily::Tanh { beta, delta } => delta.get(site) * s.tanh() + beta * s,
        }
    }

    /// Certified Lipschitz constant L_sigma.
    pub fn lipschitz(&self) -> f64 {
        match &self.family {
            SigmaFamily::Zero => 0.0,
            SigmaFamily::Linear { beta } => beta.abs(),
            // |d/ds (delta tanh(s) + beta s)| <= |delta| + beta
            SigmaFamily::Tanh { beta, delta } => beta.abs() + delta.sup_norm(),
        }
    }

    /// Growth slope beta in |sigma_i(s)| <= delta_i + beta |s|.
    pub fn growth_slope(&self) -> f64 {
        match &self.family {
            SigmaFamily::Zero => 0.0,
            SigmaFamily::Linear { beta } | SigmaFamily::Tanh { beta, .. } => beta.abs(),
        }
    }

    /// Squared l^2 norm of the growth offset (delta_i); zero for the
    /// Zero and Linear families.
    pub fn growth_offset_norm_sq(&self) -> f64 {
        match &self.family {
            SigmaFamily::Tanh { delta, .. } => delta.norm_sq(),
            _ => 0.0,
        }
    }

    /// Mask the family data to the window |i| <= radius (sigma_N of the
    /// truncated scheme).
    pub fn resized(&self, radius: usize) -> NoiseCoefficient {
        match &self.family {
            SigmaFamily::Tanh { beta, delta } => NoiseCoefficient::tanh(*beta, delta.resized(radius)),
            other => NoiseCoefficient {
                family: other.clone(),
            },
        }
    }
}

/// Source of the scalar Wiener increments driving a run.
pub trait WienerIncrements {
    /// dW_m for the step of length dt starting at time m * dt.
    fn increment(&self, m: u64, dt: f64) -> f64;
}

/// Replayable scalar Wiener increments: dW_m ~ Normal(0, dt), a pure
/// function of (seed, trajectory_id, m). The same stream can drive runs at
/// different truncations, which is what the coupled comparisons need.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseStream {
    pub seed: u64,
    pub trajectory_id: u64,
}

impl NoiseStream {
    pub fn new(seed: u64, trajectory_id: u64) -> Self {
        NoiseStream {
            seed,
            trajectory_id,
        }
    }

    /// Standard normal draw for step m, by counter-mode access into the
    /// ChaCha stream (two 64-bit words per step) and a Box-Muller transform.
    pub fn standard_normal(&self, m: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.trajectory_id);
        rng.set_word_pos((m as u128) * 4);
        let a = rng.next_u64();
        let b = rng.next_u64();
        // u1 in (0, 1], u2 in [0, 1)
        let u1 = 1.0 - (a >> 11) as f64 * (1.0 / 9007199254740992.0);
        let u2 = (b >> 11) as f64 * (1.0 / 9007199254740992.0);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// dW_m = sqrt(dt) * z_m.
    pub fn increment(&self, m: u64, dt: f64) -> f64 {
        dt.sqrt() * self.standard_normal(m)
    }
}

impl WienerIncrements for NoiseStream {
    fn increment(&self, m: u64, dt: f64) -> f64 {
        NoiseStream::increment(self, m, dt)
    }
}

/// Increments read off a shared Brownian path sampled on a base grid of
/// step dt_base: a step of dt = substeps * dt_base sums the corresponding
/// base increments, W((m+1) dt) - W(m dt). Runs at different step sizes
/// built over the same base path are pathwise coupled, the time-direction
/// analogue of sharing dW between truncations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoupledIncrements {
    pub base: NoiseStream,
    pub dt_base: f64,
    pub substeps: u64,
}

impl CoupledIncrements {
    /// The step size dt must be an integer multiple of dt_base.
    pub fn at_level(base: NoiseStream, dt_base: f64, dt: f64) -> Option<CoupledIncrements> {
        let ratio = dt / dt_base;
        let substeps = ratio.round();
        if substeps < 1.0 || (ratio - substeps).abs() > 1e-9 * ratio.max(1.0) {
            return None;
        }
        Some(CoupledIncrements {
            base,
            dt_base,
            substeps: substeps as u64,
        })
    }
}

impl WienerIncrements for CoupledIncrements {
    fn increment(&self, m: u64, _dt: f64) -> f64 {
        let scale = self.dt_base.sqrt();
        (m * self.substeps..(m + 1) * self.substeps)
            .map(|j| scale * self.base.standard_normal(j))
            .sum()
    }
}
