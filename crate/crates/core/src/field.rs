//! Lattice states: site-indexed fields, two-species pair states, and the
//! weighted phase-space geometry b2*(u,u) + b1*(v,v).
//!
//! Fields live on the symmetric window {-N, ..., N} with site 0 at the array
//! center. A `ZeroPad` field stands for the square-summable bi-infinite
//! sequence obtained by extending it with zeros, so inner products between
//! zero-padded fields of different radii align by site index. A `Periodic`
//! field is a point of R^{2N+1} with wrap-around neighbor coupling.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Missing neighbors are zero; the field is an l^2 element of finite support.
    ZeroPad,
    /// Indices wrap on {-N..N}: the right neighbor of N is -N.
    Periodic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeField {
    values: Vec<f64>,
    radius: usize,
    boundary: Boundary,
}

impl LatticeField {
    pub fn zeros(radius: usize, boundary: Boundary) -> Self {
        LatticeField {
            values: vec![0.0; 2 * radius + 1],
            radius,
            boundary,
        }
    }

    /// Build from site values ordered -N..N. Length must be odd.
    pub fn from_values(values: Vec<f64>, boundary: Boundary) -> Result<Self> {
        if values.len() % 2 == 0 || values.is_empty() {
            return Err(CoreError::mismatched(format!(
                "field length {} is not odd",
                values.len()
            )));
        }
        let radius = (values.len() - 1) / 2;
        Ok(LatticeField {
            values,
            radius,
            boundary,
        })
    }

    /// Unit vector e_site on the given window.
    pub fn basis(radius: usize, site: i64, boundary: Boundary) -> Self {
        let mut f = Self::zeros(radius, boundary);
        f.set(site, 1.0);
        f
    }

    pub fn constant(radius: usize, value: f64, boundary: Boundary) -> Self {
        LatticeField {
            values: vec![value; 2 * radius + 1],
            radius,
            boundary,
        }
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn sites(&self) -> impl Iterator<Item = i64> + '_ {
        let r = self.radius as i64;
        -r..=r
    }

    /// Value at a site; zero outside the stored window.
    pub fn get(&self, site: i64) -> f64 {
        let r = self.radius as i64;
        if site < -r || site > r {
            0.0
        } else {
            self.values[(site + r) as usize]
        }
    }

    pub fn set(&mut self, site: i64, value: f64) {
        let r = self.radius as i64;
        assert!(site >= -r && site <= r, "site {site} outside window {r}");
        self.values[(site + r) as usize] = value;
    }

    /// Wrap-around lookup on {-N..N}.
    pub fn get_periodic(&self, site: i64) -> f64 {
        let n = self.values.len() as i64;
        let r = self.radius as i64;
        let mut k = (site + r) % n;
        if k < 0 {
            k += n;
        }
        self.values[k as usize]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite())
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// l^2 inner product, aligning by site index and zero-extending the
    /// shorter field.
    pub fn inner(&self, other: &LatticeField) -> f64 {
        if self.radius == other.radius {
            return self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .sum();
        }
        let r = self.radius.min(other.radius) as i64;
        (-r..=r).map(|i| self.get(i) * other.get(i)).sum()
    }

    /// New window radius, keeping site values, zero-filling or dropping
    /// outside. Dropping is the f_N / h_N masking of truncated runs.
    pub fn resized(&self, radius: usize) -> LatticeField {
        let mut out = LatticeField::zeros(radius, self.boundary);
        let r = self.radius.min(radius) as i64;
        for i in -r..=r {
            out.set(i, self.get(i));
        }
        out
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> LatticeField {
        self.boundary = boundary;
        self
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> LatticeField {
        LatticeField {
            values: self.values.iter().map(|x| f(*x)).collect(),
            radius: self.radius,
            boundary: self.boundary,
        }
    }

    pub fn zip_map(&self, other: &LatticeField, f: impl Fn(f64, f64) -> f64) -> Result<LatticeField> {
        self.check_aligned(other)?;
        Ok(LatticeField {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| f(*a, *b))
                .collect(),
            radius: self.radius,
            boundary: self.boundary,
        })
    }

    pub fn scaled(&self, c: f64) -> LatticeField {
        self.map(|x| c * x)
    }

    pub fn add(&self, other: &LatticeField) -> Result<LatticeField> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &LatticeField) -> Result<LatticeField> {
        self.zip_map(other, |a, b| a - b)
    }

    /// a + c*b in place.
    pub fn axpy(&mut self, c: f64, other: &LatticeField) -> Result<()> {
        self.check_aligned(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
        Ok(())
    }

    /// Sum of squared entries outside |site| <= cutoff.
    pub fn tail_mass(&self, cutoff: usize) -> f64 {
        let c = cutoff as i64;
        self.sites()
            .filter(|i| i.abs() > c)
            .map(|i| self.get(i).powi(2))
            .sum()
    }

    pub fn check_aligned(&self, other: &LatticeField) -> Result<()> {
        if self.radius != other.radius || self.boundary != other.boundary {
            return Err(CoreError::mismatched(format!(
                "radius {}/{} boundary {:?}/{:?}",
                self.radius, other.radius, self.boundary, other.boundary
            )));
        }
        Ok(())
    }
}

/// Two-species lattice state (u, v) on a shared window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairState {
    pub u: LatticeField,
    pub v: LatticeField,
}

impl PairState {
    pub fn new(u: LatticeField, v: LatticeField) -> Result<Self> {
        u.check_aligned(&v)?;
        Ok(PairState { u, v })
    }

    pub fn zeros(radius: usize, boundary: Boundary) -> Self {
        PairState {
            u: LatticeField::zeros(radius, boundary),
            v: LatticeField::zeros(radius, boundary),
        }
    }

    pub fn radius(&self) -> usize {
        self.u.radius()
    }

    pub fn boundary(&self) -> Boundary {
        self.u.boundary()
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }

    pub fn resized(&self, radius: usize) -> PairState {
        PairState {
            u: self.u.resized(radius),
            v: self.v.resized(radius),
        }
    }

    pub fn sub(&self, other: &PairState) -> Result<PairState> {
        Ok(PairState {
            u: self.u.sub(&other.u)?,
            v: self.v.sub(&other.v)?,
        })
    }

    pub fn add_scaled(&mut self, c: f64, other: &PairState) -> Result<()> {
        self.u.axpy(c, &other.u)?;
        self.v.axpy(c, &other.v)
    }

    pub fn check_aligned(&self, other: &PairState) -> Result<()> {
        self.u.check_aligned(&other.u)?;
        self.v.check_aligned(&other.v)
    }
}

/// Weighted phase-space geometry <psi1, psi2> = b2 (u1,u2) + b1 (v1,v2).
///
/// The weights are the reaction rates, copied from the model parameters;
/// they make the reaction cross terms cancel in energy estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedGeometry {
    pub b1: f64,
    pub b2: f64,
}

impl WeightedGeometry {
    pub fn new(b1: f64, b2: f64) -> Self {
        assert!(b1 > 0.0 && b2 > 0.0, "weights must be positive");
        WeightedGeometry { b1, b2 }
    }

    pub fn inner(&self, a: &PairState, b: &PairState) -> Result<f64> {
        a.check_aligned(b)?;
        Ok(self.b2 * a.u.inner(&b.u) + self.b1 * a.v.inner(&b.v))
    }

    pub fn norm_sq(&self, a: &PairState) -> f64 {
        self.b2 * a.u.norm_sq() + self.b1 * a.v.norm_sq()
    }

    pub fn norm(&self, a: &PairState) -> f64 {
        self.norm_sq(a).sqrt()
    }

    /// Distance aligning both states by site index (zero extension), so
    /// states of different truncations are comparable as l^2 elements.
    pub fn distance(&self, a: &PairState, b: &PairState) -> f64 {
        let r = a.radius().max(b.radius()) as i64;
        let mut du = 0.0;
        let mut dv = 0.0;
        for i in -r..=r {
            du += (a.u.get(i) - b.u.get(i)).powi(2);
            dv += (a.v.get(i) - b.v.get(i)).powi(2);
        }
        (self.b2 * du + self.b1 * dv).sqrt()
    }

    /// Energy carried by sites |i| > cutoff.
    pub fn tail_mass(&self, a: &PairState, cutoff: usize) -> f64 {
        self.b2 * a.u.tail_mass(cutoff) + self.b1 * a.v.tail_mass(cutoff)
    }
}
