//! Minimal direct linear algebra for the implicit step: banded LU with
//! partial pivoting, plus a low-rank Woodbury correction for the wrap-around
//! corner entries of the periodic Jacobian.

use crate::error::{CoreError, Result};

/// Band storage with kl subdiagonals and ku superdiagonals, with kl extra
/// superdiagonal rows reserved for pivoting fill-in.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    /// Diagonal-major: entry (i, j) lives at ab[(kl + ku + i - j) * n + j].
    ab: Vec<f64>,
}

impl BandedMatrix {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        BandedMatrix {
            n,
            kl,
            ku,
            ab: vec![0.0; (2 * kl + ku + 1) * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        (self.kl + self.ku + i - j) * self.n + j
    }

    /// True when (i, j) lies inside the declared input band.
    pub fn in_band(&self, i: usize, j: usize) -> bool {
        let (i, j) = (i as isize, j as isize);
        i - j <= self.kl as isize && j - i <= self.ku as isize
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.ab[self.slot(i, j)]
        } else {
            0.0
        }
    }

    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        assert!(self.in_band(i, j), "entry ({i},{j}) outside band");
        let s = self.slot(i, j);
        self.ab[s] += value;
    }

    /// LU factorization with partial pivoting (in place).
    pub fn factor(mut self) -> Result<BandedLu> {
        let n = self.n;
        let kl = self.kl;
        let ku = self.ku;
        let width = ku + kl; // superdiagonal reach after fill-in
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.ab[self.slot(k, k)].abs();
            for i in (k + 1)..=last_row {
                let cand = self.ab[self.slot(i, k)].abs();
                if cand > best {
                    best = cand;
                    p = i;
                }
            }
            if best < f64::MIN_POSITIVE * 4.0 {
                return Err(CoreError::mismatched(format!(
                    "singular banded matrix at column {k}"
                )));
            }
            piv[k] = p;
            let last_col = (k + width).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let a = self.slot(k, j);
                    let b = self.slot(p, j);
                    self.ab.swap(a, b);
                }
            }
            let pivot = self.ab[self.slot(k, k)];
            for i in (k + 1)..=last_row {
                let s_ik = self.slot(i, k);
                let m = self.ab[s_ik] / pivot;
                self.ab[s_ik] = m;
                if m != 0.0 {
                    for j in (k + 1)..=last_col {
                        let a_kj = self.ab[self.slot(k, j)];
                        if a_kj != 0.0 {
                            let s_ij = self.slot(i, j);
                            self.ab[s_ij] -= m * a_kj;
                        }
                    }
                }
            }
        }
        Ok(BandedLu {
            mat: self,
            piv,
        })
    }
}

#[derive(Debug, Clone)]
pub struct BandedLu {
    mat: BandedMatrix,
    piv: Vec<usize>,
}

impl BandedLu {
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.mat.n;
        let kl = self.mat.kl;
        let width = self.mat.ku + kl;
        assert_eq!(b.len(), n);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let last_row = (k + kl).min(n - 1);
            for i in (k + 1)..=last_row {
                b[i] -= self.mat.ab[self.mat.slot(i, k)] * b[k];
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + width).min(n - 1);
            let mut acc = b[k];
            for j in (k + 1)..=last_col {
                acc -= self.mat.ab[self.mat.slot(k, j)] * b[j];
            }
            b[k] = acc / self.mat.ab[self.mat.slot(k, k)];
        }
    }
}

/// Banded matrix plus a short list of out-of-band entries (i, j, value):
/// the periodic wrap corners. Solved by the Woodbury identity.
#[derive(Debug, Clone)]
pub struct BandedSystem {
    pub banded: BandedMatrix,
    pub corners: Vec<(usize, usize, f64)>,
}

impl BandedSystem {
    pub fn n(&self) -> usize {
        self.banded.n()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let base = self.banded.get(i, j);
        let extra: f64 = self
            .corners
            .iter()
            .filter(|(r, c, _)| *r == i && *c == j)
            .map(|(_, _, v)| v)
            .sum();
        base + extra
    }

    /// Add an entry, routing it into the band or the corner list.
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        if self.banded.in_band(i, j) {
            self.banded.add(i, j, value);
        } else {
            self.corners.push((i, j, value));
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        let lu = self.banded.clone().factor()?;
        let mut x = rhs.to_vec();
        lu.solve_in_place(&mut x);
        if self.corners.is_empty() {
            return Ok(x);
        }
        // (B + sum_k v_k e_{r_k} e_{c_k}^T) via Woodbury on the m corners.
        let m = self.corners.len();
        let mut z = vec![0.0; n * m]; // columns B^{-1} (v_k e_{r_k})
        for (k, (r, _, v)) in self.corners.iter().enumerate() {
            let mut col = vec![0.0; n];
            col[*r] = *v;
            lu.solve_in_place(&mut col);
            for i in 0..n {
                z[i * m + k] = col[i];
            }
        }
        // S = I + V^T Z with V^T row k = e_{c_k}^T
        let mut s = vec![0.0; m * m];
        let mut rhs_small = vec![0.0; m];
        for (k, (_, c, _)) in self.corners.iter().enumerate() {
            for l in 0..m {
                s[k * m + l] = if k == l { 1.0 } else { 0.0 } + z[*c * m + l];
            }
            rhs_small[k] = x[*c];
        }
        dense_solve_in_place(&mut s, &mut rhs_small)?;
        for i in 0..n {
            for (k, w) in rhs_small.iter().enumerate() {
                x[i] -= z[i * m + k] * w;
            }
        }
        Ok(x)
    }
}

/// Gaussian elimination with partial pivoting on a small dense system
/// (row-major a, overwritten; b becomes the solution).
pub fn dense_solve_in_place(a: &mut [f64], b: &mut [f64]) -> Result<()> {
    let n = b.len();
    assert_eq!(a.len(), n * n);
    for k in 0..n {
        let mut p = k;
        let mut best = a[k * n + k].abs();
        for i in (k + 1)..n {
            if a[i * n + k].abs() > best {
                best = a[i * n + k].abs();
                p = i;
            }
        }
        if best < f64::MIN_POSITIVE * 4.0 {
            return Err(CoreError::mismatched(format!(
                "singular dense matrix at column {k}"
            )));
        }
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
            b.swap(k, p);
        }
        let pivot = a[k * n + k];
        for i in (k + 1)..n {
            let m = a[i * n + k] / pivot;
            if m != 0.0 {
                a[i * n + k] = 0.0;
                for j in (k + 1)..n {
                    a[i * n + j] -= m * a[k * n + j];
                }
                b[i] -= m * b[k];
            }
        }
    }
    for k in (0..n).rev() {
        let mut acc = b[k];
        for j in (k + 1)..n {
            acc -= a[k * n + j] * b[j];
        }
        b[k] = acc / a[k * n + k];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_banded(n: usize, kl: usize, ku: usize, rng: &mut ChaCha8Rng) -> BandedMatrix {
        let mut m = BandedMatrix::new(n, kl, ku);
        for i in 0..n {
            for j in 0..n {
                if m.in_band(i, j) {
                    let diag_boost = if i == j { 4.0 } else { 0.0 };
                    m.add(i, j, rng.gen_range(-1.0..1.0) + diag_boost);
                }
            }
        }
        m
    }

    fn matvec(sys: &BandedSystem, x: &[f64]) -> Vec<f64> {
        let n = sys.n();
        (0..n)
            .map(|i| (0..n).map(|j| sys.get(i, j) * x[j]).sum())
            .collect()
    }

    #[test]
    fn banded_solve_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [1usize, 2, 5, 17, 40] {
            let sys = BandedSystem {
                banded: random_banded(n, 2, 2, &mut rng),
                corners: vec![],
            };
            let x_true: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let b = matvec(&sys, &x_true);
            let x = sys.solve(&b).unwrap();
            for (a, b) in x.iter().zip(&x_true) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn corner_corrected_solve_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 12;
        let mut sys = BandedSystem {
            banded: random_banded(n, 2, 2, &mut rng),
            corners: vec![],
        };
        sys.add(0, n - 1, -0.3);
        sys.add(n - 1, 0, -0.7);
        sys.add(1, n - 2, 0.4);
        sys.add(n - 2, 1, 0.2);
        let x_true: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let b = matvec(&sys, &x_true);
        let x = sys.solve(&b).unwrap();
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let m = BandedMatrix::new(3, 1, 1); // all zeros
        assert!(m.factor().is_err());
    }
}
