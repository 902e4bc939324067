//! Small statistics helpers: Monte Carlo means with normal confidence
//! intervals and the two-sample Kolmogorov-Smirnov statistic.

/// Streaming mean/variance accumulator (Welford).
#[derive(Debug, Clone, Default)]
pub struct Accumulator {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n as f64 - 1.0)
        }
    }

    /// 95% normal CI half-width of the mean.
    pub fn ci_halfwidth(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        1.96 * (self.variance() / self.n as f64).sqrt()
    }
}

pub fn mean_and_ci(samples: &[f64]) -> (f64, f64) {
    let mut acc = Accumulator::default();
    for x in samples {
        acc.push(*x);
    }
    (acc.mean(), acc.ci_halfwidth())
}

/// Two-sample Kolmogorov-Smirnov statistic sup |F1 - F2| for equal-weight
/// samples.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty());
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|p, q| p.partial_cmp(q).unwrap());
    ys.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < xs.len() && j < ys.len() {
        let t = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= t {
            i += 1;
        }
        while j < ys.len() && ys[j] <= t {
            j += 1;
        }
        let f1 = i as f64 / xs.len() as f64;
        let f2 = j as f64 / ys.len() as f64;
        d = d.max((f1 - f2).abs());
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accumulator_matches_direct_formulas() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let (mean, ci) = mean_and_ci(&xs);
        assert!((mean - 3.75).abs() < 1e-15);
        let var = xs.iter().map(|x| (x - 3.75f64).powi(2)).sum::<f64>() / 3.0;
        assert!((ci - 1.96 * (var / 4.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn ks_identical_samples_zero() {
        let xs = [0.3, -1.0, 2.5, 0.0];
        assert_eq!(ks_statistic(&xs, &xs), 0.0);
    }

    #[test]
    fn ks_disjoint_samples_one() {
        assert_eq!(ks_statistic(&[0.0, 1.0], &[5.0, 6.0]), 1.0);
    }
}
