//! Empirical marginal distributions with the `1/(T+1)` scaling, so that
//! probability-integral transforms of in-sample points land strictly inside
//! the unit interval.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalMarginal<T> {
    sorted: Vec<T>,
}

impl<T: Real> EmpiricalMarginal<T> {
    /// Fits the marginal on a sample of at least two finite values.
    pub fn fit(samples: &[T]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InsufficientData {
                what: "empirical marginal",
                required: 2,
                actual: samples.len(),
            });
        }
        if let Some(bad) = samples.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite sample {bad}")));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        Ok(Self { sorted })
    }

    /// Rebuilds a marginal from already sorted samples (deserialization).
    pub fn from_sorted(sorted: Vec<T>) -> Result<Self> {
        if sorted.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(Error::InvalidArgument("samples are not sorted".into()));
        }
        Self::fit(&sorted)
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted_samples(&self) -> &[T] {
        &self.sorted
    }

    pub fn min(&self) -> T {
        self.sorted[0]
    }

    pub fn max(&self) -> T {
        self.sorted[self.sorted.len() - 1]
    }

    /// Number of samples `<= x`.
    pub fn count_le(&self, x: T) -> usize {
        self.sorted.partition_point(|&v| v <= x)
    }

    /// `F̂(x) = #{X_t <= x} / (T + 1)`.
    pub fn cdf(&self, x: T) -> T {
        T::from_count(self.count_le(x)) / T::from_count(self.len() + 1)
    }

    /// Like [`cdf`](Self::cdf) but kept inside `[1/(T+1), T/(T+1)]`, for
    /// conditioning on points that may fall outside the fitted sample.
    pub fn cdf_interior(&self, x: T) -> T {
        let t = self.len();
        let c = self.count_le(x).clamp(1, t);
        T::from_count(c) / T::from_count(t + 1)
    }

    /// Generalized inverse `inf{x in sample : F̂(x) >= u}`. Levels above
    /// `T/(T+1)` clamp to the sample maximum and levels at or below zero to
    /// the minimum.
    pub fn quantile(&self, u: T) -> T {
        let t = self.len();
        let scaled = u * T::from_count(t + 1);
        // slack absorbs rounding in u = r/(T+1) round trips
        let slack = T::lit(64.0) * T::epsilon() * T::from_count(t + 1);
        let k = (scaled - slack).ceil();
        let k = if k.is_nan() || k < T::one() {
            1
        } else {
            k.to_usize().unwrap_or(t).min(t)
        };
        self.sorted[k - 1]
    }
}

/// Mean of the inverse transforms of `levels`, the averaging step of the
/// conditional Monte Carlo forecast.
pub fn mean_quantile<T: Real>(m: &EmpiricalMarginal<T>, levels: &[T]) -> T {
    if levels.is_empty() {
        return T::nan();
    }
    let s: T = levels.iter().map(|&u| m.quantile(u)).sum();
    s / T::from_count(levels.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cdf_uses_t_plus_one_denominator() {
        let m = EmpiricalMarginal::fit(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(m.cdf(2.0), 0.5);
        assert_eq!(m.cdf(0.0), 0.0);
        assert_eq!(m.cdf(3.0), 0.75);
        assert_eq!(m.cdf(10.0), 0.75);
        assert_eq!(m.cdf(1.0), 0.25);
        assert_eq!(m.cdf(1.5), 0.25);
    }

    #[test]
    fn ties_count_every_indicator() {
        let m = EmpiricalMarginal::fit(&[1.0, 1.0, 2.0]).unwrap();
        assert_eq!(m.cdf(1.0), 0.5);
        assert_eq!(m.quantile(0.25), 1.0);
        assert_eq!(m.quantile(0.5), 1.0);
        assert_eq!(m.quantile(0.6), 2.0);
    }

    #[test]
    fn quantile_examples() {
        let m = EmpiricalMarginal::fit(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(m.quantile(0.5), 2.0);
        assert_eq!(m.quantile(0.999), 3.0);
        assert_eq!(m.quantile(0.001), 1.0);
        assert_eq!(m.quantile(0.26), 2.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(EmpiricalMarginal::fit(&[1.0]).is_err());
        assert!(EmpiricalMarginal::fit(&[1.0, f64::NAN]).is_err());
        assert!(EmpiricalMarginal::fit(&[1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn interior_cdf_never_hits_zero() {
        let m = EmpiricalMarginal::fit(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(m.cdf_interior(-5.0), 0.25);
        assert_eq!(m.cdf_interior(2.0), 0.5);
    }

    #[test]
    fn f32_marginal() {
        let m = EmpiricalMarginal::fit(&[1.0f32, 2.0, 3.0]).unwrap();
        assert_eq!(m.cdf(2.0), 0.5);
        assert_eq!(m.quantile(m.cdf(3.0)), 3.0);
    }

    proptest! {
        #[test]
        fn quantile_inverts_cdf_on_samples(xs in proptest::collection::vec(-100.0f64..100.0, 2..300)) {
            let m = EmpiricalMarginal::fit(&xs).unwrap();
            for &x in &xs {
                prop_assert_eq!(m.quantile(m.cdf(x)), x);
            }
        }

        #[test]
        fn cdf_of_quantile_dominates_level(
            xs in proptest::collection::vec(-10.0f64..10.0, 2..100),
            u in 0.0001f64..0.9999,
        ) {
            let m = EmpiricalMarginal::fit(&xs).unwrap();
            let q = m.quantile(u);
            let t = xs.len() as f64;
            // levels past T/(T+1) clamp to the max, whose cdf is T/(T+1)
            prop_assert!(m.cdf(q) >= u.min(t / (t + 1.0)) - 1e-12);
        }

        #[test]
        fn pit_of_sample_is_rank_grid(xs in proptest::collection::vec(-1e3f64..1e3, 2..200)) {
            let m = EmpiricalMarginal::fit(&xs).unwrap();
            let t = xs.len();
            let mut pits: Vec<f64> = xs.iter().map(|&x| m.cdf(x) * (t as f64 + 1.0)).collect();
            pits.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut sorted = xs.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            // tie-adjusted (max) ranks
            for (i, &x) in sorted.iter().enumerate() {
                let rank = sorted.iter().filter(|&&y| y <= x).count();
                prop_assert!((pits[i] - rank as f64).abs() < 1e-9);
            }
        }

        #[test]
        fn cdf_is_monotone(xs in proptest::collection::vec(-10.0f64..10.0, 2..50), a in -12.0f64..12.0, b in -12.0f64..12.0) {
            let m = EmpiricalMarginal::fit(&xs).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(m.cdf(lo) <= m.cdf(hi));
        }
    }
}
