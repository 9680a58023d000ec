use chrono::NaiveDate;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::copulae::{CopulaModel, TCopula};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::matxform::{diagonal_positions, from_vech, vech_len, vech_position, Coord, VechVector};
use crate::rng;
use crate::rvest::business_days;
use crate::series::CovarianceSeries;

/// A stationary Markov chain whose consecutive Cholesky vech vectors are
/// joined by a `2m`-dimensional t copula with correlation
/// `[[R, φR], [φR, R]]`, `R` equicorrelated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarkovTSpec {
    pub assets: usize,
    pub days: usize,
    /// Contemporaneous correlation between vech coordinates.
    pub rho: f64,
    /// Lag-one scaling of the cross block.
    pub phi: f64,
    pub nu: f64,
    /// Median of the Cholesky diagonal entries (daily vol scale).
    pub diag_level: f64,
    /// Log-normal dispersion of the diagonal entries.
    pub diag_dispersion: f64,
    /// Standard deviation of the off-diagonal Cholesky entries.
    pub offdiag_sd: f64,
    pub seed: u64,
    pub start: NaiveDate,
}

impl Default for MarkovTSpec {
    fn default() -> Self {
        Self {
            assets: 3,
            days: 800,
            rho: 0.5,
            phi: 0.85,
            nu: 4.0,
            diag_level: 0.01,
            diag_dispersion: 0.3,
            offdiag_sd: 0.003,
            seed: 1,
            start: NaiveDate::from_ymd_opt(2000, 1, 3).unwrap(),
        }
    }
}

/// Covariance path and daily returns `r_t ~ N(0, Γ_t)`.
#[derive(Clone, Debug)]
pub struct MarkovTData {
    pub series: CovarianceSeries<f64>,
    pub returns: Matrix<f64>,
}

impl MarkovTSpec {
    pub fn copula(&self) -> Result<TCopula> {
        let m = vech_len(self.assets);
        let lower = -1.0 / (m.max(2) as f64 - 1.0);
        if !(self.rho > lower && self.rho < 1.0) || !(self.phi.abs() < 1.0) {
            return Err(Error::InvalidArgument(
                "rho and phi do not give a positive definite correlation".into(),
            ));
        }
        let corr = Matrix::from_fn(2 * m, 2 * m, |i, j| {
            let r = if i % m == j % m { 1.0 } else { self.rho };
            if (i < m) == (j < m) {
                r
            } else {
                self.phi * r
            }
        });
        TCopula::new(corr, self.nu)
    }

    pub fn generate(&self) -> Result<MarkovTData> {
        let n = self.assets;
        if n == 0 || self.days < 2 {
            return Err(Error::InvalidArgument(
                "Markov t source needs at least one asset and two days".into(),
            ));
        }
        if !(self.diag_level > 0.0) || !(self.diag_dispersion >= 0.0) || !(self.offdiag_sd >= 0.0) {
            return Err(Error::InvalidArgument("invalid Cholesky entry scales".into()));
        }
        let m = vech_len(n);
        let copula = CopulaModel::T(self.copula()?);
        let idx: Vec<usize> = (0..m).collect();
        let stationary = CopulaModel::T(TCopula::new(
            self.copula()?.corr().submatrix(&idx, &idx),
            self.nu,
        )?);
        let normal = Normal::standard();
        let diag = diagonal_positions(n);
        let mut chain = rng::stream(self.seed, &[0x4D54, 0]);
        let mut shocks = rng::stream(self.seed, &[0x4D54, 1]);

        let mut u = stationary.sample_with(1, &mut chain).row(0).to_vec();
        let mut mats = Vec::with_capacity(self.days);
        let mut returns = Matrix::zeros(self.days, n);
        for t in 0..self.days {
            if t > 0 {
                u = copula
                    .conditional_sample_with(&u, 1, &mut chain)?
                    .row(0)
                    .to_vec();
            }
            let values: Vec<f64> = u
                .iter()
                .enumerate()
                .map(|(k, &p)| {
                    let z = normal.inverse_cdf(p);
                    if diag.contains(&k) {
                        self.diag_level * (self.diag_dispersion * z).exp()
                    } else {
                        self.offdiag_sd * z
                    }
                })
                .collect();
            let vech = VechVector::new(Coord::Cholesky, values)?;
            let g = from_vech(&vech)?.value;
            // r = Pᵀε has covariance PᵀP
            let eps: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut shocks)).collect();
            for (k, &v) in vech.values().iter().enumerate() {
                let (i, j) = vech_position(k);
                returns[(t, j)] += v * eps[i];
            }
            mats.push(g);
        }
        let series = CovarianceSeries::new(business_days(self.start, self.days), mats)?;
        Ok(MarkovTData { series, returns })
    }
}
