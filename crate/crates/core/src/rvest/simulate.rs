use chrono::{Datelike, NaiveDate, NaiveTime, TimeDelta, Weekday};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::panel::IntradayPanel;
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::matxform::SpdMatrix;
use crate::rng;
use crate::series::CovarianceSeries;

/// Stochastic volatility parameters of the synthetic generator. Time is
/// measured in trading days; vols are daily standard deviations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VolParams {
    /// Long-run daily vol of the first asset.
    pub base_vol: f64,
    /// Last asset's long-run vol is `base_vol * (1 + vol_dispersion)`.
    pub vol_dispersion: f64,
    /// Mean reversion speed of log variance, per day.
    pub mean_reversion: f64,
    /// Diffusion coefficient of log variance, per sqrt(day).
    pub vol_of_vol: f64,
    /// Share of log-variance shock variance coming from a common factor.
    pub vol_factor_share: f64,
    /// Constant pairwise correlation of price shocks.
    pub correlation: f64,
    /// Daily log drift.
    pub drift: f64,
}

impl Default for VolParams {
    fn default() -> Self {
        Self {
            base_vol: 0.012,
            vol_dispersion: 0.6,
            mean_reversion: 0.05,
            vol_of_vol: 0.15,
            vol_factor_share: 0.6,
            correlation: 0.4,
            drift: 2e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub assets: usize,
    pub days: usize,
    /// Intraday intervals per day (`M`).
    pub intervals: usize,
    pub vol: VolParams,
    pub noise_sd: f64,
    pub seed: u64,
    pub start: NaiveDate,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            assets: 6,
            days: 300,
            intervals: 390,
            vol: VolParams::default(),
            noise_sd: 2e-4,
            seed: 1,
            start: NaiveDate::from_ymd_opt(2000, 1, 3).unwrap(),
        }
    }
}

/// Simulated panel together with the true integrated covariance of each day.
#[derive(Clone, Debug)]
pub struct SimulatedPanel {
    pub panel: IntradayPanel<f64>,
    pub integrated: CovarianceSeries<f64>,
}

/// Consecutive weekdays starting at `start` (moved forward to a weekday).
pub fn business_days(start: NaiveDate, count: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(count);
    let mut d = start;
    while out.len() < count {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d.succ_opt().expect("date in range");
    }
    out
}

/// Euler scheme for `d log S = μ dt + D_t L dB` with per-asset mean-reverting
/// log variance, plus i.i.d. Gaussian noise on observed log prices.
pub fn simulate_panel(cfg: &SimConfig) -> Result<SimulatedPanel> {
    let (n, days, m) = (cfg.assets, cfg.days, cfg.intervals);
    if n == 0 {
        return Err(Error::InvalidArgument("assets must be at least 1".into()));
    }
    if days < 30 {
        return Err(Error::InvalidArgument(format!(
            "days must be at least 30, got {days}"
        )));
    }
    if m < n + 1 {
        return Err(Error::InvalidArgument(format!(
            "intervals must exceed the number of assets, got {m} for {n} assets"
        )));
    }
    if m > 23_400 {
        return Err(Error::InvalidArgument(
            "at most one interval per second".into(),
        ));
    }
    let v = &cfg.vol;
    let lower_rho = if n > 1 { -1.0 / (n as f64 - 1.0) } else { -1.0 };
    if !(v.correlation > lower_rho && v.correlation < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "correlation {} does not give a positive definite matrix",
            v.correlation
        )));
    }
    if !(v.base_vol > 0.0)
        || !(v.mean_reversion >= 0.0)
        || !(v.vol_of_vol >= 0.0)
        || !(0.0..=1.0).contains(&v.vol_factor_share)
        || !(cfg.noise_sd >= 0.0)
    {
        return Err(Error::InvalidArgument(
            "invalid volatility parameters".into(),
        ));
    }

    let corr = Matrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { v.correlation });
    let chol = Cholesky::new(&corr).expect("checked correlation bound");
    let h_bar: Vec<f64> = (0..n)
        .map(|i| {
            let frac = if n > 1 {
                i as f64 / (n - 1) as f64
            } else {
                0.0
            };
            (2.0 * (v.base_vol * (1.0 + v.vol_dispersion * frac)).ln()).max(-60.0)
        })
        .collect();

    let dt = 1.0 / m as f64;
    let sdt = dt.sqrt();
    let (w_common, w_own) = (v.vol_factor_share.sqrt(), (1.0 - v.vol_factor_share).sqrt());
    let dates = business_days(cfg.start, days);
    let open = NaiveTime::from_hms_opt(9, 30, 0).unwrap();
    let offsets: Vec<TimeDelta> = (0..=m)
        .map(|k| TimeDelta::seconds(((k as f64) * 23_400.0 / m as f64).round() as i64))
        .collect();

    let mut h = h_bar.clone();
    let mut x = vec![100f64.ln(); n];
    let mut grids = Vec::with_capacity(days);
    let mut prices = Vec::with_capacity(days);
    let mut integrated = Vec::with_capacity(days);
    let mut z = vec![0.0; n];
    for (d, date) in dates.iter().enumerate() {
        let mut r = rng::stream(cfg.seed, &[0x5155_u64, d as u64]);
        let mut block = Matrix::zeros(m + 1, n);
        let mut icov = Matrix::zeros(n, n);
        let mut latent = x.clone();
        for a in 0..n {
            block[(0, a)] =
                latent[a] + cfg.noise_sd * Distribution::<f64>::sample(&StandardNormal, &mut r);
        }
        for step in 1..=m {
            let sd: Vec<f64> = h.iter().map(|hi| (0.5 * hi).exp()).collect();
            for i in 0..n {
                for j in 0..n {
                    icov[(i, j)] += sd[i] * sd[j] * corr[(i, j)] * dt;
                }
            }
            for zi in z.iter_mut() {
                *zi = StandardNormal.sample(&mut r);
            }
            let shock = chol.mul_lower(&z);
            for a in 0..n {
                latent[a] += v.drift * dt + sd[a] * sdt * shock[a];
            }
            let common: f64 = StandardNormal.sample(&mut r);
            for (a, ha) in h.iter_mut().enumerate() {
                let own: f64 = StandardNormal.sample(&mut r);
                *ha += v.mean_reversion * (h_bar[a] - *ha) * dt
                    + v.vol_of_vol * sdt * (w_common * common + w_own * own);
            }
            for a in 0..n {
                block[(step, a)] =
                    latent[a] + cfg.noise_sd * Distribution::<f64>::sample(&StandardNormal, &mut r);
            }
        }
        x = latent;
        grids.push(offsets.iter().map(|&o| date.and_time(open) + o).collect());
        prices.push(block);
        integrated.push(SpdMatrix::new(icov)?);
    }

    let assets = (1..=n).map(|a| format!("S{a:02}")).collect();
    Ok(SimulatedPanel {
        panel: IntradayPanel::new(assets, dates.clone(), grids, prices)?,
        integrated: CovarianceSeries::new(dates, integrated)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn business_days_skip_weekends() {
        // 2000-01-01 is a Saturday
        let d = business_days(NaiveDate::from_ymd_opt(2000, 1, 1).unwrap(), 6);
        assert_eq!(d[0], NaiveDate::from_ymd_opt(2000, 1, 3).unwrap());
        assert_eq!(d[5], NaiveDate::from_ymd_opt(2000, 1, 10).unwrap());
    }

    #[test]
    fn rejects_bad_sizes() {
        let base = SimConfig {
            assets: 2,
            days: 30,
            intervals: 10,
            ..SimConfig::default()
        };
        assert!(simulate_panel(&SimConfig {
            days: 29,
            ..base.clone()
        })
        .is_err());
        assert!(simulate_panel(&SimConfig {
            intervals: 2,
            ..base.clone()
        })
        .is_err());
        assert!(simulate_panel(&SimConfig {
            assets: 0,
            ..base.clone()
        })
        .is_err());
        assert!(simulate_panel(&base).is_ok());
    }
}
