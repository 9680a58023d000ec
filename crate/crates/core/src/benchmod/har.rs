use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{least_squares, Matrix};

/// Length of the monthly average, and of the history a forecast needs.
pub const HAR_LAGS: usize = 22;
/// Shortest series `har_fit` accepts.
pub const HAR_MIN_LEN: usize = 45;

/// `x_t = β0 + βd x_{t-1} + βw avg5(x)_{t-1} + βm avg22(x)_{t-1} + ε_t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarModel {
    pub beta0: f64,
    pub beta_d: f64,
    pub beta_w: f64,
    pub beta_m: f64,
    pub residual_sd: f64,
}

/// Daily, weekly and monthly regressors built from the 22 values before `t`.
fn regressors(x: &[f64], t: usize) -> [f64; 4] {
    let w = x[t - 5..t].iter().sum::<f64>() / 5.0;
    let m = x[t - HAR_LAGS..t].iter().sum::<f64>() / HAR_LAGS as f64;
    [1.0, x[t - 1], w, m]
}

pub fn har_fit(series: &[f64]) -> Result<HarModel> {
    if series.len() < HAR_MIN_LEN {
        return Err(Error::InsufficientData {
            what: "HAR series",
            required: HAR_MIN_LEN,
            actual: series.len(),
        });
    }
    if let Some(bad) = series.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite HAR input {bad}")));
    }
    let rows = series.len() - HAR_LAGS;
    let design = Matrix::from_fn(rows, 4, |r, c| regressors(series, r + HAR_LAGS)[c]);
    let y = &series[HAR_LAGS..];
    let beta = least_squares(&design, y, 1e-10)
        .ok_or_else(|| Error::Singular("HAR regressors are collinear".into()))?;
    let rss: f64 = (0..rows)
        .map(|r| {
            let fit: f64 = design.row(r).iter().zip(&beta).map(|(a, b)| a * b).sum();
            (y[r] - fit).powi(2)
        })
        .sum();
    Ok(HarModel {
        beta0: beta[0],
        beta_d: beta[1],
        beta_w: beta[2],
        beta_m: beta[3],
        residual_sd: (rss / (rows - 4) as f64).sqrt(),
    })
}

impl HarModel {
    /// One-step forecast from exactly the last 22 observations.
    pub fn forecast(&self, recent: &[f64]) -> Result<f64> {
        if recent.len() != HAR_LAGS {
            return Err(Error::Dimension {
                expected: HAR_LAGS,
                actual: recent.len(),
            });
        }
        let r = regressors(recent, HAR_LAGS);
        Ok(self.beta0 + self.beta_d * r[1] + self.beta_w * r[2] + self.beta_m * r[3])
    }
}

pub fn har_forecast(mdl: &HarModel, recent22: &[f64]) -> Result<f64> {
    mdl.forecast(recent22)
}
