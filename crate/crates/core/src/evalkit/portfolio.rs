use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{solve_linear, Matrix};
use crate::matxform::SpdMatrix;

pub const TRADING_DAYS: f64 = 252.0;
pub const DEFAULT_GRID_POINTS: usize = 40;
/// Model label of the frontier that uses the realized matrix as forecast.
pub const ORACLE: &str = "oracle";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmvpResult {
    pub weights: Vec<f64>,
    /// Target return, `None` for the unconstrained-in-return portfolio.
    pub mu_p: Option<f64>,
    /// Forecast variance `ωᵀ Γ̃ ω`.
    pub variance: f64,
}

impl GmvpResult {
    /// `sqrt(ωᵀ Γ̂ ω)` under a realized covariance.
    pub fn realized_sd(&self, realized: &Matrix<f64>) -> f64 {
        realized.quad_form(&self.weights).max(0.0).sqrt()
    }

    pub fn realized_return(&self, returns: &[f64]) -> f64 {
        self.weights.iter().zip(returns).map(|(w, r)| w * r).sum()
    }
}

/// Daily standard deviation of log returns to annualized percent.
pub fn annualize_sd(sd: f64) -> f64 {
    sd * TRADING_DAYS.sqrt() * 100.0
}

/// Daily mean log return to annualized percent.
pub fn annualize_return(mu: f64) -> f64 {
    mu * TRADING_DAYS * 100.0
}

/// Long-only minimum variance with a target expected return.
pub fn gmvp(forecast: &SpdMatrix<f64>, expected_returns: &[f64], mu_p: f64) -> Result<GmvpResult> {
    if expected_returns.len() != forecast.dim() {
        return Err(Error::Dimension {
            expected: forecast.dim(),
            actual: expected_returns.len(),
        });
    }
    let w = active_set(forecast.as_matrix(), Some((expected_returns, mu_p)))?;
    Ok(GmvpResult {
        variance: forecast.as_matrix().quad_form(&w),
        weights: w,
        mu_p: Some(mu_p),
    })
}

/// Long-only global minimum variance, no return target.
pub fn min_variance(forecast: &SpdMatrix<f64>) -> Result<GmvpResult> {
    let w = active_set(forecast.as_matrix(), None)?;
    Ok(GmvpResult {
        variance: forecast.as_matrix().quad_form(&w),
        weights: w,
        mu_p: None,
    })
}

/// Primal active-set method for `min ωᵀGω` subject to `1ᵀω = 1`,
/// optionally `μᵀω = μ_p`, and `ω ≥ 0`. Ties pick the lowest index.
fn active_set(g: &Matrix<f64>, target: Option<(&[f64], f64)>) -> Result<Vec<f64>> {
    let n = g.rows();
    if n == 0 {
        return Err(Error::InvalidArgument("empty covariance".into()));
    }
    let mut w = vec![0.0; n];
    let mut active = vec![false; n];
    let mut target = target;
    if let Some((mu, mp)) = target {
        let (mut lo, mut hi) = (0, 0);
        for i in 0..n {
            if mu[i] < mu[lo] {
                lo = i;
            }
            if mu[i] > mu[hi] {
                hi = i;
            }
        }
        let scale = mu[lo].abs().max(mu[hi].abs()).max(mp.abs());
        let slack = 1e-12 * scale.max(f64::MIN_POSITIVE);
        if !mp.is_finite() || mp < mu[lo] - slack || mp > mu[hi] + slack {
            return Err(Error::Infeasible {
                target: mp,
                lo: mu[lo],
                hi: mu[hi],
            });
        }
        if mu[hi] - mu[lo] <= slack {
            // every asset has the target return: the constraint is redundant
            target = None;
        } else {
            let a = ((mu[hi] - mp) / (mu[hi] - mu[lo])).clamp(0.0, 1.0);
            w[lo] = a;
            w[hi] = 1.0 - a;
            for i in 0..n {
                active[i] = w[i] == 0.0;
            }
        }
    }
    if target.is_none() {
        w.fill(1.0 / n as f64);
        active.fill(false);
    }
    let gscale = g.max_abs().max(f64::MIN_POSITIVE);
    for _ in 0..(50 + 20 * n) {
        let free: Vec<usize> = (0..n).filter(|&i| !active[i]).collect();
        let use_ret = target.is_some_and(|(mu, _)| {
            let (a, b) = free.iter().fold((f64::MAX, f64::MIN), |(a, b), &i| {
                (a.min(mu[i]), b.max(mu[i]))
            });
            b - a > 1e-12 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
        });
        let rows = 1 + usize::from(use_ret);
        let f = free.len();
        let gw = g.matvec(&w);
        let a_row = |r: usize, i: usize| -> f64 {
            if r == 0 {
                1.0
            } else {
                target.expect("return row").0[i]
            }
        };
        let mut kkt = Matrix::zeros(f + rows, f + rows);
        let mut rhs = vec![0.0; f + rows];
        for (a, &i) in free.iter().enumerate() {
            for (b, &j) in free.iter().enumerate() {
                kkt[(a, b)] = 2.0 * g[(i, j)];
            }
            for r in 0..rows {
                kkt[(a, f + r)] = -a_row(r, i);
                kkt[(f + r, a)] = a_row(r, i);
            }
            rhs[a] = -2.0 * gw[i];
        }
        let sol = solve_linear(&kkt, &rhs, 1e-14)
            .ok_or_else(|| Error::NonConvergence("singular portfolio KKT system".into()))?;
        let p = &sol[..f];
        let lambda = &sol[f..];
        if p.iter().all(|v| v.abs() <= 1e-12) {
            let mut worst: Option<(usize, f64)> = None;
            for i in (0..n).filter(|&i| active[i]) {
                let nu = 2.0 * gw[i] - (0..rows).map(|r| lambda[r] * a_row(r, i)).sum::<f64>();
                if nu < -1e-12 * gscale && worst.is_none_or(|(_, v)| nu < v) {
                    worst = Some((i, nu));
                }
            }
            match worst {
                None => {
                    for v in &mut w {
                        if *v < 0.0 {
                            *v = 0.0;
                        }
                    }
                    return Ok(w);
                }
                Some((i, _)) => active[i] = false,
            }
        } else {
            let mut step = 1.0;
            let mut block = None;
            for (a, &i) in free.iter().enumerate() {
                if p[a] < 0.0 {
                    let ratio = -w[i] / p[a];
                    if ratio < step {
                        step = ratio;
                        block = Some(i);
                    }
                }
            }
            for (a, &i) in free.iter().enumerate() {
                w[i] += step * p[a];
            }
            if let Some(i) = block {
                w[i] = 0.0;
                active[i] = true;
            }
        }
    }
    Err(Error::NonConvergence(
        "portfolio active set did not settle".into(),
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub model: String,
    pub mu_p: f64,
    /// Mean realized daily sd over feasible days.
    pub avg_sd: f64,
    pub n_feasible_days: usize,
}

/// `points` evenly spaced targets between the 10th and 90th percentiles of
/// the pooled expected returns.
pub fn default_mu_grid(expected: &[Vec<f64>], points: usize) -> Vec<f64> {
    let mut all: Vec<f64> = expected.iter().flatten().copied().collect();
    if all.is_empty() || points == 0 {
        return Vec::new();
    }
    all.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let x = p * (all.len() - 1) as f64;
        let (i, fr) = (x.floor() as usize, x - x.floor());
        let j = (i + 1).min(all.len() - 1);
        all[i] + fr * (all[j] - all[i])
    };
    let (lo, hi) = (q(0.1), q(0.9));
    if points == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..points)
        .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
        .collect()
}

/// Average realized sd of target-return portfolios per model and grid
/// point, plus the oracle frontier built from the realized matrices.
/// `forecasts[k].1[t]`, `realized[t]` and `expected[t]` refer to the same
/// out-of-sample day.
pub fn efficient_frontier(
    forecasts: &[(String, Vec<SpdMatrix<f64>>)],
    realized: &[SpdMatrix<f64>],
    expected: &[Vec<f64>],
    mu_grid: &[f64],
) -> Result<Vec<FrontierPoint>> {
    let days = realized.len();
    if expected.len() != days {
        return Err(Error::Dimension {
            expected: days,
            actual: expected.len(),
        });
    }
    if let Some((name, f)) = forecasts.iter().find(|(_, f)| f.len() != days) {
        return Err(Error::InvalidArgument(format!(
            "model {name} has {} forecasts for {days} days",
            f.len()
        )));
    }
    let mut sets: Vec<(&str, &[SpdMatrix<f64>])> =
        forecasts.iter().map(|(n, f)| (n.as_str(), f.as_slice())).collect();
    sets.push((ORACLE, realized));
    let mut out = Vec::with_capacity(sets.len() * mu_grid.len());
    for (name, mats) in sets {
        let points: Vec<Result<FrontierPoint>> = mu_grid
            .par_iter()
            .map(|&mp| {
                let mut sum = 0.0;
                let mut count = 0;
                for t in 0..days {
                    match gmvp(&mats[t], &expected[t], mp) {
                        Ok(res) => {
                            sum += res.realized_sd(realized[t].as_matrix());
                            count += 1;
                        }
                        Err(Error::Infeasible { .. }) => {}
                        Err(e) => return Err(e),
                    }
                }
                Ok(FrontierPoint {
                    model: name.to_string(),
                    mu_p: mp,
                    avg_sd: if count > 0 { sum / count as f64 } else { f64::NAN },
                    n_feasible_days: count,
                })
            })
            .collect();
        for p in points {
            out.push(p?);
        }
    }
    Ok(out)
}

/// Per-model averages of the unconstrained-in-return GMVP.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmvpSummary {
    pub model: String,
    /// Mean realized daily sd.
    pub avg_sd: f64,
    /// Mean realized daily portfolio return.
    pub avg_return: f64,
    pub days: usize,
}

/// `returns[t]` is the return vector realized over day `t`.
pub fn gmvp_summary(
    model: &str,
    forecasts: &[SpdMatrix<f64>],
    realized: &[SpdMatrix<f64>],
    returns: &[Vec<f64>],
) -> Result<(GmvpSummary, Vec<GmvpResult>)> {
    let days = forecasts.len();
    if realized.len() != days || returns.len() != days {
        return Err(Error::Dimension {
            expected: days,
            actual: realized.len().min(returns.len()),
        });
    }
    let sols = forecasts
        .par_iter()
        .map(min_variance)
        .collect::<Result<Vec<_>>>()?;
    let mut sd = 0.0;
    let mut ret = 0.0;
    for t in 0..days {
        sd += sols[t].realized_sd(realized[t].as_matrix());
        ret += sols[t].realized_return(&returns[t]);
    }
    let d = days.max(1) as f64;
    Ok((
        GmvpSummary {
            model: model.to_string(),
            avg_sd: sd / d,
            avg_return: ret / d,
            days,
        },
        sols,
    ))
}
