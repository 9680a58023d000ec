use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::matxform::SpdMatrix;
use crate::optim::nelder_mead;

pub const DCC_MIN_LEN: usize = 250;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GarchParams {
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DccWarning {
    /// `α + β` within 1e-3 of one, or `α` or `β` essentially zero.
    GarchBoundary { asset: usize },
    CorrelationBoundary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DccModel {
    pub garch: Vec<GarchParams>,
    pub theta1: f64,
    pub theta2: f64,
    pub qbar: Matrix<f64>,
    pub mu: Vec<f64>,
    pub warnings: Vec<DccWarning>,
}

/// `(a, b, 1 - a - b) = softmax(x0, x1, 0)`.
fn simplex2(x: &[f64]) -> (f64, f64) {
    let m = x[0].max(x[1]).max(0.0);
    let (e0, e1, e2) = ((x[0] - m).exp(), (x[1] - m).exp(), (-m).exp());
    let s = e0 + e1 + e2;
    (e0 / s, e1 / s)
}

fn garch_variances(eps: &[f64], p: &GarchParams, h0: f64) -> Vec<f64> {
    let mut h = Vec::with_capacity(eps.len() + 1);
    h.push(h0);
    for t in 0..eps.len() {
        h.push(p.omega + p.alpha * eps[t] * eps[t] + p.beta * h[t]);
    }
    h
}

/// Negative Gaussian quasi log-likelihood (constants dropped).
fn garch_nll(eps: &[f64], p: &GarchParams, h0: f64) -> f64 {
    let mut h = h0;
    let mut s = 0.0;
    for &e in eps {
        s += h.ln() + e * e / h;
        h = p.omega + p.alpha * e * e + p.beta * h;
    }
    0.5 * s
}

/// Gaussian quasi-MLE of a GARCH(1,1) on a demeaned series. The recursion
/// starts at the sample variance.
pub fn garch_fit(eps: &[f64]) -> Result<GarchParams> {
    let n = eps.len() as f64;
    let var = eps.iter().map(|e| e * e).sum::<f64>() / n;
    if !(var > 0.0) || !var.is_finite() {
        return Err(Error::Fit("GARCH input has zero or non-finite variance".into()));
    }
    let lv = var.ln();
    let unpack = |x: &[f64]| {
        let (alpha, beta) = simplex2(&x[1..]);
        GarchParams {
            omega: x[0].exp(),
            alpha,
            beta,
        }
    };
    let obj = |x: &[f64]| garch_nll(eps, &unpack(x), var);
    // start at α = 0.05, β = 0.9 with variance targeting
    let mut x0 = vec![lv + 0.05f64.ln(), 0.0, 18f64.ln()];
    let lower = [lv - 30.0, -25.0, -25.0];
    let upper = [lv + 5.0, 25.0, 25.0];
    let mut best = f64::INFINITY;
    for _ in 0..3 {
        let r = nelder_mead(obj, &x0, &[1.0, 1.0, 1.0], &lower, &upper, 1500, 1e-12);
        let done = (best - r.value).abs() <= 1e-9 * r.value.abs().max(1.0);
        x0 = r.x;
        best = r.value;
        if done {
            break;
        }
    }
    if !best.is_finite() {
        return Err(Error::NonConvergence("GARCH likelihood is not finite".into()));
    }
    Ok(unpack(&x0))
}

fn normalize(q: &Matrix<f64>) -> Matrix<f64> {
    let d: Vec<f64> = q.diagonal().iter().map(|v| 1.0 / v.sqrt()).collect();
    let mut r = Matrix::from_fn(q.rows(), q.cols(), |i, j| q[(i, j)] * d[i] * d[j]);
    for i in 0..q.rows() {
        r[(i, i)] = 1.0;
    }
    r
}

fn dcc_step(q: &Matrix<f64>, qbar: &Matrix<f64>, u: &[f64], t1: f64, t2: f64) -> Matrix<f64> {
    let k = 1.0 - t1 - t2;
    Matrix::from_fn(q.rows(), q.cols(), |i, j| {
        k * qbar[(i, j)] + t1 * u[i] * u[j] + t2 * q[(i, j)]
    })
}

/// Negative correlation quasi log-likelihood of standardized residuals.
fn dcc_nll(u: &Matrix<f64>, qbar: &Matrix<f64>, t1: f64, t2: f64) -> f64 {
    let mut q = qbar.clone();
    let mut s = 0.0;
    for t in 0..u.rows() {
        let r = normalize(&q);
        let Some(ch) = Cholesky::new(&r) else {
            return f64::INFINITY;
        };
        let z = ch.forward(u.row(t));
        s += ch.log_det() + z.iter().map(|v| v * v).sum::<f64>();
        q = dcc_step(&q, qbar, u.row(t), t1, t2);
    }
    0.5 * s
}

struct Filtered {
    h: Vec<Vec<f64>>,
    u: Matrix<f64>,
}

fn filter(returns: &Matrix<f64>, mu: &[f64], garch: &[GarchParams], h0: &[f64]) -> Filtered {
    let (t_len, n) = (returns.rows(), returns.cols());
    let eps = Matrix::from_fn(t_len, n, |t, i| returns[(t, i)] - mu[i]);
    let h: Vec<Vec<f64>> = (0..n)
        .map(|i| garch_variances(&eps.column(i), &garch[i], h0[i]))
        .collect();
    let u = Matrix::from_fn(t_len, n, |t, i| eps[(t, i)] / h[i][t].sqrt());
    Filtered { h, u }
}

/// Two-step DCC(1,1) quasi-MLE on daily returns (rows are days).
pub fn dcc_fit(returns: &Matrix<f64>) -> Result<DccModel> {
    let (t_len, n) = (returns.rows(), returns.cols());
    if t_len < DCC_MIN_LEN {
        return Err(Error::InsufficientData {
            what: "DCC daily returns",
            required: DCC_MIN_LEN,
            actual: t_len,
        });
    }
    if !returns.is_finite() {
        return Err(Error::InvalidArgument("non-finite returns".into()));
    }
    let mu: Vec<f64> = (0..n)
        .map(|i| (0..t_len).map(|t| returns[(t, i)]).sum::<f64>() / t_len as f64)
        .collect();
    let mut garch = Vec::with_capacity(n);
    let mut warnings = Vec::new();
    let mut h0 = Vec::with_capacity(n);
    for i in 0..n {
        let e: Vec<f64> = (0..t_len).map(|t| returns[(t, i)] - mu[i]).collect();
        h0.push(e.iter().map(|v| v * v).sum::<f64>() / t_len as f64);
        let p = garch_fit(&e)?;
        if p.alpha + p.beta > 0.999 || p.alpha < 1e-6 || p.beta < 1e-6 {
            warnings.push(DccWarning::GarchBoundary { asset: i });
        }
        garch.push(p);
    }
    let f = filter(returns, &mu, &garch, &h0);
    let ubar: Vec<f64> = (0..n)
        .map(|i| (0..t_len).map(|t| f.u[(t, i)]).sum::<f64>() / t_len as f64)
        .collect();
    let qbar = Matrix::from_fn(n, n, |i, j| {
        (0..t_len)
            .map(|t| (f.u[(t, i)] - ubar[i]) * (f.u[(t, j)] - ubar[j]))
            .sum::<f64>()
            / (t_len - 1) as f64
    });
    if Cholesky::new(&qbar).is_none() {
        return Err(Error::NotSpd("standardized residual covariance".into()));
    }
    let (theta1, theta2) = if n == 1 {
        (0.0, 0.0)
    } else {
        let obj = |x: &[f64]| {
            let (a, b) = simplex2(x);
            dcc_nll(&f.u, &qbar, a, b)
        };
        let r = nelder_mead(
            obj,
            &[0.02f64.ln() - 0.03f64.ln(), 0.95f64.ln() - 0.03f64.ln()],
            &[1.0, 1.0],
            &[-25.0, -25.0],
            &[25.0, 25.0],
            600,
            1e-12,
        );
        if !r.value.is_finite() {
            return Err(Error::NonConvergence(
                "DCC correlation likelihood is not finite".into(),
            ));
        }
        simplex2(&r.x)
    };
    if n > 1 && (theta1 + theta2 > 0.999 || theta1 < 1e-6) {
        warnings.push(DccWarning::CorrelationBoundary);
    }
    Ok(DccModel {
        garch,
        theta1,
        theta2,
        qbar,
        mu,
        warnings,
    })
}

impl DccModel {
    /// Conditional covariance path `H_1..H_{T+1}` for the given returns; the
    /// last entry is the one-step forecast.
    pub fn covariance_path(&self, returns: &Matrix<f64>) -> Result<Vec<Matrix<f64>>> {
        let (t_len, n) = (returns.rows(), returns.cols());
        if n != self.mu.len() {
            return Err(Error::Dimension {
                expected: self.mu.len(),
                actual: n,
            });
        }
        if t_len == 0 {
            return Err(Error::InsufficientData {
                what: "DCC forecast history",
                required: 1,
                actual: 0,
            });
        }
        let h0: Vec<f64> = (0..n)
            .map(|i| {
                (0..t_len)
                    .map(|t| (returns[(t, i)] - self.mu[i]).powi(2))
                    .sum::<f64>()
                    / t_len as f64
            })
            .collect();
        let f = filter(returns, &self.mu, &self.garch, &h0);
        let mut q = self.qbar.clone();
        let mut out = Vec::with_capacity(t_len + 1);
        for t in 0..=t_len {
            let r = normalize(&q);
            let sd: Vec<f64> = (0..n).map(|i| f.h[i][t].sqrt()).collect();
            out.push(Matrix::from_fn(n, n, |i, j| sd[i] * r[(i, j)] * sd[j]));
            if t < t_len {
                q = dcc_step(&q, &self.qbar, f.u.row(t), self.theta1, self.theta2);
            }
        }
        Ok(out)
    }

    /// `H_{T+1} = D_{T+1} R_{T+1} D_{T+1}`.
    pub fn forecast(&self, returns: &Matrix<f64>) -> Result<SpdMatrix<f64>> {
        let mut path = self.covariance_path(returns)?;
        SpdMatrix::new(path.pop().expect("nonempty path"))
    }
}

pub fn dcc_forecast(mdl: &DccModel, returns: &Matrix<f64>) -> Result<SpdMatrix<f64>> {
    mdl.forecast(returns)
}
