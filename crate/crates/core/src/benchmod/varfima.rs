use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::optim::{golden_section_max, nelder_mead};

pub const DEFAULT_TRUNC: usize = 100;
pub const D_BOUNDS: (f64, f64) = (0.01, 0.49);
pub const ARMA_BOUND: f64 = 0.95;

const GRID_D: [f64; 5] = [0.05, 0.15, 0.25, 0.35, 0.45];
const GRID_D_STEP: f64 = 0.1;
const GRID_ARMA: [f64; 3] = [-0.5, 0.0, 0.5];

/// Coefficients `π_0..π_K` of `(1 - L)^d`.
pub fn fracdiff_coeffs(d: f64, k: usize) -> Vec<f64> {
    let mut pi = Vec::with_capacity(k + 1);
    pi.push(1.0);
    for j in 1..=k {
        let prev = pi[j - 1];
        pi.push(prev * (j as f64 - 1.0 - d) / j as f64);
    }
    pi
}

/// Scalar-operator VARFIMA(1, d, 1):
/// `(1 - φL)(1 - L)^d (X_t - c) = (1 - θL) ε_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct VarfimaModel {
    pub d: f64,
    pub phi: f64,
    pub theta: f64,
    pub c: Vec<f64>,
    pub trunc: usize,
    /// Pooled residual sum of squares at the estimate.
    pub rss: f64,
    /// Residual covariance. Not needed for point forecasts.
    pub sigma: Matrix<f64>,
}

/// Residuals `ε_t` for `t = trunc..T`, one row per time, one column per
/// coordinate. `y` holds the centered series.
pub fn varfima_residuals(y: &Matrix<f64>, d: f64, phi: f64, theta: f64, trunc: usize) -> Matrix<f64> {
    let (t_len, m) = (y.rows(), y.cols());
    let pi = fracdiff_coeffs(d, trunc);
    let mut out = Matrix::zeros(t_len.saturating_sub(trunc), m);
    let mut z_prev = vec![0.0; m];
    let mut e_prev = vec![0.0; m];
    let start = trunc.saturating_sub(1);
    for t in start..t_len {
        let kmax = t.min(trunc);
        for j in 0..m {
            let mut z = 0.0;
            for (k, p) in pi[..=kmax].iter().enumerate() {
                z += p * y[(t - k, j)];
            }
            if t >= trunc {
                let e = z - phi * z_prev[j] + theta * e_prev[j];
                out[(t - trunc, j)] = e;
                e_prev[j] = e;
            }
            z_prev[j] = z;
        }
    }
    out
}

fn centered(h: &Matrix<f64>, c: &[f64]) -> Matrix<f64> {
    Matrix::from_fn(h.rows(), h.cols(), |r, j| h[(r, j)] - c[j])
}

/// Fractionally differenced rows `z_t` for `t = trunc-1..T`, row-major.
fn fracdiff_rows(y: &Matrix<f64>, d: f64, trunc: usize) -> (Vec<f64>, usize) {
    let pi = fracdiff_coeffs(d, trunc);
    let (t_len, m) = (y.rows(), y.cols());
    let mut z = vec![0.0; (t_len + 1 - trunc) * m];
    for t in trunc - 1..t_len {
        let row = &mut z[(t + 1 - trunc) * m..(t + 2 - trunc) * m];
        for (k, p) in pi[..=t.min(trunc)].iter().enumerate() {
            for (zj, yj) in row.iter_mut().zip(y.row(t - k)) {
                *zj += p * yj;
            }
        }
    }
    (z, m)
}

fn arma_rss((z, m): &(Vec<f64>, usize), phi: f64, theta: f64) -> f64 {
    let m = *m;
    let mut e_prev = vec![0.0; m];
    let mut acc = vec![0.0; m];
    for w in z.windows(2 * m).step_by(m) {
        let (prev, cur) = w.split_at(m);
        for j in 0..m {
            let e = cur[j] - phi * prev[j] + theta * e_prev[j];
            acc[j] += e * e;
            e_prev[j] = e;
        }
    }
    acc.iter().sum()
}

/// Best `(φ, θ)` and RSS for one `d`.
fn profile(y: &Matrix<f64>, d: f64, trunc: usize, max_evals: usize) -> (f64, f64, f64) {
    let z = fracdiff_rows(y, d, trunc);
    let mut best = (0.0, 0.0, f64::INFINITY);
    for &phi in &GRID_ARMA {
        for &theta in &GRID_ARMA {
            let v = arma_rss(&z, phi, theta);
            if v < best.2 {
                best = (phi, theta, v);
            }
        }
    }
    let res = nelder_mead(
        |p| arma_rss(&z, p[0], p[1]),
        &[best.0, best.1],
        &[0.1, 0.1],
        &[-ARMA_BOUND; 2],
        &[ARMA_BOUND; 2],
        max_evals,
        1e-13,
    );
    if res.value < best.2 {
        (res.x[0], res.x[1], res.value)
    } else {
        best
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VarfimaOptions {
    pub trunc: usize,
    /// Objective evaluations allowed to each inner `(φ, θ)` search.
    pub max_evals: usize,
}

impl Default for VarfimaOptions {
    fn default() -> Self {
        Self {
            trunc: DEFAULT_TRUNC,
            max_evals: 120,
        }
    }
}

/// Pooled least-squares fit of `(d, φ, θ)`; `c` is the sample mean.
pub fn varfima_fit(h: &Matrix<f64>, trunc: usize) -> Result<VarfimaModel> {
    varfima_fit_with(
        h,
        &VarfimaOptions {
            trunc,
            ..Default::default()
        },
    )
}

/// Profile least squares: for each `d` the series is fractionally
/// differenced once and `(φ, θ)` minimized on the ARMA recursion; `d` is
/// located by a grid and golden section.
pub fn varfima_fit_with(h: &Matrix<f64>, opts: &VarfimaOptions) -> Result<VarfimaModel> {
    let trunc = opts.trunc;
    let (t_len, m) = (h.rows(), h.cols());
    if trunc == 0 || 2 * trunc > t_len {
        return Err(Error::InsufficientData {
            what: "VARFIMA history (twice the truncation lag)",
            required: 2 * trunc.max(1),
            actual: t_len,
        });
    }
    if !h.is_finite() {
        return Err(Error::InvalidArgument("non-finite VARFIMA input".into()));
    }
    let c: Vec<f64> = (0..m)
        .map(|j| (0..t_len).map(|r| h[(r, j)]).sum::<f64>() / t_len as f64)
        .collect();
    let y = centered(h, &c);

    let mut best: Option<(f64, (f64, f64, f64))> = None;
    for &d in &GRID_D {
        let r = profile(&y, d, trunc, opts.max_evals);
        if r.2.is_finite() && best.is_none_or(|b| r.2 < b.1 .2) {
            best = Some((d, r));
        }
    }
    let Some((d0, _)) = best else {
        return Err(Error::Fit("VARFIMA objective non-finite on the whole d grid".into()));
    };
    let lo = (d0 - GRID_D_STEP).max(D_BOUNDS.0);
    let hi = (d0 + GRID_D_STEP).min(D_BOUNDS.1);
    let (d, _) = golden_section_max(|d| -profile(&y, d, trunc, opts.max_evals).2, lo, hi, 1e-4, 40);
    let (phi, theta, rss) = profile(&y, d, trunc, opts.max_evals);
    let (d, phi, theta, rss) = match best {
        Some((bd, b)) if b.2 < rss => (bd, b.0, b.1, b.2),
        _ => (d, phi, theta, rss),
    };
    if !rss.is_finite() {
        return Err(Error::Fit(format!("VARFIMA objective diverged near d = {d}")));
    }
    let res = (vec![d, phi, theta], rss);
    let p = res.0;
    let e = varfima_residuals(&y, p[0], p[1], p[2], trunc);
    let n = e.rows() as f64;
    let sigma = e.gram().scaled(1.0 / n);
    Ok(VarfimaModel {
        d: p[0],
        phi: p[1],
        theta: p[2],
        c,
        trunc,
        rss: res.1,
        sigma,
    })
}

impl VarfimaModel {
    /// AR(∞) weights `a_0 = 1, a_1..a_trunc` with `ε_t = Σ a_k (X_{t-k} - c)`.
    pub fn ar_weights(&self) -> Vec<f64> {
        let pi = fracdiff_coeffs(self.d, self.trunc);
        let mut a = Vec::with_capacity(self.trunc + 1);
        for k in 0..=self.trunc {
            let b = pi[k] - if k > 0 { self.phi * pi[k - 1] } else { 0.0 };
            let prev = if k > 0 { a[k - 1] } else { 0.0 };
            a.push(b + self.theta * prev);
        }
        a
    }

    /// One-step forecast from the last `trunc` rows of `h`.
    pub fn forecast(&self, h: &Matrix<f64>) -> Result<Vec<f64>> {
        let (t_len, m) = (h.rows(), h.cols());
        if m != self.c.len() {
            return Err(Error::Dimension {
                expected: self.c.len(),
                actual: m,
            });
        }
        if t_len < self.trunc {
            return Err(Error::InsufficientData {
                what: "VARFIMA forecast history",
                required: self.trunc,
                actual: t_len,
            });
        }
        let a = self.ar_weights();
        Ok((0..m)
            .map(|j| {
                let s: f64 = (1..=self.trunc)
                    .map(|k| a[k] * (h[(t_len - k, j)] - self.c[j]))
                    .sum();
                self.c[j] - s
            })
            .collect())
    }
}

pub fn varfima_forecast(mdl: &VarfimaModel, h: &Matrix<f64>) -> Result<Vec<f64>> {
    mdl.forecast(h)
}
