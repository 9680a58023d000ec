use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix, SymEigen};
use crate::matxform::SpdMatrix;
use crate::series::CovarianceSeries;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    FrobeniusSq,
    Stein,
    /// Realized standard deviation of a portfolio.
    PortfolioSd,
}

/// Which matrix sits on the inverted side of the Stein loss.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SteinOrientation {
    /// `tr(Γ̂ Γ̃⁻¹) - ln|Γ̂ Γ̃⁻¹| - N`: underprediction costs more.
    #[default]
    Property,
    /// `tr(Γ̃ Γ̂⁻¹) - ln|Γ̃ Γ̂⁻¹| - N`.
    Literal,
}

/// Per-day losses of one model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossSeries {
    pub model: String,
    pub kind: LossKind,
    pub values: Vec<f64>,
}

/// Root of the summed squared upper-triangle (diagonal included) errors.
pub fn frobenius_error(forecast: &Matrix<f64>, realized: &Matrix<f64>) -> f64 {
    let n = forecast.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in i..n {
            s += (forecast[(i, j)] - realized[(i, j)]).powi(2);
        }
    }
    s.sqrt()
}

/// Mean over days of [`frobenius_error`].
pub fn frobenius_rmse(forecasts: &CovarianceSeries<f64>, realized: &CovarianceSeries<f64>) -> Result<f64> {
    if forecasts.dates() != realized.dates() {
        return Err(Error::InvalidArgument(
            "forecast and realized series are not aligned".into(),
        ));
    }
    if forecasts.dim() != realized.dim() {
        return Err(Error::Dimension {
            expected: realized.dim(),
            actual: forecasts.dim(),
        });
    }
    if forecasts.is_empty() {
        return Err(Error::InsufficientData {
            what: "forecast days",
            required: 1,
            actual: 0,
        });
    }
    let s: f64 = forecasts
        .mats()
        .iter()
        .zip(realized.mats())
        .map(|(f, r)| frobenius_error(f.as_matrix(), r.as_matrix()))
        .sum();
    Ok(s / forecasts.len() as f64)
}

/// `Σ (λ - ln λ - 1)` over the eigenvalues of `B^{-1/2} A B^{-1/2}`, i.e.
/// `tr(A B⁻¹) - ln|A B⁻¹| - N`, each term clamped at its exact minimum 0.
fn stein_core(a: &Matrix<f64>, b: &Matrix<f64>) -> Result<f64> {
    let n = a.rows();
    let ch = Cholesky::new(b).ok_or_else(|| Error::NotSpd("Stein loss denominator".into()))?;
    // M = L⁻¹ A L⁻ᵀ
    let mut half = Matrix::zeros(n, n);
    for c in 0..n {
        let y = ch.forward(&a.column(c));
        for r in 0..n {
            half[(r, c)] = y[r];
        }
    }
    let mut m = Matrix::zeros(n, n);
    for r in 0..n {
        let y = ch.forward(half.row(r));
        for c in 0..n {
            m[(r, c)] = y[c];
        }
    }
    m.symmetrize();
    let e = SymEigen::new(&m);
    let mut s = 0.0;
    for &l in &e.values {
        if !(l > 0.0) {
            return Err(Error::NotSpd("Stein loss numerator".into()));
        }
        let x = l - 1.0;
        s += (x - x.ln_1p()).max(0.0);
    }
    Ok(s)
}

/// Stein loss in the default (property) orientation.
pub fn stein_loss(forecast: &SpdMatrix<f64>, realized: &SpdMatrix<f64>) -> Result<f64> {
    stein_loss_with(forecast, realized, SteinOrientation::Property)
}

pub fn stein_loss_with(
    forecast: &SpdMatrix<f64>,
    realized: &SpdMatrix<f64>,
    orientation: SteinOrientation,
) -> Result<f64> {
    if forecast.dim() != realized.dim() {
        return Err(Error::Dimension {
            expected: realized.dim(),
            actual: forecast.dim(),
        });
    }
    match orientation {
        SteinOrientation::Property => stein_core(realized.as_matrix(), forecast.as_matrix()),
        SteinOrientation::Literal => stein_core(forecast.as_matrix(), realized.as_matrix()),
    }
}
