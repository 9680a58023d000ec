//! Copula families used by the forecasters: multivariate Student-t,
//! exchangeable multivariate Clayton and bivariate Gumbel. Fitting works on
//! pseudo-observations; every family supports density evaluation,
//! unconditional sampling and sampling of the trailing coordinates given the
//! leading ones.

mod archimedean;
mod student;
mod tau;

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use archimedean::{
    ClaytonCopula, GumbelCopula, CLAYTON_MAX, CLAYTON_MIN, GUMBEL_MAX, GUMBEL_MIN,
};
pub use student::{
    nu_ladder, project_correlation, TCopula, TQuantileTable, EIGEN_FLOOR, NU_LADDER_LEN, NU_MAX,
    NU_MIN,
};
pub use tau::{kendall_tau, kendall_tau_matrix};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::matxform::{vech_index, vech_len};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    T,
    Clayton,
    Gumbel,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::T => "t",
            Family::Clayton => "clayton",
            Family::Gumbel => "gumbel",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "t" => Ok(Family::T),
            "clayton" => Ok(Family::Clayton),
            "gumbel" => Ok(Family::Gumbel),
            other => Err(Error::InvalidArgument(format!(
                "unknown copula family {other:?}"
            ))),
        }
    }
}

/// Non-fatal conditions met while fitting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitWarning {
    /// Tau-inverted correlation was not positive definite and was projected.
    ProjectedToPd,
    /// `ν` reached the top of its bracket.
    GaussianLike,
    AtLowerBound,
    AtUpperBound,
    /// Clayton or Gumbel fitted to data with negative average dependence.
    NegativeDependence,
}

/// `N × d` sample with every entry strictly inside `(0, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudoSample {
    data: Matrix<f64>,
}

impl PseudoSample {
    pub fn new(data: Matrix<f64>) -> Result<Self> {
        if data.cols() == 0 {
            return Err(Error::InvalidArgument(
                "pseudo sample has no columns".into(),
            ));
        }
        if let Some(bad) = data.as_slice().iter().find(|&&u| !(u > 0.0 && u < 1.0)) {
            return Err(Error::InvalidArgument(format!(
                "pseudo-observation {bad} is not inside (0, 1)"
            )));
        }
        Ok(Self { data })
    }

    pub fn len(&self) -> usize {
        self.data.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.data.cols()
    }

    pub fn as_matrix(&self) -> &Matrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> Matrix<f64> {
        self.data
    }

    /// Columns `cols` in the given order.
    pub fn select(&self, cols: &[usize]) -> Self {
        let rows: Vec<usize> = (0..self.len()).collect();
        Self {
            data: self.data.submatrix(&rows, cols),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CopulaModel {
    T(TCopula),
    Clayton(ClaytonCopula),
    Gumbel(GumbelCopula),
}

/// A fitted model with its attained log-likelihood.
#[derive(Clone, Debug, PartialEq)]
pub struct FittedCopula {
    pub model: CopulaModel,
    pub loglik: f64,
    pub warnings: Vec<FitWarning>,
}

/// Fits `family` to `data`, estimating the Kendall tau matrix on the way
/// when the family needs it.
pub fn fit(family: Family, data: &PseudoSample) -> Result<FittedCopula> {
    let tau = match family {
        Family::T => Some(kendall_tau_matrix(data.as_matrix())),
        _ => None,
    };
    fit_with(family, data, tau.as_ref(), None)
}

/// Fit with a precomputed Kendall tau matrix (required for the t family) and
/// an optional shared quantile table.
pub fn fit_with(
    family: Family,
    data: &PseudoSample,
    tau: Option<&Matrix<f64>>,
    table: Option<&TQuantileTable>,
) -> Result<FittedCopula> {
    let d = data.dim();
    if d < 2 {
        return Err(Error::InvalidArgument(
            "copulas need at least two columns".into(),
        ));
    }
    let min_rows = if family == Family::T { 10 * d } else { 20 };
    if data.len() < min_rows {
        return Err(Error::InsufficientData {
            what: "copula observations",
            required: min_rows,
            actual: data.len(),
        });
    }
    for c in 0..d {
        let first = data.as_matrix()[(0, c)];
        if (1..data.len()).all(|r| data.as_matrix()[(r, c)] == first) {
            return Err(Error::Fit(format!(
                "pseudo-observation column {c} is constant"
            )));
        }
    }
    let (model, loglik, mut warnings) = match family {
        Family::T => {
            let owned;
            let tau = match tau {
                Some(t) => t,
                None => {
                    owned = kendall_tau_matrix(data.as_matrix());
                    &owned
                }
            };
            let (m, ll, w) = student::fit(data, tau, table)?;
            (CopulaModel::T(m), ll, w)
        }
        Family::Clayton => {
            let (m, ll, w) = archimedean::fit_clayton(data)?;
            (CopulaModel::Clayton(m), ll, w)
        }
        Family::Gumbel => {
            let (m, ll, w) = archimedean::fit_gumbel(data)?;
            (CopulaModel::Gumbel(m), ll, w)
        }
    };
    if family != Family::T && warnings.contains(&FitWarning::AtLowerBound) {
        let mean_tau = match tau {
            Some(t) => off_diagonal_mean(t),
            None => off_diagonal_mean(&kendall_tau_matrix(data.as_matrix())),
        };
        if mean_tau < 0.0 {
            warnings.push(FitWarning::NegativeDependence);
        }
    }
    for w in &warnings {
        log::debug!("{family} copula fit (d = {d}): {w:?}");
    }
    Ok(FittedCopula {
        model,
        loglik,
        warnings,
    })
}

fn off_diagonal_mean(t: &Matrix<f64>) -> f64 {
    let d = t.rows();
    let mut s = 0.0;
    for i in 0..d {
        for j in i + 1..d {
            s += t[(i, j)];
        }
    }
    s / (d * (d - 1) / 2) as f64
}

impl CopulaModel {
    pub fn family(&self) -> Family {
        match self {
            CopulaModel::T(_) => Family::T,
            CopulaModel::Clayton(_) => Family::Clayton,
            CopulaModel::Gumbel(_) => Family::Gumbel,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            CopulaModel::T(c) => c.dim(),
            CopulaModel::Clayton(c) => c.dim(),
            CopulaModel::Gumbel(_) => 2,
        }
    }

    /// Closed-form Kendall tau of a bivariate model, or of each pair for the
    /// exchangeable families. For the t family this uses `R[0][1]`.
    pub fn kendall_tau(&self) -> f64 {
        match self {
            CopulaModel::T(c) => std::f64::consts::FRAC_2_PI * c.corr()[(0, 1)].asin(),
            CopulaModel::Clayton(c) => c.theta() / (c.theta() + 2.0),
            CopulaModel::Gumbel(c) => 1.0 - 1.0 / c.theta(),
        }
    }

    fn check_point(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                actual: u.len(),
            });
        }
        if let Some(bad) = u.iter().find(|&&v| !(v > 0.0 && v < 1.0)) {
            return Err(Error::InvalidArgument(format!(
                "copula argument {bad} is not strictly inside (0, 1)"
            )));
        }
        Ok(())
    }

    pub fn log_density(&self, u: &[f64]) -> Result<f64> {
        self.check_point(u)?;
        Ok(match self {
            CopulaModel::T(c) => c.log_density(u),
            CopulaModel::Clayton(c) => c.log_density(u),
            CopulaModel::Gumbel(c) => c.log_density(u),
        })
    }

    pub fn density(&self, u: &[f64]) -> Result<f64> {
        self.log_density(u).map(f64::exp)
    }

    /// `b` draws from the copula.
    pub fn sample_with<R: Rng + ?Sized>(&self, b: usize, rng: &mut R) -> Matrix<f64> {
        match self {
            CopulaModel::T(c) => c.sample(b, rng),
            CopulaModel::Clayton(c) => c.sample(b, rng),
            CopulaModel::Gumbel(c) => c.sample(b, rng),
        }
    }

    /// `b` draws on a stream derived from `seed`.
    pub fn sample(&self, b: usize, seed: u64) -> PseudoSample {
        let mut r = rng::stream(seed, &[0x5A4D]);
        PseudoSample {
            data: self.sample_with(b, &mut r),
        }
    }

    /// `b` draws of the last `d - d1` coordinates given the first
    /// `d1 = u_cond.len()` coordinates.
    pub fn conditional_sample_with<R: Rng + ?Sized>(
        &self,
        u_cond: &[f64],
        b: usize,
        rng: &mut R,
    ) -> Result<Matrix<f64>> {
        let d = self.dim();
        if u_cond.is_empty() || u_cond.len() >= d {
            return Err(Error::InvalidArgument(format!(
                "conditioning block of size {} for a {d}-dimensional copula",
                u_cond.len()
            )));
        }
        if let Some(bad) = u_cond.iter().find(|&&v| !(v > 0.0 && v < 1.0)) {
            return Err(Error::InvalidArgument(format!(
                "conditioning value {bad} is not strictly inside (0, 1)"
            )));
        }
        match self {
            CopulaModel::T(c) => c.conditional_sample(u_cond, b, rng),
            CopulaModel::Clayton(c) => Ok(c.conditional_sample(u_cond, b, rng)),
            CopulaModel::Gumbel(c) => c.conditional_sample(u_cond[0], b, rng),
        }
    }

    pub fn conditional_sample(&self, u_cond: &[f64], b: usize, seed: u64) -> Result<Matrix<f64>> {
        let mut r = rng::stream(seed, &[0xC0DE]);
        self.conditional_sample_with(u_cond, b, &mut r)
    }
}

/// Serialized form: correlation entries are the upper triangle in the
/// column-major vech order shared with the matrix transforms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CopulaJson {
    pub family: Family,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation: Option<Vec<f64>>,
}

impl From<&CopulaModel> for CopulaJson {
    fn from(m: &CopulaModel) -> Self {
        let mut out = CopulaJson {
            family: m.family(),
            dim: m.dim(),
            nu: None,
            theta: None,
            correlation: None,
        };
        match m {
            CopulaModel::T(c) => {
                let d = c.dim();
                let mut v = vec![0.0; vech_len(d)];
                for j in 0..d {
                    for i in 0..=j {
                        v[vech_index(i, j)] = c.corr()[(i, j)];
                    }
                }
                out.nu = Some(c.nu());
                out.correlation = Some(v);
            }
            CopulaModel::Clayton(c) => out.theta = Some(c.theta()),
            CopulaModel::Gumbel(c) => out.theta = Some(c.theta()),
        }
        out
    }
}

impl TryFrom<CopulaJson> for CopulaModel {
    type Error = Error;

    fn try_from(j: CopulaJson) -> Result<Self> {
        let missing = |what: &str| Error::Parse(format!("{} copula JSON lacks {what}", j.family));
        match j.family {
            Family::T => {
                let nu = j.nu.ok_or_else(|| missing("nu"))?;
                let v = j
                    .correlation
                    .as_ref()
                    .ok_or_else(|| missing("correlation"))?;
                if v.len() != vech_len(j.dim) {
                    return Err(Error::Dimension {
                        expected: vech_len(j.dim),
                        actual: v.len(),
                    });
                }
                let corr = Matrix::from_fn(j.dim, j.dim, |a, b| v[vech_index(a.min(b), a.max(b))]);
                Ok(CopulaModel::T(TCopula::new(corr, nu)?))
            }
            Family::Clayton => Ok(CopulaModel::Clayton(ClaytonCopula::new(
                j.dim,
                j.theta.ok_or_else(|| missing("theta"))?,
            )?)),
            Family::Gumbel => {
                if j.dim != 2 {
                    return Err(Error::Parse("gumbel copula must have dim 2".into()));
                }
                Ok(CopulaModel::Gumbel(GumbelCopula::new(
                    j.theta.ok_or_else(|| missing("theta"))?,
                )?))
            }
        }
    }
}

impl Serialize for CopulaModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CopulaJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for CopulaModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = CopulaJson::deserialize(d)?;
        CopulaModel::try_from(j).map_err(serde::de::Error::custom)
    }
}
