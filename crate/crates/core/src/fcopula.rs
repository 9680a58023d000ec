//! One-step-ahead forecasts of vech coordinates by conditional Monte Carlo
//! from copulas fitted on consecutive pairs `(X_{t-1}, X_t)`:
//!
//! 1. fit empirical marginals and the copula on the lag panel,
//! 2. transform today's observation `u = F̂(X_T)`,
//! 3. draw `B` conditional samples of tomorrow given `u` and invert the
//!    marginals,
//! 4. average the draws and rebuild the SPD matrix.

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::benchmod::{har_fit, HarModel, HAR_LAGS};
use crate::copulae::{
    fit_with, kendall_tau_matrix, CopulaJson, CopulaModel, Family, FitWarning, PseudoSample,
    TQuantileTable,
};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::margins::{mean_quantile, EmpiricalMarginal};
use crate::matxform::{diagonal_positions, from_vech, Coord, SpdMatrix, VechVector};
use crate::rng;
use crate::series::VechHistory;

pub const DEFAULT_DRAWS: usize = 1000;
/// Shortest history any copula forecaster accepts.
pub const MIN_HISTORY: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Approach {
    /// One `2m`-dimensional copula on `(X_{t-1}, X_t)`.
    Mc1,
    /// `m` copulas of dimension `m + 1` on `(X_{t-1}, X_{j,t})`.
    Mc2,
    /// `m` bivariate copulas on `(X_{j,t-1}, X_{j,t})`.
    Entry,
    /// Bivariate copulas on the diagonal coordinates, HAR elsewhere.
    CopulaHar,
}

impl Approach {
    pub fn allows(self, family: Family) -> bool {
        match self {
            Approach::Mc1 | Approach::Mc2 => family != Family::Gumbel,
            Approach::Entry | Approach::CopulaHar => true,
        }
    }

    fn tag(self) -> u64 {
        match self {
            Approach::Mc1 => 1,
            Approach::Mc2 => 2,
            // the hybrid's copula coordinates share the entrywise streams
            Approach::Entry | Approach::CopulaHar => 3,
        }
    }
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Approach::Mc1 => "mc1",
            Approach::Mc2 => "mc2",
            Approach::Entry => "entry",
            Approach::CopulaHar => "copula_har",
        })
    }
}

fn family_tag(f: Family) -> u64 {
    match f {
        Family::T => 11,
        Family::Clayton => 12,
        Family::Gumbel => 13,
    }
}

/// Everything the forecasters of one (day, coordinate system) share: the
/// marginals, the stacked pseudo-observations of `(X_{t-1}, X_t)`, their
/// Kendall tau matrix and a t quantile table on the `r/(T+1)` grid.
pub struct LagPanel {
    coord: Coord,
    m: usize,
    marginals: Vec<EmpiricalMarginal<f64>>,
    pseudo: PseudoSample,
    tau: OnceLock<Matrix<f64>>,
    table: TQuantileTable,
    columns: Vec<Vec<f64>>,
}

impl fmt::Debug for LagPanel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LagPanel")
            .field("coord", &self.coord)
            .field("m", &self.m)
            .field("rows", &self.pseudo.len())
            .finish_non_exhaustive()
    }
}

impl LagPanel {
    pub fn new(h: &VechHistory<f64>) -> Result<Self> {
        let t_len = h.len();
        if t_len < MIN_HISTORY {
            return Err(Error::InsufficientData {
                what: "vech history",
                required: MIN_HISTORY,
                actual: t_len,
            });
        }
        let m = h.width();
        let columns: Vec<Vec<f64>> = (0..m).map(|j| h.column(j)).collect();
        let marginals = columns
            .iter()
            .map(|c| EmpiricalMarginal::fit(c))
            .collect::<Result<Vec<_>>>()?;
        let u: Vec<Vec<f64>> = columns
            .iter()
            .zip(&marginals)
            .map(|(c, f)| c.iter().map(|&x| f.cdf(x)).collect())
            .collect();
        let data = Matrix::from_fn(t_len - 1, 2 * m, |r, c| {
            if c < m {
                u[c][r]
            } else {
                u[c - m][r + 1]
            }
        });
        Ok(Self {
            coord: h.coord(),
            m,
            marginals,
            pseudo: PseudoSample::new(data)?,
            tau: OnceLock::new(),
            table: TQuantileTable::new(t_len + 1),
            columns,
        })
    }

    pub fn coord(&self) -> Coord {
        self.coord
    }

    pub fn width(&self) -> usize {
        self.m
    }

    /// `(T - 1) × 2m` pseudo-observations, lag block first.
    pub fn pseudo(&self) -> &PseudoSample {
        &self.pseudo
    }

    pub fn marginals(&self) -> &[EmpiricalMarginal<f64>] {
        &self.marginals
    }

    /// Kendall tau matrix of the stacked lag panel, computed once.
    pub fn tau(&self) -> &Matrix<f64> {
        self.tau
            .get_or_init(|| kendall_tau_matrix(self.pseudo.as_matrix()))
    }

    fn fit_cols(&self, family: Family, cols: &[usize]) -> Result<(CopulaModel, Vec<FitWarning>)> {
        let data = self.pseudo.select(cols);
        let tau = (family == Family::T).then(|| self.tau().submatrix(cols, cols));
        let fitted = fit_with(family, &data, tau.as_ref(), Some(&self.table))?;
        Ok((fitted.model, fitted.warnings))
    }

    /// Entrywise copula of coordinate `j`.
    pub fn fit_entry(&self, family: Family, j: usize) -> Result<(CopulaModel, Vec<FitWarning>)> {
        self.fit_cols(family, &[j, self.m + j])
    }

    /// HAR on the raw history of coordinate `j`.
    pub fn fit_har(&self, j: usize) -> Result<HarModel> {
        har_fit(&self.columns[j])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CoordModel {
    Copula(CopulaModel),
    Har(HarModel),
}

#[derive(Clone, Debug, PartialEq)]
enum Parts {
    Joint(CopulaModel),
    PerCoord(Vec<CoordModel>),
}

/// A fitted copula forecaster. Immutable; forecasts with different seeds
/// may run concurrently.
#[derive(Clone, Debug, PartialEq)]
pub struct CopulaForecaster {
    approach: Approach,
    family: Family,
    coord: Coord,
    draws: usize,
    seed: u64,
    marginals: Vec<EmpiricalMarginal<f64>>,
    parts: Parts,
    warnings: Vec<(usize, FitWarning)>,
}

/// A vech forecast and the SPD matrix rebuilt from it.
#[derive(Clone, Debug, PartialEq)]
pub struct Forecast {
    pub vech: VechVector<f64>,
    pub matrix: SpdMatrix<f64>,
    /// The rebuild repaired a non-positive Cholesky diagonal.
    pub repaired: bool,
}

impl CopulaForecaster {
    /// Fits `approach` with `family` on a shared lag panel.
    pub fn fit(
        panel: &LagPanel,
        approach: Approach,
        family: Family,
        draws: usize,
        seed: u64,
    ) -> Result<Self> {
        if !approach.allows(family) {
            return Err(Error::InvalidArgument(format!(
                "{family} copula is not available for approach {approach}"
            )));
        }
        if draws == 0 {
            return Err(Error::InvalidArgument("draw count must be positive".into()));
        }
        let m = panel.m;
        let mut warnings = Vec::new();
        let parts = match approach {
            Approach::Mc1 => {
                let cols: Vec<usize> = (0..2 * m).collect();
                let (c, w) = panel.fit_cols(family, &cols)?;
                warnings.extend(w.into_iter().map(|w| (0, w)));
                Parts::Joint(c)
            }
            Approach::Mc2 => {
                let mut out = Vec::with_capacity(m);
                for j in 0..m {
                    let mut cols: Vec<usize> = (0..m).collect();
                    cols.push(m + j);
                    let (c, w) = panel.fit_cols(family, &cols)?;
                    warnings.extend(w.into_iter().map(|w| (j, w)));
                    out.push(CoordModel::Copula(c));
                }
                Parts::PerCoord(out)
            }
            Approach::Entry => {
                let mut out = Vec::with_capacity(m);
                for j in 0..m {
                    let (c, w) = panel.fit_entry(family, j)?;
                    warnings.extend(w.into_iter().map(|w| (j, w)));
                    out.push(CoordModel::Copula(c));
                }
                Parts::PerCoord(out)
            }
            Approach::CopulaHar => {
                let n = crate::matxform::vech_dim(m).expect("vech width");
                let diag = diagonal_positions(n);
                let mut out = Vec::with_capacity(m);
                for j in 0..m {
                    if diag.contains(&j) {
                        let (c, w) = panel.fit_entry(family, j)?;
                        warnings.extend(w.into_iter().map(|w| (j, w)));
                        out.push(CoordModel::Copula(c));
                    } else {
                        out.push(CoordModel::Har(panel.fit_har(j)?));
                    }
                }
                Parts::PerCoord(out)
            }
        };
        Ok(Self {
            approach,
            family,
            coord: panel.coord,
            draws,
            seed,
            marginals: panel.marginals.clone(),
            parts,
            warnings,
        })
    }

    /// Assembles a forecaster from already fitted coordinate models, e.g.
    /// entrywise copulas and HAR fits shared with other models of the day.
    pub fn from_parts(
        panel: &LagPanel,
        approach: Approach,
        family: Family,
        coords: Vec<CoordModel>,
        draws: usize,
        seed: u64,
    ) -> Result<Self> {
        if !matches!(approach, Approach::Entry | Approach::CopulaHar) {
            return Err(Error::InvalidArgument(format!(
                "approach {approach} cannot be assembled per coordinate"
            )));
        }
        if coords.len() != panel.m {
            return Err(Error::Dimension {
                expected: panel.m,
                actual: coords.len(),
            });
        }
        Ok(Self {
            approach,
            family,
            coord: panel.coord,
            draws,
            seed,
            marginals: panel.marginals.clone(),
            parts: Parts::PerCoord(coords),
            warnings: Vec::new(),
        })
    }

    pub fn approach(&self) -> Approach {
        self.approach
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn coord(&self) -> Coord {
        self.coord
    }

    pub fn draws(&self) -> usize {
        self.draws
    }

    pub fn warnings(&self) -> &[(usize, FitWarning)] {
        &self.warnings
    }

    /// The fitted copulas in coordinate order (one for MC1).
    pub fn copulas(&self) -> Vec<&CopulaModel> {
        match &self.parts {
            Parts::Joint(c) => vec![c],
            Parts::PerCoord(v) => v
                .iter()
                .filter_map(|p| match p {
                    CoordModel::Copula(c) => Some(c),
                    CoordModel::Har(_) => None,
                })
                .collect(),
        }
    }

    /// Per-coordinate models; `None` for MC1.
    pub fn coord_models(&self) -> Option<&[CoordModel]> {
        match &self.parts {
            Parts::Joint(_) => None,
            Parts::PerCoord(v) => Some(v),
        }
    }

    fn stream(&self, seed: u64, j: u64) -> rng::StreamRng {
        rng::stream(seed, &[self.approach.tag(), family_tag(self.family), j])
    }

    /// Forecast of `X_{T+1}` given the history ending at `X_T`. Copula
    /// coordinates read only `X_T`; HAR coordinates read the last 22 rows.
    pub fn forecast(&self, h: &VechHistory<f64>) -> Result<Forecast> {
        self.forecast_with_seed(h, self.seed)
    }

    /// [`forecast`](Self::forecast) with the simulation seed overridden, for
    /// reusing one fit over several days.
    pub fn forecast_with_seed(&self, h: &VechHistory<f64>, seed: u64) -> Result<Forecast> {
        let m = self.marginals.len();
        if h.width() != m {
            return Err(Error::Dimension {
                expected: m,
                actual: h.width(),
            });
        }
        if h.coord() != self.coord {
            return Err(Error::InvalidArgument(format!(
                "history is in {} coordinates, model in {}",
                h.coord().name(),
                self.coord.name()
            )));
        }
        let last = h.last();
        let u: Vec<f64> = last
            .iter()
            .zip(&self.marginals)
            .map(|(&x, f)| f.cdf_interior(x))
            .collect();
        let mut out = vec![0.0; m];
        match &self.parts {
            Parts::Joint(c) => {
                let mut r = self.stream(seed, 0);
                let draws = c.conditional_sample_with(&u, self.draws, &mut r)?;
                for (j, o) in out.iter_mut().enumerate() {
                    *o = mean_quantile(&self.marginals[j], &draws.column(j));
                }
            }
            Parts::PerCoord(models) => {
                for (j, part) in models.iter().enumerate() {
                    out[j] = match part {
                        CoordModel::Copula(c) => {
                            let cond: &[f64] = if c.dim() == 2 { &u[j..=j] } else { &u };
                            let mut r = self.stream(seed, j as u64);
                            let draws = c.conditional_sample_with(cond, self.draws, &mut r)?;
                            mean_quantile(&self.marginals[j], draws.as_slice())
                        }
                        CoordModel::Har(har) => {
                            if h.len() < HAR_LAGS {
                                return Err(Error::InsufficientData {
                                    what: "HAR forecast history",
                                    required: HAR_LAGS,
                                    actual: h.len(),
                                });
                            }
                            let col = h.column(j);
                            har.forecast(&col[col.len() - HAR_LAGS..])?
                        }
                    };
                }
            }
        }
        rebuild(self.coord, out)
    }
}

/// One serialized coordinate model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartJson {
    Copula(CopulaJson),
    Har(HarModel),
}

/// Serialized forecaster. Marginals are not stored: they are refitted from
/// the same history window when the model is loaded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForecasterJson {
    pub approach: Approach,
    pub family: Family,
    pub coord: Coord,
    pub draws: usize,
    pub seed: u64,
    /// One joint copula for MC1, one part per coordinate otherwise.
    pub parts: Vec<PartJson>,
}

impl CopulaForecaster {
    pub fn to_json(&self) -> ForecasterJson {
        let parts = match &self.parts {
            Parts::Joint(c) => vec![PartJson::Copula(c.into())],
            Parts::PerCoord(v) => v
                .iter()
                .map(|p| match p {
                    CoordModel::Copula(c) => PartJson::Copula(c.into()),
                    CoordModel::Har(h) => PartJson::Har(*h),
                })
                .collect(),
        };
        ForecasterJson {
            approach: self.approach,
            family: self.family,
            coord: self.coord,
            draws: self.draws,
            seed: self.seed,
            parts,
        }
    }

    /// Rebuilds a forecaster on the lag panel of the history it was fitted
    /// on, checking every part against the approach.
    pub fn from_json(panel: &LagPanel, j: ForecasterJson) -> Result<Self> {
        let bad = |msg: String| Err(Error::Parse(msg));
        if !j.approach.allows(j.family) {
            return bad(format!("{} copula is not available for approach {}", j.family, j.approach));
        }
        if j.coord != panel.coord {
            return bad(format!("model is in {} coordinates, history in {}", j.coord, panel.coord));
        }
        if j.draws == 0 {
            return bad("draw count must be positive".into());
        }
        let m = panel.m;
        let n = crate::matxform::vech_dim(m).expect("vech width");
        let diag = diagonal_positions(n);
        let copula = |p: PartJson, dim: usize| -> Result<CopulaModel> {
            match p {
                PartJson::Copula(c) if c.family == j.family && c.dim == dim => c.try_into(),
                PartJson::Copula(c) => Err(Error::Parse(format!(
                    "expected a {dim}-dimensional {} copula, found a {}-dimensional {}",
                    j.family, c.dim, c.family
                ))),
                PartJson::Har(_) => Err(Error::Parse("unexpected HAR part".into())),
            }
        };
        let want = if j.approach == Approach::Mc1 { 1 } else { m };
        if j.parts.len() != want {
            return bad(format!("{} parts for approach {}, expected {want}", j.parts.len(), j.approach));
        }
        let parts = match j.approach {
            Approach::Mc1 => Parts::Joint(copula(j.parts.into_iter().next().expect("one part"), 2 * m)?),
            Approach::Mc2 => Parts::PerCoord(
                j.parts
                    .into_iter()
                    .map(|p| copula(p, m + 1).map(CoordModel::Copula))
                    .collect::<Result<_>>()?,
            ),
            Approach::Entry | Approach::CopulaHar => Parts::PerCoord(
                j.parts
                    .into_iter()
                    .enumerate()
                    .map(|(k, p)| {
                        if j.approach == Approach::CopulaHar && !diag.contains(&k) {
                            match p {
                                PartJson::Har(h) => Ok(CoordModel::Har(h)),
                                PartJson::Copula(_) => Err(Error::Parse(format!(
                                    "coordinate {k} is off the diagonal and needs a HAR part"
                                ))),
                            }
                        } else {
                            copula(p, 2).map(CoordModel::Copula)
                        }
                    })
                    .collect::<Result<_>>()?,
            ),
        };
        Ok(Self {
            approach: j.approach,
            family: j.family,
            coord: panel.coord,
            draws: j.draws,
            seed: j.seed,
            marginals: panel.marginals.clone(),
            parts,
            warnings: Vec::new(),
        })
    }
}

/// SPD matrix from a vech forecast in either coordinate system.
pub fn rebuild(coord: Coord, values: Vec<f64>) -> Result<Forecast> {
    let vech = VechVector::new(coord, values)?;
    let m = from_vech(&vech)?;
    Ok(Forecast {
        vech,
        matrix: m.value,
        repaired: m.flagged,
    })
}

pub fn fit_mc1(h: &VechHistory<f64>, family: Family, draws: usize, seed: u64) -> Result<CopulaForecaster> {
    CopulaForecaster::fit(&LagPanel::new(h)?, Approach::Mc1, family, draws, seed)
}

pub fn fit_mc2(h: &VechHistory<f64>, family: Family, draws: usize, seed: u64) -> Result<CopulaForecaster> {
    CopulaForecaster::fit(&LagPanel::new(h)?, Approach::Mc2, family, draws, seed)
}

pub fn fit_entry(h: &VechHistory<f64>, family: Family, draws: usize, seed: u64) -> Result<CopulaForecaster> {
    CopulaForecaster::fit(&LagPanel::new(h)?, Approach::Entry, family, draws, seed)
}

pub fn fit_copula_har(
    h: &VechHistory<f64>,
    family: Family,
    draws: usize,
    seed: u64,
) -> Result<CopulaForecaster> {
    CopulaForecaster::fit(&LagPanel::new(h)?, Approach::CopulaHar, family, draws, seed)
}

pub fn forecast_one(f: &CopulaForecaster, h: &VechHistory<f64>) -> Result<Forecast> {
    f.forecast(h)
}
