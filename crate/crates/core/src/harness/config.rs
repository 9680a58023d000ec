use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::benchmod::VarfimaOptions;
use crate::copulae::Family;
use crate::error::{Error, Result};
use crate::evalkit::{SteinOrientation, DEFAULT_GRID_POINTS, DEFAULT_N_BOOT};
use crate::fcopula::{Approach, DEFAULT_DRAWS};
use crate::matxform::Coord;
use crate::rvest::SimConfig;

use super::synth::MarkovTSpec;

pub const MIN_WINDOW: usize = 45;

/// The 13 forecasting models.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelId {
    DccGarch,
    Har,
    Varfima,
    T1,
    T2,
    Cl1,
    Cl2,
    EntryT,
    EntryGb,
    EntryCl,
    THar,
    GbHar,
    ClHar,
}

pub enum ModelKind {
    Dcc,
    Har,
    Varfima,
    Copula(Approach, Family),
}

impl ModelId {
    pub const ALL: [ModelId; 13] = [
        ModelId::DccGarch,
        ModelId::Har,
        ModelId::Varfima,
        ModelId::T1,
        ModelId::T2,
        ModelId::Cl1,
        ModelId::Cl2,
        ModelId::EntryT,
        ModelId::EntryGb,
        ModelId::EntryCl,
        ModelId::THar,
        ModelId::GbHar,
        ModelId::ClHar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelId::DccGarch => "DCC-GARCH",
            ModelId::Har => "HAR",
            ModelId::Varfima => "VARFIMA",
            ModelId::T1 => "T-1",
            ModelId::T2 => "T-2",
            ModelId::Cl1 => "CL-1",
            ModelId::Cl2 => "CL-2",
            ModelId::EntryT => "Entry-T",
            ModelId::EntryGb => "Entry-GB",
            ModelId::EntryCl => "Entry-CL",
            ModelId::THar => "T-HAR",
            ModelId::GbHar => "Gb-HAR",
            ModelId::ClHar => "Cl-HAR",
        }
    }

    pub fn kind(self) -> ModelKind {
        use Approach::*;
        use Family::*;
        match self {
            ModelId::DccGarch => ModelKind::Dcc,
            ModelId::Har => ModelKind::Har,
            ModelId::Varfima => ModelKind::Varfima,
            ModelId::T1 => ModelKind::Copula(Mc1, T),
            ModelId::T2 => ModelKind::Copula(Mc2, T),
            ModelId::Cl1 => ModelKind::Copula(Mc1, Clayton),
            ModelId::Cl2 => ModelKind::Copula(Mc2, Clayton),
            ModelId::EntryT => ModelKind::Copula(Entry, T),
            ModelId::EntryGb => ModelKind::Copula(Entry, Gumbel),
            ModelId::EntryCl => ModelKind::Copula(Entry, Clayton),
            ModelId::THar => ModelKind::Copula(CopulaHar, T),
            ModelId::GbHar => ModelKind::Copula(CopulaHar, Gumbel),
            ModelId::ClHar => ModelKind::Copula(CopulaHar, Clayton),
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelId::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model {s:?}")))
    }
}

impl Serialize for ModelId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for ModelId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordChoice {
    #[default]
    Cholesky,
    Logmatrix,
    Both,
}

impl CoordChoice {
    pub fn coords(self) -> Vec<Coord> {
        match self {
            CoordChoice::Cholesky => vec![Coord::Cholesky],
            CoordChoice::Logmatrix => vec![Coord::LogMatrix],
            CoordChoice::Both => vec![Coord::Cholesky, Coord::LogMatrix],
        }
    }
}

/// Where the covariance series (and daily returns) come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// Simulated intraday panel, estimated into daily realized covariances.
    Synthetic {
        #[serde(default)]
        sim: SimConfig,
        #[serde(default = "one")]
        base_step: usize,
        #[serde(default = "one")]
        subgrids: usize,
    },
    /// Covariance matrices from a Markov t-copula process on vech
    /// coordinates.
    MarkovT(MarkovTSpec),
    /// Intraday log prices `timestamp,symbol,logprice`.
    IntradayCsv {
        path: PathBuf,
        #[serde(default = "one")]
        base_step: usize,
        #[serde(default = "one")]
        subgrids: usize,
        /// Previous-tick alignment to a regular session grid with this
        /// spacing; `None` requires common timestamps across assets.
        #[serde(default)]
        align_minutes: Option<u32>,
    },
    /// Covariance series `date,i,j,value`, optional daily returns
    /// `date,asset,return`.
    CovarianceCsv {
        path: PathBuf,
        #[serde(default)]
        returns_path: Option<PathBuf>,
    },
}

fn one() -> usize {
    1
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic {
            sim: SimConfig::default(),
            base_step: 1,
            subgrids: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    pub alpha: f64,
    pub n_boot: usize,
    /// `None` uses `⌈T_out^{1/3}⌉`.
    pub block_len: Option<usize>,
    /// Explicit frontier targets (daily log-return units).
    pub mu_grid: Option<Vec<f64>>,
    pub grid_points: usize,
    pub stein: SteinOrientation,
    /// Models below this forecast coverage are left out of the MCS.
    pub min_coverage: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            n_boot: DEFAULT_N_BOOT,
            block_len: None,
            mu_grid: None,
            grid_points: DEFAULT_GRID_POINTS,
            stein: SteinOrientation::Property,
            min_coverage: 0.95,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestConfig {
    pub window: usize,
    pub coord: CoordChoice,
    pub models: Vec<ModelId>,
    /// Monte Carlo draws per copula forecast.
    pub draws: usize,
    pub seed: u64,
    /// Refit every `k` days; forecasts in between reuse the last fit.
    pub refit_every: usize,
    pub data: DataSource,
    pub evaluation: EvalOptions,
    pub varfima: VarfimaOptions,
    /// Worker threads; `None` defers to `VOLCOP_WORKERS`, then to the
    /// number of CPUs.
    pub workers: Option<usize>,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            window: 1508,
            coord: CoordChoice::Cholesky,
            models: ModelId::ALL.to_vec(),
            draws: DEFAULT_DRAWS,
            seed: 1,
            refit_every: 1,
            data: DataSource::default(),
            evaluation: EvalOptions::default(),
            varfima: VarfimaOptions::default(),
            workers: None,
        }
    }
}

impl BacktestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < MIN_WINDOW {
            return Err(Error::InvalidArgument(format!(
                "window {} is below the minimum of {MIN_WINDOW}",
                self.window
            )));
        }
        if self.models.is_empty() {
            return Err(Error::InvalidArgument("no models configured".into()));
        }
        if self.draws == 0 || self.refit_every == 0 {
            return Err(Error::InvalidArgument(
                "draws and refit_every must be positive".into(),
            ));
        }
        let e = &self.evaluation;
        if !(e.alpha > 0.0 && e.alpha < 1.0) || e.n_boot == 0 {
            return Err(Error::InvalidArgument(
                "evaluation needs alpha in (0, 1) and n_boot > 0".into(),
            ));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidArgument("workers must be positive".into()));
        }
        Ok(())
    }

    /// Makes relative data paths relative to `base` (the config file's
    /// directory).
    pub fn resolve_paths(&mut self, base: &std::path::Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.data {
            DataSource::IntradayCsv { path, .. } => fix(path),
            DataSource::CovarianceCsv { path, returns_path } => {
                fix(path);
                if let Some(r) = returns_path {
                    fix(r);
                }
            }
            DataSource::Synthetic { .. } | DataSource::MarkovT(_) => {}
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}
