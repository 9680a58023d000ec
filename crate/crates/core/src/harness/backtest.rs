use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::ops::Range;
use std::time::Instant;

use chrono::{NaiveDate, TimeDelta};
use rayon::prelude::*;

use crate::benchmod::{dcc_fit, varfima_fit_with, DccModel, HarModel, VarfimaModel, HAR_LAGS};
use crate::copulae::{CopulaModel, Family};
use crate::error::{Error, Result};
use crate::evalkit::GmvpResult;
use crate::fcopula::{rebuild, Approach, CoordModel, CopulaForecaster, LagPanel};
use crate::linalg::Matrix;
use crate::matxform::{diagonal_positions, Coord, SpdMatrix};
use crate::rng::derive_seed;
use crate::rvest::{estimate_series, simulate_panel, IntradayPanel, SessionGrid};
use crate::series::{CovarianceSeries, VechHistory};

use super::config::{BacktestConfig, DataSource, ModelId, ModelKind};
use super::evaluate::{evaluate, EvaluationReport};
use super::io;

pub const WORKERS_ENV: &str = "VOLCOP_WORKERS";

/// Realized covariance series with optional daily returns on the same dates.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub assets: Vec<String>,
    pub series: CovarianceSeries<f64>,
    pub returns: Option<Matrix<f64>>,
}

fn numbered_assets(n: usize) -> Vec<String> {
    (1..=n).map(|k| format!("A{k}")).collect()
}

fn open(path: &std::path::Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

pub fn load_dataset(src: &DataSource) -> Result<Dataset> {
    match src {
        DataSource::Synthetic {
            sim,
            base_step,
            subgrids,
        } => {
            let sp = simulate_panel(sim)?;
            panel_dataset(&sp.panel, *base_step, *subgrids)
        }
        DataSource::MarkovT(spec) => {
            let d = spec.generate()?;
            Ok(Dataset {
                assets: numbered_assets(spec.assets),
                series: d.series,
                returns: Some(d.returns),
            })
        }
        DataSource::IntradayCsv {
            path,
            base_step,
            subgrids,
            align_minutes,
        } => {
            let ticks = io::read_intraday_csv(open(path)?)?;
            let grid = align_minutes.map(|m| SessionGrid {
                step: TimeDelta::minutes(m as i64),
                ..SessionGrid::default()
            });
            let panel = IntradayPanel::from_ticks(&ticks, grid)?;
            panel_dataset(&panel, *base_step, *subgrids)
        }
        DataSource::CovarianceCsv { path, returns_path } => {
            let series = io::read_covariance_csv(open(path)?)?;
            let returns = match returns_path {
                Some(p) => Some(io::read_returns_csv(open(p)?, series.dates(), series.dim())?),
                None => None,
            };
            Ok(Dataset {
                assets: numbered_assets(series.dim()),
                series,
                returns,
            })
        }
    }
}

pub fn panel_dataset(panel: &IntradayPanel<f64>, base_step: usize, subgrids: usize) -> Result<Dataset> {
    Ok(Dataset {
        assets: panel.assets().to_vec(),
        series: estimate_series(panel, base_step, subgrids)?,
        returns: Some(panel.daily_returns()),
    })
}

/// A model that produced no forecast for one day.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ModelFailure {
    pub model: ModelId,
    pub coord: Coord,
    pub date: NaiveDate,
    pub message: String,
}

/// Forecasts of one coordinate system, `forecasts[model][k]` for the
/// `k`-th out-of-sample day.
#[derive(Clone, Debug)]
pub struct CoordRun {
    pub coord: Coord,
    pub forecasts: BTreeMap<ModelId, Vec<Option<SpdMatrix<f64>>>>,
    pub failures: Vec<ModelFailure>,
    /// Unconstrained-in-return GMVP of each available forecast.
    pub gmvp: BTreeMap<ModelId, Vec<Option<GmvpResult>>>,
}

#[derive(Clone, Debug)]
pub struct BacktestRun {
    pub config: BacktestConfig,
    pub assets: Vec<String>,
    /// Target dates of the out-of-sample days.
    pub dates: Vec<NaiveDate>,
    pub realized: Vec<SpdMatrix<f64>>,
    /// Realized daily returns of the target days.
    pub returns: Option<Vec<Vec<f64>>>,
    /// In-window mean daily returns, the expected returns of each target.
    pub expected: Option<Vec<Vec<f64>>>,
    pub coords: Vec<CoordRun>,
    pub report: EvaluationReport,
    pub elapsed_secs: f64,
    pub workers: usize,
}

impl BacktestRun {
    pub fn coord_run(&self, coord: Coord) -> Option<&CoordRun> {
        self.coords.iter().find(|c| c.coord == coord)
    }

    /// Models in configuration order, duplicates removed.
    pub fn models(&self) -> Vec<ModelId> {
        unique_models(&self.config.models)
    }
}

fn unique_models(models: &[ModelId]) -> Vec<ModelId> {
    let mut out: Vec<ModelId> = Vec::new();
    for m in models {
        if !out.contains(m) {
            out.push(*m);
        }
    }
    out
}

/// Worker count from the config, then `VOLCOP_WORKERS`, then the CPU count.
pub fn resolve_workers(cfg: &BacktestConfig) -> Result<usize> {
    if let Some(w) = cfg.workers {
        return Ok(w);
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(w) if w > 0 => Ok(w),
            _ => Err(Error::InvalidArgument(format!(
                "{WORKERS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn coord_tag(c: Coord) -> u64 {
    match c {
        Coord::Cholesky => 1,
        Coord::LogMatrix => 2,
    }
}

fn family_models(f: Family) -> (ModelId, ModelId) {
    match f {
        Family::T => (ModelId::EntryT, ModelId::THar),
        Family::Gumbel => (ModelId::EntryGb, ModelId::GbHar),
        Family::Clayton => (ModelId::EntryCl, ModelId::ClHar),
    }
}

enum Fitted {
    Har(Vec<HarModel>),
    Varfima(VarfimaModel),
    Copula(CopulaForecaster),
}

type FitResult<T> = std::result::Result<T, String>;

/// Everything fitted at the start of a refit block for one coordinate
/// system.
struct CoordFits {
    models: Vec<(ModelId, FitResult<Fitted>)>,
}

struct Ctx<'a> {
    cfg: &'a BacktestConfig,
    models: Vec<ModelId>,
    histories: Vec<VechHistory<f64>>,
    returns: Option<&'a Matrix<f64>>,
}

fn fit_coord(ctx: &Ctx, h: &VechHistory<f64>, seed: u64) -> CoordFits {
    let cfg = ctx.cfg;
    let m = h.width();
    let n = h.dim();
    let diag = diagonal_positions(n);
    let wants = |id: ModelId| ctx.models.contains(&id);

    let needs_panel = ctx.models.iter().any(|id| !matches!(id.kind(), ModelKind::Dcc | ModelKind::Varfima));
    let panel = if needs_panel {
        LagPanel::new(h).map_err(|e| e.to_string())
    } else {
        Err(String::new())
    };

    // HAR on every coordinate, shared by the HAR model and the hybrids
    let needs_har = wants(ModelId::Har) || wants(ModelId::THar) || wants(ModelId::GbHar) || wants(ModelId::ClHar);
    let har: FitResult<Vec<HarModel>> = match (&panel, needs_har) {
        (Ok(p), true) => (0..m)
            .map(|j| p.fit_har(j))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.to_string()),
        (Err(e), true) => Err(e.clone()),
        _ => Err(String::new()),
    };

    // entrywise copulas per family, shared by Entry-X and X-HAR
    let mut entry: BTreeMap<Family, Vec<Option<FitResult<CopulaModel>>>> = BTreeMap::new();
    for fam in [Family::T, Family::Gumbel, Family::Clayton] {
        let (e_id, h_id) = family_models(fam);
        let cols: Vec<usize> = if wants(e_id) {
            (0..m).collect()
        } else if wants(h_id) {
            diag.clone()
        } else {
            continue;
        };
        let mut fits = vec![None; m];
        for j in cols {
            fits[j] = Some(match &panel {
                Ok(p) => p.fit_entry(fam, j).map(|(c, _)| c).map_err(|e| e.to_string()),
                Err(e) => Err(e.clone()),
            });
        }
        entry.insert(fam, fits);
    }

    let mut models = Vec::with_capacity(ctx.models.len());
    for &id in &ctx.models {
        let fitted: FitResult<Fitted> = match id.kind() {
            ModelKind::Dcc => continue,
            ModelKind::Har => har.clone().map(Fitted::Har),
            ModelKind::Varfima => varfima_fit_with(h.values(), &cfg.varfima)
                .map(Fitted::Varfima)
                .map_err(|e| e.to_string()),
            ModelKind::Copula(approach, fam) => (|| {
                let p = panel.as_ref().map_err(|e| e.clone())?;
                match approach {
                    Approach::Mc1 | Approach::Mc2 => {
                        CopulaForecaster::fit(p, approach, fam, cfg.draws, seed).map_err(|e| e.to_string())
                    }
                    Approach::Entry | Approach::CopulaHar => {
                        let fits = &entry[&fam];
                        let mut parts = Vec::with_capacity(m);
                        for j in 0..m {
                            if approach == Approach::CopulaHar && !diag.contains(&j) {
                                let hs = har.as_ref().map_err(|e| e.clone())?;
                                parts.push(CoordModel::Har(hs[j]));
                            } else {
                                let c = fits[j].as_ref().expect("entry fit scheduled").clone()?;
                                parts.push(CoordModel::Copula(c));
                            }
                        }
                        CopulaForecaster::from_parts(p, approach, fam, parts, cfg.draws, seed)
                            .map_err(|e| e.to_string())
                    }
                }
            })()
            .map(Fitted::Copula),
        };
        models.push((id, fitted));
    }
    CoordFits { models }
}

fn forecast_one(fitted: &Fitted, h: &VechHistory<f64>, seed: u64) -> Result<SpdMatrix<f64>> {
    let values = match fitted {
        Fitted::Copula(f) => return Ok(f.forecast_with_seed(h, seed)?.matrix),
        Fitted::Har(hs) => {
            if h.len() < HAR_LAGS {
                return Err(Error::InsufficientData {
                    what: "HAR forecast history",
                    required: HAR_LAGS,
                    actual: h.len(),
                });
            }
            hs.iter()
                .enumerate()
                .map(|(j, m)| {
                    let col = h.column(j);
                    m.forecast(&col[col.len() - HAR_LAGS..])
                })
                .collect::<Result<Vec<_>>>()?
        }
        Fitted::Varfima(v) => v.forecast(h.values())?,
    };
    Ok(rebuild(h.coord(), values)?.matrix)
}

/// Output of one day: per coordinate system, per model.
type DayOut = Vec<Vec<(ModelId, FitResult<SpdMatrix<f64>>)>>;

fn run_block(ctx: &Ctx, targets: Range<usize>) -> Vec<DayOut> {
    let cfg = ctx.cfg;
    let w = cfg.window;
    let start = targets.start;
    let fit_rows = start - w..start;

    let dcc: Option<FitResult<DccModel>> = ctx.models.contains(&ModelId::DccGarch).then(|| match ctx.returns {
        Some(r) => dcc_fit(&r.row_range(fit_rows.clone())).map_err(|e| e.to_string()),
        None => Err("no daily returns available".to_string()),
    });

    let fits: Vec<CoordFits> = ctx
        .histories
        .iter()
        .map(|h| {
            let seed = derive_seed(cfg.seed, &[start as u64, coord_tag(h.coord())]);
            fit_coord(ctx, &h.window(fit_rows.clone()), seed)
        })
        .collect();

    targets
        .map(|s| {
            let dcc_fc: Option<FitResult<SpdMatrix<f64>>> = dcc.as_ref().map(|d| {
                let d = d.as_ref().map_err(|e| e.clone())?;
                let r = ctx.returns.expect("dcc fit implies returns");
                d.forecast(&r.row_range(s - w..s)).map_err(|e| e.to_string())
            });
            ctx.histories
                .iter()
                .zip(&fits)
                .map(|(h, cf)| {
                    let seed = derive_seed(cfg.seed, &[s as u64, coord_tag(h.coord())]);
                    let hist = h.window(s - w..s);
                    let mut out = Vec::with_capacity(ctx.models.len());
                    let mut fitted = cf.models.iter();
                    for &id in &ctx.models {
                        let fc = if matches!(id.kind(), ModelKind::Dcc) {
                            dcc_fc.clone().expect("dcc configured")
                        } else {
                            let (fid, f) = fitted.next().expect("one fit per model");
                            debug_assert_eq!(*fid, id);
                            match f {
                                Ok(f) => forecast_one(f, &hist, seed).map_err(|e| e.to_string()),
                                Err(e) => Err(e.clone()),
                            }
                        };
                        out.push((id, fc));
                    }
                    out
                })
                .collect()
        })
        .collect()
}

/// Rolling one-day-ahead backtest: for each target day `s ≥ window` every
/// model is fitted on rows `s - window .. s` and forecasts row `s`.
pub fn rolling_backtest(cfg: &BacktestConfig) -> Result<BacktestRun> {
    cfg.validate()?;
    let data = load_dataset(&cfg.data)?;
    rolling_backtest_on(cfg, data)
}

/// [`rolling_backtest`] on an already loaded dataset; `cfg.data` is only
/// echoed.
pub fn rolling_backtest_on(cfg: &BacktestConfig, data: Dataset) -> Result<BacktestRun> {
    cfg.validate()?;
    let clock = Instant::now();
    let t_len = data.series.len();
    let w = cfg.window;
    if t_len <= w {
        return Err(Error::InsufficientData {
            what: "days beyond the estimation window",
            required: w + 1,
            actual: t_len,
        });
    }
    if let Some(r) = &data.returns {
        if r.rows() != t_len || r.cols() != data.series.dim() {
            return Err(Error::Dimension {
                expected: t_len,
                actual: r.rows(),
            });
        }
    }
    let workers = resolve_workers(cfg)?;
    let models = unique_models(&cfg.models);
    let coords = cfg.coord.coords();
    let mut histories = Vec::with_capacity(coords.len());
    for &c in &coords {
        let (h, flagged) = data.series.to_vech(c);
        if flagged > 0 {
            log::warn!("{flagged} realized matrices were repaired when mapping to {c} coordinates");
        }
        histories.push(h);
    }
    let ctx = Ctx {
        cfg,
        models: models.clone(),
        histories,
        returns: data.returns.as_ref(),
    };

    let blocks: Vec<Range<usize>> = (w..t_len)
        .step_by(cfg.refit_every)
        .map(|s| s..(s + cfg.refit_every).min(t_len))
        .collect();
    log::info!(
        "backtest: {} days, window {w}, {} out-of-sample, {} models, {} coordinate systems, {workers} workers",
        t_len,
        t_len - w,
        models.len(),
        coords.len()
    );
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    let days: Vec<DayOut> = pool.install(|| {
        blocks
            .par_iter()
            .flat_map_iter(|b| run_block(&ctx, b.clone()))
            .collect()
    });

    let n_out = t_len - w;
    let dates: Vec<NaiveDate> = data.series.dates()[w..].to_vec();
    let mut coord_runs: Vec<CoordRun> = coords
        .iter()
        .map(|&c| CoordRun {
            coord: c,
            forecasts: models.iter().map(|&m| (m, vec![None; n_out])).collect(),
            failures: Vec::new(),
            gmvp: BTreeMap::new(),
        })
        .collect();
    for (k, day) in days.into_iter().enumerate() {
        for (ci, per_model) in day.into_iter().enumerate() {
            let run = &mut coord_runs[ci];
            for (id, res) in per_model {
                match res {
                    Ok(m) => run.forecasts.get_mut(&id).expect("model slot")[k] = Some(m),
                    Err(message) => {
                        log::warn!("{id} failed for {} on {} ({}): {message}", dates[k], run.coord, k);
                        run.failures.push(ModelFailure {
                            model: id,
                            coord: run.coord,
                            date: dates[k],
                            message,
                        });
                    }
                }
            }
        }
    }

    let realized: Vec<SpdMatrix<f64>> = data.series.mats()[w..].to_vec();
    let returns = data
        .returns
        .as_ref()
        .map(|r| (w..t_len).map(|s| r.row(s).to_vec()).collect::<Vec<_>>());
    let expected = data.returns.as_ref().map(|r| {
        (w..t_len)
            .map(|s| {
                (0..r.cols())
                    .map(|a| (s - w..s).map(|t| r[(t, a)]).sum::<f64>() / w as f64)
                    .collect()
            })
            .collect::<Vec<Vec<f64>>>()
    });

    let report = pool.install(|| {
        evaluate(
            cfg,
            &models,
            &mut coord_runs,
            &realized,
            returns.as_deref(),
            expected.as_deref(),
        )
    })?;
    let elapsed_secs = clock.elapsed().as_secs_f64();
    log::info!("backtest finished in {elapsed_secs:.1}s");
    Ok(BacktestRun {
        config: cfg.clone(),
        assets: data.assets,
        dates,
        realized,
        returns,
        expected,
        coords: coord_runs,
        report,
        elapsed_secs,
        workers,
    })
}
