use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate, TimeDelta, Weekday};
use log::{info, warn};
use serde::{Deserialize, Serialize};
use serde_json::json;

use volcop::evalkit::{
    default_block_len, default_mu_grid, efficient_frontier, frobenius_error, mcs, stein_loss_with,
    LossKind, LossSeries, McsResult, SteinOrientation,
};
use volcop::fcopula::{CopulaForecaster, ForecasterJson, LagPanel};
use volcop::harness::{
    io as vio, rolling_backtest, write_outputs, BacktestConfig, ModelId, ModelKind,
};
use volcop::rvest::{estimate_series, simulate_panel, summary_stats, IntradayPanel, SessionGrid, SimConfig};
use volcop::{CovarianceSeries, Error, Result, SpdMatrix};

use crate::{
    BacktestArgs, EstimateArgs, FitArgs, ForecastArgs, Format, FrontierArgs, HeatmapArgs, ReportArgs,
    SimulateArgs, StatsArgs,
};

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// File when given, standard output otherwise.
fn sink(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_series(path: &Path) -> Result<CovarianceSeries> {
    vio::read_covariance_csv(open(path)?)
}

fn tail(series: &CovarianceSeries, window: Option<usize>) -> Result<CovarianceSeries> {
    match window {
        None => Ok(series.clone()),
        Some(w) if w == 0 || w > series.len() => Err(Error::InsufficientData {
            what: "window days",
            required: w.max(1),
            actual: series.len(),
        }),
        Some(w) => Ok(series.slice(series.len() - w..series.len())),
    }
}

fn parse_duration(s: &str) -> Result<TimeDelta> {
    let d = humantime::parse_duration(s)
        .map_err(|e| Error::InvalidArgument(format!("bad duration {s:?}: {e}")))?;
    let d = TimeDelta::from_std(d).map_err(|_| Error::InvalidArgument(format!("duration {s:?} out of range")))?;
    if d <= TimeDelta::zero() {
        return Err(Error::InvalidArgument(format!("duration {s:?} must be positive")));
    }
    Ok(d)
}

fn next_weekday(d: NaiveDate) -> NaiveDate {
    let mut n = d.succ_opt().expect("date in range");
    while matches!(n.weekday(), Weekday::Sat | Weekday::Sun) {
        n = n.succ_opt().expect("date in range");
    }
    n
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let mut cfg: SimConfig = match &a.config {
        Some(p) => serde_json::from_reader(open(p)?)?,
        None => SimConfig::default(),
    };
    if let Some(v) = a.assets {
        cfg.assets = v;
    }
    if let Some(v) = a.days {
        cfg.days = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.intervals {
        cfg.intervals = v;
    }
    let sim = simulate_panel(&cfg)?;
    fs::create_dir_all(&a.out)?;
    let mut w = create(&a.out.join("intraday.csv"))?;
    vio::write_intraday_csv(&sim.panel, &mut w)?;
    w.flush()?;
    let mut w = create(&a.out.join("covariance.csv"))?;
    vio::write_covariance_csv(&sim.integrated, &mut w)?;
    w.flush()?;
    let mut w = create(&a.out.join("returns.csv"))?;
    vio::write_returns_csv(sim.panel.days(), &sim.panel.daily_returns(), &mut w)?;
    w.flush()?;
    info!(
        "simulated {} assets over {} days into {}",
        cfg.assets,
        cfg.days,
        a.out.display()
    );
    Ok(())
}

pub fn estimate(a: EstimateArgs) -> Result<()> {
    let ticks = vio::read_intraday_csv(open(&a.input)?)?;
    let grid = match &a.align {
        Some(s) => Some(SessionGrid {
            step: parse_duration(s)?,
            ..SessionGrid::default()
        }),
        None => None,
    };
    let panel = IntradayPanel::from_ticks(&ticks, grid)?;
    let spacing = panel
        .tick_spacing()
        .ok_or_else(|| Error::Parse("intraday grid is not regularly spaced; use --align".into()))?;
    let step = parse_duration(&a.step)?;
    let ratio = step.num_milliseconds() as f64 / spacing.num_milliseconds() as f64;
    if ratio < 1.0 || (ratio - ratio.round()).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "step {} is not a multiple of the tick spacing of {}s",
            a.step,
            spacing.num_seconds()
        )));
    }
    let series = estimate_series(&panel, ratio.round() as usize, a.subgrids)?;
    let mut w = sink(a.out.as_ref())?;
    vio::write_covariance_csv(&series, &mut w)?;
    w.flush()?;
    if let Some(p) = &a.returns_out {
        let mut w = create(p)?;
        vio::write_returns_csv(panel.days(), &panel.daily_returns(), &mut w)?;
        w.flush()?;
    }
    info!("estimated {} daily matrices", series.len());
    Ok(())
}

pub fn stats(a: StatsArgs) -> Result<()> {
    let series = read_series(&a.input)?;
    let n = series.dim();
    let assets = match a.assets {
        Some(v) if v.len() != n => {
            return Err(Error::InvalidArgument(format!(
                "{} asset names for {n} assets",
                v.len()
            )))
        }
        Some(v) => v,
        None => (1..=n).map(|k| format!("A{k}")).collect(),
    };
    let mut rows = Vec::new();
    for coord in a.coord.coords() {
        let (h, flagged) = series.to_vech(coord);
        if flagged > 0 {
            warn!("{flagged} matrices needed repair in {coord} coordinates");
        }
        for k in 0..h.width() {
            rows.push((coord.name(), vio::element_label(&assets, k), summary_stats(&h.column(k))?));
        }
    }
    let mut w = sink(a.out.as_ref())?;
    vio::write_stats_csv(rows.iter().map(|(c, e, s)| (*c, e.clone(), s)), &mut w)?;
    w.flush()?;
    Ok(())
}

/// Saved output of `fit`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SavedModel {
    model: ModelId,
    /// Days of history the model was fitted on.
    window: usize,
    last_date: NaiveDate,
    forecaster: ForecasterJson,
}

pub fn fit(a: FitArgs) -> Result<()> {
    let model: ModelId = a.model.parse()?;
    let ModelKind::Copula(approach, family) = model.kind() else {
        return Err(Error::InvalidArgument(format!(
            "{model} is a benchmark; only copula models can be fitted and saved"
        )));
    };
    let series = tail(&read_series(&a.input)?, a.window)?;
    let (h, _) = series.to_vech(a.coord);
    let panel = LagPanel::new(&h)?;
    let f = CopulaForecaster::fit(&panel, approach, family, a.draws, a.seed)?;
    for (j, w) in f.warnings() {
        warn!("coordinate {j}: {w:?}");
    }
    let saved = SavedModel {
        model,
        window: series.len(),
        last_date: *series.dates().last().expect("non-empty series"),
        forecaster: f.to_json(),
    };
    let mut w = create(&a.out)?;
    serde_json::to_writer_pretty(&mut w, &saved)?;
    writeln!(w)?;
    w.flush()?;
    info!("fitted {model} on {} days ending {}", saved.window, saved.last_date);
    Ok(())
}

pub fn forecast(a: ForecastArgs) -> Result<()> {
    let saved: SavedModel = serde_json::from_reader(open(&a.model)?)?;
    let series = read_series(&a.input)?;
    let end = series
        .dates()
        .iter()
        .position(|d| *d == saved.last_date)
        .ok_or_else(|| Error::UnknownDay(saved.last_date.to_string()))?;
    if end + 1 < saved.window {
        return Err(Error::InsufficientData {
            what: "history before the model's last date",
            required: saved.window,
            actual: end + 1,
        });
    }
    let hist = series.slice(end + 1 - saved.window..end + 1);
    let (h, _) = hist.to_vech(saved.forecaster.coord);
    let panel = LagPanel::new(&h)?;
    let f = CopulaForecaster::from_json(&panel, saved.forecaster)?;
    let fc = f.forecast(&h)?;
    if fc.repaired {
        warn!("forecast needed a Cholesky diagonal repair");
    }
    let date = a.date.unwrap_or_else(|| next_weekday(saved.last_date));
    let mut w = sink(a.out.as_ref())?;
    vio::write_forecasts_csv(
        [vio::ForecastRow {
            date,
            model: saved.model.name(),
            matrix: fc.matrix.as_matrix(),
        }],
        &mut w,
    )?;
    w.flush()?;
    Ok(())
}

pub fn backtest(a: BacktestArgs) -> Result<()> {
    let text = fs::read_to_string(&a.config).map_err(|e| {
        Error::Io(io::Error::new(e.kind(), format!("{}: {e}", a.config.display())))
    })?;
    let mut cfg = BacktestConfig::from_json(&text)?;
    let base = a.config.parent().unwrap_or(Path::new("."));
    cfg.resolve_paths(base);
    if a.workers.is_some() {
        cfg.workers = a.workers;
    }
    let run = rolling_backtest(&cfg)?;
    for c in &run.coords {
        for f in &c.failures {
            warn!("{} ({}) failed on {}: {}", f.model, f.coord, f.date, f.message);
        }
    }
    for c in &run.report.coords {
        for w in &c.warnings {
            warn!("{}: {w}", c.coord);
        }
    }
    let files = write_outputs(&run, &a.out)?;
    info!(
        "backtest of {} days finished in {:.1}s on {} workers; report at {}",
        run.dates.len(),
        run.elapsed_secs,
        run.workers,
        files.report.display()
    );
    Ok(())
}

/// Forecast series of every model aligned to the realized series, with the
/// days on which all models have a forecast.
struct Aligned {
    realized: CovarianceSeries,
    /// Per model, realized-series index of each forecast.
    models: Vec<(String, CovarianceSeries, Vec<usize>)>,
    common: Vec<usize>,
}

fn align(forecasts: &Path, realized: &Path) -> Result<Aligned> {
    let fc = vio::read_forecasts_csv(open(forecasts)?)?;
    let realized = read_series(realized)?;
    if fc.is_empty() {
        return Err(Error::InsufficientData {
            what: "models in the forecast file",
            required: 1,
            actual: 0,
        });
    }
    let index: BTreeMap<NaiveDate, usize> =
        realized.dates().iter().enumerate().map(|(k, d)| (*d, k)).collect();
    let mut models = Vec::new();
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for (name, s) in fc {
        if s.dim() != realized.dim() {
            return Err(Error::Dimension {
                expected: realized.dim(),
                actual: s.dim(),
            });
        }
        let idx = s
            .dates()
            .iter()
            .map(|d| index.get(d).copied().ok_or_else(|| Error::UnknownDay(d.to_string())))
            .collect::<Result<Vec<_>>>()?;
        for &k in &idx {
            *counts.entry(k).or_default() += 1;
        }
        models.push((name, s, idx));
    }
    let common = counts
        .into_iter()
        .filter(|&(_, c)| c == models.len())
        .map(|(k, _)| k)
        .collect();
    Ok(Aligned {
        realized,
        models,
        common,
    })
}

/// Forecasts of one model on the common days.
fn on_common(al: &Aligned, s: &CovarianceSeries, idx: &[usize]) -> Vec<SpdMatrix> {
    let pos: BTreeMap<usize, usize> = idx.iter().enumerate().map(|(p, k)| (*k, p)).collect();
    al.common.iter().map(|k| s.get(pos[k]).clone()).collect()
}

#[derive(Serialize)]
struct ModelSummary {
    model: String,
    n_forecasts: usize,
    rmse: f64,
    mean_stein: f64,
    in_mcs: bool,
    mcs_pvalue: f64,
}

pub fn report(a: ReportArgs) -> Result<()> {
    let al = align(&a.forecasts, &a.realized)?;
    if al.common.is_empty() {
        return Err(Error::InsufficientData {
            what: "days common to all models",
            required: 1,
            actual: 0,
        });
    }
    let orientation = if a.literal_stein {
        SteinOrientation::Literal
    } else {
        SteinOrientation::Property
    };
    let mut losses = Vec::new();
    let mut rows = Vec::new();
    for (name, s, idx) in &al.models {
        let mut frob = 0.0;
        let mut stein = 0.0;
        for (p, &k) in idx.iter().enumerate() {
            let r = al.realized.get(k);
            frob += frobenius_error(s.get(p).as_matrix(), r.as_matrix());
            stein += stein_loss_with(s.get(p), r, orientation)?;
        }
        let common = on_common(&al, s, idx);
        let values = common
            .iter()
            .zip(&al.common)
            .map(|(f, &k)| stein_loss_with(f, al.realized.get(k), orientation))
            .collect::<Result<Vec<_>>>()?;
        losses.push(LossSeries {
            model: name.clone(),
            kind: LossKind::Stein,
            values,
        });
        rows.push(ModelSummary {
            model: name.clone(),
            n_forecasts: idx.len(),
            rmse: frob / idx.len() as f64,
            mean_stein: stein / idx.len() as f64,
            in_mcs: false,
            mcs_pvalue: f64::NAN,
        });
    }
    let block = a.block_len.unwrap_or_else(|| default_block_len(al.common.len()));
    let set: McsResult = mcs(&losses, a.alpha, a.n_boot, block, a.seed)?;
    for (r, p) in rows.iter_mut().zip(&set.p_values) {
        r.mcs_pvalue = *p;
        r.in_mcs = set.retained.contains(&r.model);
    }
    let mut w = sink(a.out.as_ref())?;
    match a.format {
        Format::Json => {
            let doc = json!({
                "common_days": al.common.len(),
                "models": rows,
                "mcs": set,
            });
            serde_json::to_writer_pretty(&mut w, &doc)?;
            writeln!(w)?;
        }
        Format::Csv => {
            let mut wtr = csv::Writer::from_writer(&mut w);
            wtr.write_record(["model", "n_forecasts", "rmse", "mean_stein", "in_mcs", "mcs_pvalue"])?;
            for r in &rows {
                wtr.write_record([
                    r.model.clone(),
                    r.n_forecasts.to_string(),
                    r.rmse.to_string(),
                    r.mean_stein.to_string(),
                    r.in_mcs.to_string(),
                    r.mcs_pvalue.to_string(),
                ])?;
            }
            wtr.flush()?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn frontier(a: FrontierArgs) -> Result<()> {
    let al = align(&a.forecasts, &a.realized)?;
    let n = al.realized.dim();
    let returns = vio::read_returns_csv(open(&a.returns)?, al.realized.dates(), n)?;
    if a.window == 0 {
        return Err(Error::InvalidArgument("window must be at least 1".into()));
    }
    let mut days = Vec::new();
    let mut expected = Vec::new();
    for &k in &al.common {
        if k < a.window {
            continue;
        }
        let mean = (0..n)
            .map(|c| (k - a.window..k).map(|t| returns[(t, c)]).sum::<f64>() / a.window as f64)
            .collect();
        days.push(k);
        expected.push(mean);
    }
    if days.is_empty() {
        return Err(Error::InsufficientData {
            what: "forecast days with a full return window",
            required: 1,
            actual: 0,
        });
    }
    if days.len() < al.common.len() {
        warn!("{} days lack a full return window and are skipped", al.common.len() - days.len());
    }
    let keep: Vec<usize> = al.common.iter().enumerate().filter(|(_, k)| **k >= a.window).map(|(p, _)| p).collect();
    let forecasts: Vec<(String, Vec<SpdMatrix>)> = al
        .models
        .iter()
        .map(|(name, s, idx)| {
            let all = on_common(&al, s, idx);
            (name.clone(), keep.iter().map(|&p| all[p].clone()).collect())
        })
        .collect();
    let realized: Vec<SpdMatrix> = days.iter().map(|&k| al.realized.get(k).clone()).collect();
    let grid = default_mu_grid(&expected, a.points);
    let points = efficient_frontier(&forecasts, &realized, &expected, &grid)?;
    let mut w = sink(a.out.as_ref())?;
    vio::write_frontier_csv(&points, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn heatmap(a: HeatmapArgs) -> Result<()> {
    let series = tail(&read_series(&a.input)?, a.window)?;
    if series.len() < 3 {
        return Err(Error::InsufficientData {
            what: "days for rank correlations",
            required: 3,
            actual: series.len(),
        });
    }
    let (h, _) = series.to_vech(a.coord);
    let rho = volcop::evalkit::rank_corr_matrix(&h);
    let mut w = sink(a.out.as_ref())?;
    vio::write_rank_csv(&rho, &mut w)?;
    w.flush()?;
    Ok(())
}
