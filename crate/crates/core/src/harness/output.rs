use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::Serialize;

use crate::error::Result;
use crate::matxform::Coord;

use super::backtest::{BacktestRun, ModelFailure};
use super::config::BacktestConfig;
use super::evaluate::CoordReport;
use super::io::{self, ForecastRow};

/// The report JSON: config echo, run metadata and per-coordinate
/// evaluation.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport<'a> {
    pub config: &'a BacktestConfig,
    pub assets: &'a [String],
    pub first_target: Option<NaiveDate>,
    pub last_target: Option<NaiveDate>,
    pub out_of_sample_days: usize,
    pub workers: usize,
    pub elapsed_secs: f64,
    pub coords: &'a [CoordReport],
    pub failures: Vec<&'a ModelFailure>,
}

impl BacktestRun {
    pub fn run_report(&self) -> RunReport<'_> {
        RunReport {
            config: &self.config,
            assets: &self.assets,
            first_target: self.dates.first().copied(),
            last_target: self.dates.last().copied(),
            out_of_sample_days: self.dates.len(),
            workers: self.workers,
            elapsed_secs: self.elapsed_secs,
            coords: &self.report.coords,
            failures: self.coords.iter().flat_map(|c| &c.failures).collect(),
        }
    }

    /// Forecast CSV of one coordinate system, rows by date then model in
    /// configuration order.
    pub fn write_forecasts(&self, coord: Coord, w: impl Write) -> Result<()> {
        let run = self.coord_run(coord);
        let models = self.models();
        let rows = self.dates.iter().enumerate().flat_map(|(t, d)| {
            models.iter().filter_map(move |id| {
                run.and_then(|r| r.forecasts[id][t].as_ref()).map(|m| ForecastRow {
                    date: *d,
                    model: id.name(),
                    matrix: m.as_matrix(),
                })
            })
        });
        io::write_forecasts_csv(rows, w)
    }

    pub fn write_gmvp(&self, coord: Coord, w: impl Write) -> Result<()> {
        let run = self.coord_run(coord);
        let models = self.models();
        let rows = self.dates.iter().enumerate().flat_map(|(t, d)| {
            models.iter().filter_map(move |id| {
                run.and_then(|r| r.gmvp.get(id))
                    .and_then(|g| g[t].as_ref())
                    .map(|g| (*d, id.name(), g))
            })
        });
        io::write_gmvp_csv(rows, w)
    }

    pub fn write_frontier(&self, coord: Coord, w: impl Write) -> Result<()> {
        let pts = self
            .report
            .coord(coord)
            .map(|r| r.frontier.as_slice())
            .unwrap_or(&[]);
        io::write_frontier_csv(pts, w)
    }
}

/// Paths written by [`write_outputs`].
#[derive(Clone, Debug, Default, Serialize)]
pub struct OutputFiles {
    pub report: PathBuf,
    pub forecasts: Vec<PathBuf>,
    pub frontier: Vec<PathBuf>,
    pub gmvp: Vec<PathBuf>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes `report.json` plus `forecasts_<coord>.csv`,
/// `frontier_<coord>.csv` and `gmvp_<coord>.csv` into `dir`.
pub fn write_outputs(run: &BacktestRun, dir: &Path) -> Result<OutputFiles> {
    std::fs::create_dir_all(dir)?;
    let mut out = OutputFiles {
        report: dir.join("report.json"),
        ..OutputFiles::default()
    };
    let mut w = create(&out.report)?;
    serde_json::to_writer_pretty(&mut w, &run.run_report())?;
    writeln!(w)?;
    w.flush()?;
    for c in &run.coords {
        let name = c.coord.name();
        let f = dir.join(format!("forecasts_{name}.csv"));
        run.write_forecasts(c.coord, create(&f)?)?;
        out.forecasts.push(f);
        let f = dir.join(format!("frontier_{name}.csv"));
        run.write_frontier(c.coord, create(&f)?)?;
        out.frontier.push(f);
        let f = dir.join(format!("gmvp_{name}.csv"));
        run.write_gmvp(c.coord, create(&f)?)?;
        out.gmvp.push(f);
    }
    Ok(out)
}
