//! `volcop`: realized covariance estimation, copula forecasting and
//! backtest evaluation from the command line.

mod commands;
mod logging;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use volcop::{Error, ErrorClass};

#[derive(Parser, Debug)]
#[command(name = "volcop", version, about = "Copula forecasting of realized covariance matrices")]
struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Only log errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum CoordArg {
    Cholesky,
    Logmatrix,
    Both,
}

impl CoordArg {
    pub fn coords(self) -> Vec<volcop::Coord> {
        match self {
            CoordArg::Cholesky => vec![volcop::Coord::Cholesky],
            CoordArg::Logmatrix => vec![volcop::Coord::LogMatrix],
            CoordArg::Both => vec![volcop::Coord::Cholesky, volcop::Coord::LogMatrix],
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate an intraday panel; writes intraday.csv, covariance.csv (true
    /// integrated covariance) and returns.csv.
    Simulate(SimulateArgs),
    /// Realized covariance series from intraday log prices.
    Estimate(EstimateArgs),
    /// Descriptive statistics of the vech coordinates of a covariance series.
    Stats(StatsArgs),
    /// Fit one copula forecaster and save it as JSON.
    Fit(FitArgs),
    /// One-day-ahead forecast from a saved model.
    Forecast(ForecastArgs),
    /// Rolling-window backtest from a JSON config.
    Backtest(BacktestArgs),
    /// Losses and model confidence sets of a forecast CSV.
    Report(ReportArgs),
    /// Efficient frontiers of a forecast CSV, with the oracle frontier.
    Frontier(FrontierArgs),
    /// Spearman correlations of the stacked lagged vech coordinates.
    HeatmapData(HeatmapArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Number of assets [default: 6].
    #[arg(long)]
    pub assets: Option<usize>,
    /// Trading days [default: 300].
    #[arg(long)]
    pub days: Option<usize>,
    /// [default: 1]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Intraday intervals per day.
    #[arg(long)]
    pub intervals: Option<usize>,
    /// JSON simulator settings; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    /// Intraday CSV `timestamp,symbol,logprice`.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Sampling step, e.g. `5min`, `30s`, `1h`.
    #[arg(long, default_value = "5min")]
    pub step: String,
    /// Number of offset subgrids averaged.
    #[arg(long, default_value_t = 1)]
    pub subgrids: usize,
    /// Align each asset by previous tick to a session grid with this spacing.
    #[arg(long)]
    pub align: Option<String>,
    /// Covariance-series CSV; standard output when omitted.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Also write close-to-close daily returns.
    #[arg(long)]
    pub returns_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    /// Covariance-series CSV.
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    pub coord: CoordArg,
    /// Comma-separated asset names used in the element labels.
    #[arg(long, value_delimiter = ',')]
    pub assets: Option<Vec<String>>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Covariance-series CSV.
    #[arg(long, short)]
    pub input: PathBuf,
    /// One of the copula models, e.g. `T-1`, `CL-2`, `Entry-GB`, `T-HAR`.
    #[arg(long, short)]
    pub model: String,
    /// `cholesky` or `logmatrix`.
    #[arg(long, default_value = "cholesky")]
    pub coord: volcop::Coord,
    /// Use only the last N days.
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long, default_value_t = volcop::fcopula::DEFAULT_DRAWS)]
    pub draws: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ForecastArgs {
    /// Model JSON written by `fit`.
    #[arg(long)]
    pub model: PathBuf,
    /// Covariance-series CSV containing the fitting window.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Date written on the forecast; the next weekday by default.
    #[arg(long)]
    pub date: Option<chrono::NaiveDate>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BacktestArgs {
    #[arg(long, short)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long, short, default_value = "backtest-out")]
    pub out: PathBuf,
    /// Worker threads, overriding the config and VOLCOP_WORKERS.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Forecast CSV `date,model,i,j,value`.
    #[arg(long)]
    pub forecasts: PathBuf,
    /// Realized covariance-series CSV.
    #[arg(long)]
    pub realized: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = volcop::evalkit::DEFAULT_N_BOOT)]
    pub n_boot: usize,
    #[arg(long)]
    pub block_len: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Stein loss with the realized matrix on the inverted side.
    #[arg(long)]
    pub literal_stein: bool,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FrontierArgs {
    #[arg(long)]
    pub forecasts: PathBuf,
    #[arg(long)]
    pub realized: PathBuf,
    /// Daily returns CSV `date,asset,return` covering the window before
    /// the first forecast.
    #[arg(long)]
    pub returns: PathBuf,
    /// Days in the trailing mean used as expected returns.
    #[arg(long)]
    pub window: usize,
    #[arg(long, default_value_t = volcop::evalkit::DEFAULT_GRID_POINTS)]
    pub points: usize,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct HeatmapArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    /// `cholesky` or `logmatrix`.
    #[arg(long, default_value = "cholesky")]
    pub coord: volcop::Coord,
    /// Use only the last N days.
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Usage => 1,
        ErrorClass::Data => 2,
        ErrorClass::Numerical => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    logging::init(cli.verbose, cli.quiet);
    let res = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Estimate(a) => commands::estimate(a),
        Command::Stats(a) => commands::stats(a),
        Command::Fit(a) => commands::fit(a),
        Command::Forecast(a) => commands::forecast(a),
        Command::Backtest(a) => commands::backtest(a),
        Command::Report(a) => commands::report(a),
        Command::Frontier(a) => commands::frontier(a),
        Command::HeatmapData(a) => commands::heatmap(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            logging::error(&e.to_string());
            ExitCode::from(exit_code(&e))
        }
    }
}
