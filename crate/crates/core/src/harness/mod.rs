//! Rolling-window backtests: configuration, data sources, orchestration on
//! a bounded worker pool, evaluation and file output.

mod backtest;
mod config;
mod evaluate;
pub mod io;
mod output;
mod synth;

pub use backtest::{
    load_dataset, panel_dataset, resolve_workers, rolling_backtest, rolling_backtest_on,
    BacktestRun, CoordRun, Dataset, ModelFailure, WORKERS_ENV,
};
pub use config::{
    BacktestConfig, CoordChoice, DataSource, EvalOptions, ModelId, ModelKind, MIN_WINDOW,
};
pub use evaluate::{CoordReport, EvaluationReport, ModelReport};
pub use output::{write_outputs, OutputFiles, RunReport};
pub use synth::{MarkovTData, MarkovTSpec};
