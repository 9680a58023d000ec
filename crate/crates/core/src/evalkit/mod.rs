//! Forecast evaluation: Frobenius RMSE, Stein loss, the model confidence
//! set, long-only minimum variance portfolios and rank correlations.

mod loss;
mod mcs;
mod portfolio;
mod rank;

pub use loss::{
    frobenius_error, frobenius_rmse, stein_loss, stein_loss_with, LossKind, LossSeries,
    SteinOrientation,
};
pub use mcs::{default_block_len, mcs, McsResult, DEFAULT_N_BOOT};
pub use portfolio::{
    annualize_return, annualize_sd, default_mu_grid, efficient_frontier, gmvp, gmvp_summary,
    min_variance, FrontierPoint, GmvpResult, GmvpSummary, DEFAULT_GRID_POINTS, ORACLE,
    TRADING_DAYS,
};
pub use rank::{rank_corr_matrix, spearman_matrix};
