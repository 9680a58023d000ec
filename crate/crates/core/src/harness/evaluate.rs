use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evalkit::{
    annualize_return, annualize_sd, default_block_len, default_mu_grid, efficient_frontier,
    frobenius_error, mcs, min_variance, stein_loss_with, FrontierPoint, LossKind, LossSeries,
    McsResult,
};
use crate::matxform::{Coord, SpdMatrix};
use crate::rng::derive_seed;

use super::backtest::CoordRun;
use super::config::{BacktestConfig, ModelId};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: ModelId,
    pub n_forecasts: usize,
    pub coverage: f64,
    /// Mean Frobenius error over the model's forecast days.
    pub rmse: Option<f64>,
    pub mean_stein: Option<f64>,
    /// Member of the Stein-loss confidence set; false when left out for
    /// low coverage.
    pub in_mcs_stein: bool,
    pub mcs_pvalue: Option<f64>,
    /// Annualized realized sd of the global minimum variance portfolio, in
    /// percent.
    pub gmvp_sd: Option<f64>,
    /// Annualized realized return of that portfolio, in percent.
    pub gmvp_return: Option<f64>,
    pub in_mcs_gmvp: bool,
    pub mcs_pvalue_gmvp: Option<f64>,
    /// Smallest eigenvalue over all forecasts.
    pub min_eigenvalue: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordReport {
    pub coord: Coord,
    pub n_days: usize,
    /// Days on which every model entering the confidence sets has a
    /// forecast.
    pub common_days: usize,
    pub models: Vec<ModelReport>,
    pub mcs_stein: Option<McsResult>,
    pub mcs_gmvp: Option<McsResult>,
    /// Daily units; the oracle uses the realized matrices.
    pub frontier: Vec<FrontierPoint>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub coords: Vec<CoordReport>,
}

impl EvaluationReport {
    pub fn coord(&self, c: Coord) -> Option<&CoordReport> {
        self.coords.iter().find(|r| r.coord == c)
    }
}

impl CoordReport {
    pub fn model(&self, id: ModelId) -> Option<&ModelReport> {
        self.models.iter().find(|m| m.model == id)
    }
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Losses, confidence sets and portfolio statistics of every coordinate
/// system. Fills `CoordRun::gmvp` as a side product.
pub(super) fn evaluate(
    cfg: &BacktestConfig,
    models: &[ModelId],
    runs: &mut [CoordRun],
    realized: &[SpdMatrix<f64>],
    returns: Option<&[Vec<f64>]>,
    expected: Option<&[Vec<f64>]>,
) -> Result<EvaluationReport> {
    let opts = &cfg.evaluation;
    let n_days = realized.len();
    let mut coords = Vec::with_capacity(runs.len());
    for (ci, run) in runs.iter_mut().enumerate() {
        let mut warnings = Vec::new();
        let mut reports = Vec::with_capacity(models.len());
        let mut stein_by_model = Vec::with_capacity(models.len());
        let mut sd_by_model = Vec::with_capacity(models.len());
        for &id in models {
            let fc = &run.forecasts[&id];
            let stein: Vec<Option<f64>> = fc
                .par_iter()
                .zip(realized)
                .map(|(f, r)| {
                    f.as_ref()
                        .map(|f| stein_loss_with(f, r, opts.stein))
                        .transpose()
                })
                .collect::<Result<_>>()?;
            let gm: Vec<Option<_>> = fc
                .par_iter()
                .map(|f| f.as_ref().map(min_variance).transpose())
                .collect::<Result<_>>()?;
            let sd: Vec<Option<f64>> = gm
                .iter()
                .zip(realized)
                .map(|(g, r)| g.as_ref().map(|g| g.realized_sd(r.as_matrix())))
                .collect();
            let n_fc = fc.iter().flatten().count();
            let gmvp_return = returns.and_then(|rs| {
                mean(gm.iter().zip(rs).filter_map(|(g, r)| g.as_ref().map(|g| g.realized_return(r))))
                    .map(annualize_return)
            });
            reports.push(ModelReport {
                model: id,
                n_forecasts: n_fc,
                coverage: n_fc as f64 / n_days as f64,
                rmse: mean(
                    fc.iter()
                        .zip(realized)
                        .filter_map(|(f, r)| f.as_ref().map(|f| frobenius_error(f.as_matrix(), r.as_matrix()))),
                ),
                mean_stein: mean(stein.iter().flatten().copied()),
                in_mcs_stein: false,
                mcs_pvalue: None,
                gmvp_sd: mean(sd.iter().flatten().copied()).map(annualize_sd),
                gmvp_return,
                in_mcs_gmvp: false,
                mcs_pvalue_gmvp: None,
                min_eigenvalue: fc
                    .iter()
                    .flatten()
                    .map(|f| f.min_eigenvalue())
                    .reduce(f64::min),
            });
            stein_by_model.push(stein);
            sd_by_model.push(sd);
            run.gmvp.insert(id, gm);
        }

        let eligible: Vec<usize> = (0..models.len())
            .filter(|&k| {
                let ok = reports[k].coverage >= opts.min_coverage;
                if !ok {
                    warnings.push(format!(
                        "{} covers {:.1}% of days and is left out of the confidence sets",
                        models[k],
                        100.0 * reports[k].coverage
                    ));
                }
                ok
            })
            .collect();
        let common: Vec<usize> = (0..n_days)
            .filter(|&t| eligible.iter().all(|&k| run.forecasts[&models[k]][t].is_some()))
            .collect();
        for w in &warnings {
            log::warn!("{}: {w}", run.coord);
        }

        let run_mcs = |by_model: &[Vec<Option<f64>>], kind: LossKind, tag: u64| -> Result<Option<McsResult>> {
            if eligible.is_empty() || common.len() < 2 {
                return Ok(None);
            }
            let losses: Vec<LossSeries> = eligible
                .iter()
                .map(|&k| LossSeries {
                    model: models[k].name().to_string(),
                    kind,
                    values: common.iter().map(|&t| by_model[k][t].expect("common day")).collect(),
                })
                .collect();
            let block = opts.block_len.unwrap_or_else(|| default_block_len(common.len()));
            let seed = derive_seed(cfg.seed, &[0x3C5_E7A1, ci as u64, tag]);
            mcs(&losses, opts.alpha, opts.n_boot, block, seed).map(Some)
        };
        let mcs_stein = run_mcs(&stein_by_model, LossKind::Stein, 0)?;
        let mcs_gmvp = run_mcs(&sd_by_model, LossKind::PortfolioSd, 1)?;
        for (set, slot) in [(&mcs_stein, 0), (&mcs_gmvp, 1)] {
            let Some(set) = set else { continue };
            for (pos, &k) in eligible.iter().enumerate() {
                let p = set.p_values[pos];
                let inside = set.retained.iter().any(|m| m == models[k].name());
                let r = &mut reports[k];
                if slot == 0 {
                    r.mcs_pvalue = Some(p);
                    r.in_mcs_stein = inside;
                } else {
                    r.mcs_pvalue_gmvp = Some(p);
                    r.in_mcs_gmvp = inside;
                }
            }
        }

        let frontier = match expected {
            Some(exp) if !common.is_empty() && !eligible.is_empty() => {
                let exp_c: Vec<Vec<f64>> = common.iter().map(|&t| exp[t].clone()).collect();
                let real_c: Vec<SpdMatrix<f64>> = common.iter().map(|&t| realized[t].clone()).collect();
                let fc_c: Vec<(String, Vec<SpdMatrix<f64>>)> = eligible
                    .iter()
                    .map(|&k| {
                        let f = &run.forecasts[&models[k]];
                        (
                            models[k].name().to_string(),
                            common.iter().map(|&t| f[t].clone().expect("common day")).collect(),
                        )
                    })
                    .collect();
                let grid = match &opts.mu_grid {
                    Some(g) => g.clone(),
                    None => default_mu_grid(&exp_c, opts.grid_points),
                };
                efficient_frontier(&fc_c, &real_c, &exp_c, &grid)?
            }
            _ => Vec::new(),
        };
        if expected.is_none() {
            warnings.push("no daily returns: frontier skipped".into());
        }

        coords.push(CoordReport {
            coord: run.coord,
            n_days,
            common_days: common.len(),
            models: reports,
            mcs_stein,
            mcs_gmvp,
            frontier,
            warnings,
        });
    }
    if coords.is_empty() {
        return Err(Error::InvalidArgument("no coordinate systems evaluated".into()));
    }
    Ok(EvaluationReport { coords })
}
