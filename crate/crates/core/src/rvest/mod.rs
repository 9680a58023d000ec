//! Realized covariance estimation from intraday prices, a synthetic intraday
//! generator and descriptive statistics.

mod panel;
mod simulate;
mod stats;

pub use panel::{
    realized_cov, subsampled_realized_cov, IntradayPanel, RealizedCov, SessionGrid, Tick,
};
pub use simulate::{business_days, simulate_panel, SimConfig, SimulatedPanel, VolParams};
pub use stats::{hurst_rs, summary_stats, SummaryStats, HURST_MIN_LEN};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::series::CovarianceSeries;

/// Subsampled realized covariance of every day in the panel. Fails on the
/// first day whose estimate is singular.
pub fn estimate_series<T: Real>(
    panel: &IntradayPanel<T>,
    base_step: usize,
    subgrids: usize,
) -> Result<CovarianceSeries<T>> {
    use rayon::prelude::*;
    let mats = (0..panel.days().len())
        .into_par_iter()
        .map(|d| {
            let rc = panel::subsampled_at(panel, d, base_step, subgrids)?;
            if rc.singular {
                return Err(Error::NotSpd(format!(
                    "realized covariance of {} is singular",
                    panel.days()[d]
                )));
            }
            crate::matxform::SpdMatrix::new(rc.matrix)
        })
        .collect::<Result<Vec<_>>>()?;
    CovarianceSeries::new(panel.days().to_vec(), mats)
}
