//! Benchmark forecasters: HAR per vech coordinate, scalar-operator
//! VARFIMA(1, d, 1) on the vech vector, and DCC-GARCH(1,1) on daily returns.

mod dcc;
mod har;
mod varfima;

pub use dcc::{dcc_fit, dcc_forecast, garch_fit, DccModel, DccWarning, GarchParams, DCC_MIN_LEN};
pub use har::{har_fit, har_forecast, HarModel, HAR_LAGS, HAR_MIN_LEN};
pub use varfima::{
    fracdiff_coeffs, varfima_fit, varfima_fit_with, varfima_forecast, varfima_residuals,
    VarfimaModel, VarfimaOptions, ARMA_BOUND, DEFAULT_TRUNC, D_BOUNDS,
};
