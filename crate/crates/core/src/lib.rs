//! Realized covariance modeling and forecasting with copula-based time
//! series models, plus benchmark forecasters and forecast evaluation.

pub mod benchmod;
pub mod copulae;
pub mod error;
pub mod evalkit;
pub mod fcopula;
pub mod harness;
pub mod linalg;
pub mod margins;
pub mod matxform;
pub mod optim;
pub mod rng;
pub mod rvest;
pub mod scalar;
pub mod series;

pub use error::{Error, ErrorClass, Result};
pub use matxform::{Coord, Flagged};
pub use scalar::Real;

pub type Matrix = linalg::Matrix<f64>;
pub type MatrixF32 = linalg::Matrix<f32>;
pub type SpdMatrix = matxform::SpdMatrix<f64>;
pub type SpdMatrixF32 = matxform::SpdMatrix<f32>;
pub type VechVector = matxform::VechVector<f64>;
pub type VechVectorF32 = matxform::VechVector<f32>;
pub type CovarianceSeries = series::CovarianceSeries<f64>;
pub type VechHistory = series::VechHistory<f64>;
pub type IntradayPanel = rvest::IntradayPanel<f64>;
