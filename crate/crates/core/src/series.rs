//! Dated series of covariance matrices and of their vech coordinates.

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::matxform::{self, vech_dim, vech_len, Coord, SpdMatrix, VechVector};
use crate::scalar::Real;

/// One SPD matrix per date, constant dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceSeries<T> {
    dates: Vec<NaiveDate>,
    mats: Vec<SpdMatrix<T>>,
}

impl<T: Real> CovarianceSeries<T> {
    pub fn new(dates: Vec<NaiveDate>, mats: Vec<SpdMatrix<T>>) -> Result<Self> {
        if dates.len() != mats.len() {
            return Err(Error::Dimension {
                expected: dates.len(),
                actual: mats.len(),
            });
        }
        if let Some(first) = mats.first() {
            let n = first.dim();
            if let Some(bad) = mats.iter().find(|m| m.dim() != n) {
                return Err(Error::Dimension {
                    expected: n,
                    actual: bad.dim(),
                });
            }
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Parse("dates are not strictly increasing".into()));
        }
        Ok(Self { dates, mats })
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    /// Matrix dimension `n` (0 for an empty series).
    pub fn dim(&self) -> usize {
        self.mats.first().map_or(0, SpdMatrix::dim)
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn mats(&self) -> &[SpdMatrix<T>] {
        &self.mats
    }

    pub fn get(&self, t: usize) -> &SpdMatrix<T> {
        &self.mats[t]
    }

    /// Converts every matrix into vech coordinates. The second value counts
    /// matrices whose transform raised a repair flag.
    pub fn to_vech(&self, coord: Coord) -> (VechHistory<T>, usize) {
        let m = vech_len(self.dim());
        let mut data = Vec::with_capacity(self.len() * m);
        let mut flagged = 0;
        for g in &self.mats {
            let v = matxform::to_vech(g, coord);
            flagged += usize::from(v.flagged);
            data.extend_from_slice(v.value.values());
        }
        let hist = VechHistory {
            coord,
            dates: self.dates.clone(),
            values: Matrix::from_row_major(self.len(), m, data),
        };
        (hist, flagged)
    }

    /// Sub-series on `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            dates: self.dates[range.clone()].to_vec(),
            mats: self.mats[range].to_vec(),
        }
    }
}

/// `T × m` history of vech coordinates, one row per date.
#[derive(Clone, Debug, PartialEq)]
pub struct VechHistory<T> {
    coord: Coord,
    dates: Vec<NaiveDate>,
    values: Matrix<T>,
}

impl<T: Real> VechHistory<T> {
    pub fn new(coord: Coord, dates: Vec<NaiveDate>, values: Matrix<T>) -> Result<Self> {
        if dates.len() != values.rows() {
            return Err(Error::Dimension {
                expected: dates.len(),
                actual: values.rows(),
            });
        }
        if values.cols() == 0 || vech_dim(values.cols()).is_none() {
            return Err(Error::InvalidArgument(format!(
                "{} columns is not a vech length",
                values.cols()
            )));
        }
        if !values.is_finite() {
            return Err(Error::InvalidArgument("non-finite vech entry".into()));
        }
        Ok(Self {
            coord,
            dates,
            values,
        })
    }

    pub fn coord(&self) -> Coord {
        self.coord
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &Matrix<T> {
        &self.values
    }

    /// Number of observations `T`.
    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.rows() == 0
    }

    /// Vech length `m`.
    pub fn width(&self) -> usize {
        self.values.cols()
    }

    /// Matrix dimension `n`.
    pub fn dim(&self) -> usize {
        vech_dim(self.width()).expect("validated")
    }

    pub fn row(&self, t: usize) -> &[T] {
        self.values.row(t)
    }

    pub fn last(&self) -> &[T] {
        self.values.row(self.len() - 1)
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        self.values.column(j)
    }

    pub fn last_vech(&self) -> VechVector<T> {
        VechVector::new(self.coord, self.last().to_vec()).expect("validated width")
    }

    /// Rows `range` as a new history.
    pub fn window(&self, range: std::ops::Range<usize>) -> Self {
        let m = self.width();
        let data = self.values.as_slice()[range.start * m..range.end * m].to_vec();
        Self {
            coord: self.coord,
            dates: self.dates[range.clone()].to_vec(),
            values: Matrix::from_row_major(range.len(), m, data),
        }
    }
}
