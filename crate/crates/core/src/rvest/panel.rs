use chrono::{NaiveDate, NaiveDateTime, NaiveTime, TimeDelta};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::matxform::SpdMatrix;
use crate::scalar::Real;

/// Intraday log prices on a common per-day grid `τ_0 < … < τ_M`.
#[derive(Clone, Debug, PartialEq)]
pub struct IntradayPanel<T> {
    assets: Vec<String>,
    days: Vec<NaiveDate>,
    grids: Vec<Vec<NaiveDateTime>>,
    // one (M+1) × n block per day
    prices: Vec<Matrix<T>>,
}

/// One observation of the long intraday format.
#[derive(Clone, Debug, PartialEq)]
pub struct Tick<T> {
    pub timestamp: NaiveDateTime,
    pub symbol: String,
    pub logprice: T,
}

/// Regular session grid used for previous-tick alignment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SessionGrid {
    pub open: NaiveTime,
    pub close: NaiveTime,
    pub step: TimeDelta,
}

impl Default for SessionGrid {
    fn default() -> Self {
        Self {
            open: NaiveTime::from_hms_opt(9, 30, 0).unwrap(),
            close: NaiveTime::from_hms_opt(16, 0, 0).unwrap(),
            step: TimeDelta::minutes(5),
        }
    }
}

impl SessionGrid {
    fn points(&self, day: NaiveDate) -> Vec<NaiveDateTime> {
        let mut out = Vec::new();
        let mut t = day.and_time(self.open);
        let end = day.and_time(self.close);
        while t <= end {
            out.push(t);
            t += self.step;
        }
        out
    }
}

impl<T: Real> IntradayPanel<T> {
    pub fn new(
        assets: Vec<String>,
        days: Vec<NaiveDate>,
        grids: Vec<Vec<NaiveDateTime>>,
        prices: Vec<Matrix<T>>,
    ) -> Result<Self> {
        let n = assets.len();
        if n == 0 {
            return Err(Error::InvalidArgument("panel has no assets".into()));
        }
        if days.is_empty() {
            return Err(Error::InsufficientData {
                what: "intraday panel days",
                required: 1,
                actual: 0,
            });
        }
        if grids.len() != days.len() || prices.len() != days.len() {
            return Err(Error::Dimension {
                expected: days.len(),
                actual: grids.len().min(prices.len()),
            });
        }
        if days.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Parse("days are not strictly increasing".into()));
        }
        let points = grids[0].len();
        if points < 2 {
            return Err(Error::InsufficientData {
                what: "intraday grid points",
                required: 2,
                actual: points,
            });
        }
        for (d, (grid, block)) in days.iter().zip(grids.iter().zip(&prices)) {
            if grid.len() != points {
                return Err(Error::Parse(format!(
                    "day {d} has {} grid points, expected {points}",
                    grid.len()
                )));
            }
            if grid.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Parse(format!(
                    "grid of day {d} is not strictly increasing"
                )));
            }
            if block.rows() != points || block.cols() != n {
                return Err(Error::Dimension {
                    expected: points * n,
                    actual: block.rows() * block.cols(),
                });
            }
            if !block.is_finite() {
                return Err(Error::Parse(format!(
                    "missing or non-finite price on day {d}"
                )));
            }
        }
        Ok(Self {
            assets,
            days,
            grids,
            prices,
        })
    }

    /// Builds a panel from long-format ticks. Without `grid` every asset must
    /// be observed at the same timestamps each day. With `grid` each asset is
    /// aligned by previous tick; grid points before the first tick of the day
    /// take that first tick.
    pub fn from_ticks(ticks: &[Tick<T>], grid: Option<SessionGrid>) -> Result<Self> {
        let mut assets: Vec<String> = ticks.iter().map(|t| t.symbol.clone()).collect();
        assets.sort();
        assets.dedup();
        let n = assets.len();
        let mut days: Vec<NaiveDate> = ticks.iter().map(|t| t.timestamp.date()).collect();
        days.sort();
        days.dedup();

        // per day, per asset: sorted (timestamp, price)
        let mut obs: Vec<Vec<Vec<(NaiveDateTime, T)>>> = vec![vec![Vec::new(); n]; days.len()];
        for t in ticks {
            if !t.logprice.is_finite() {
                return Err(Error::Parse(format!("non-finite price at {}", t.timestamp)));
            }
            let d = days.binary_search(&t.timestamp.date()).expect("collected");
            let a = assets.binary_search(&t.symbol).expect("collected");
            obs[d][a].push((t.timestamp, t.logprice));
        }
        for day in &mut obs {
            for series in day.iter_mut() {
                series.sort_by_key(|p| p.0);
            }
        }

        let mut grids = Vec::with_capacity(days.len());
        let mut prices = Vec::with_capacity(days.len());
        for (d, day_obs) in days.iter().zip(&obs) {
            if let Some(missing) = day_obs.iter().position(Vec::is_empty) {
                return Err(Error::Parse(format!(
                    "asset {} has no observations on {d}",
                    assets[missing]
                )));
            }
            let points = match grid {
                Some(g) => g.points(*d),
                None => {
                    let reference: Vec<NaiveDateTime> = day_obs[0].iter().map(|p| p.0).collect();
                    for (a, series) in day_obs.iter().enumerate() {
                        if series.len() != reference.len()
                            || series.iter().zip(&reference).any(|(p, r)| p.0 != *r)
                        {
                            return Err(Error::Parse(format!(
                                "asset {} is not synchronous with {} on {d}; use grid alignment",
                                assets[a], assets[0]
                            )));
                        }
                    }
                    reference
                }
            };
            let mut block = Matrix::zeros(points.len(), n);
            for (a, series) in day_obs.iter().enumerate() {
                for (r, tp) in points.iter().enumerate() {
                    let k = series.partition_point(|p| p.0 <= *tp);
                    block[(r, a)] = series[k.saturating_sub(1)].1;
                }
            }
            grids.push(points);
            prices.push(block);
        }
        Self::new(assets, days, grids, prices)
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn days(&self) -> &[NaiveDate] {
        &self.days
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    /// Number of intraday returns `M` per day.
    pub fn n_intervals(&self) -> usize {
        self.grids[0].len() - 1
    }

    pub fn grid(&self, day: usize) -> &[NaiveDateTime] {
        &self.grids[day]
    }

    pub fn prices(&self, day: usize) -> &Matrix<T> {
        &self.prices[day]
    }

    pub fn day_index(&self, day: NaiveDate) -> Result<usize> {
        self.days
            .binary_search(&day)
            .map_err(|_| Error::UnknownDay(day.to_string()))
    }

    /// Spacing of the first day's grid if it is uniform.
    pub fn tick_spacing(&self) -> Option<TimeDelta> {
        let g = &self.grids[0];
        let step = g[1] - g[0];
        g.windows(2).all(|w| w[1] - w[0] == step).then_some(step)
    }

    /// `M × n` intraday returns of one day.
    pub fn intraday_returns(&self, day: NaiveDate) -> Result<Matrix<T>> {
        Ok(self.returns_at(self.day_index(day)?, 0, 1))
    }

    /// Close-to-close log return of each asset, one row per day. The
    /// first day has no previous close and uses its own open.
    pub fn daily_returns(&self) -> Matrix<T> {
        let n = self.n_assets();
        let last = self.n_intervals();
        Matrix::from_fn(self.days.len(), n, |d, a| {
            let prev = if d == 0 {
                self.prices[0][(0, a)]
            } else {
                self.prices[d - 1][(last, a)]
            };
            self.prices[d][(last, a)] - prev
        })
    }

    fn returns_at(&self, day: usize, offset: usize, step: usize) -> Matrix<T> {
        let p = &self.prices[day];
        let idx: Vec<usize> = (offset..p.rows()).step_by(step).collect();
        let rows = idx.len().saturating_sub(1);
        Matrix::from_fn(rows, p.cols(), |r, a| p[(idx[r + 1], a)] - p[(idx[r], a)])
    }
}

/// Realized covariance with its diagnostics. The matrix is PSD but only
/// guaranteed SPD when `singular` is false.
#[derive(Clone, Debug, PartialEq)]
pub struct RealizedCov<T> {
    pub matrix: Matrix<T>,
    /// Numerically singular (rank deficient up to rounding).
    pub singular: bool,
    /// `M <= n`: positive definiteness is not expected.
    pub underdetermined: bool,
}

impl<T: Real> RealizedCov<T> {
    pub fn into_spd(self) -> Result<SpdMatrix<T>> {
        if self.singular {
            return Err(Error::NotSpd("realized covariance is singular".into()));
        }
        SpdMatrix::new(self.matrix)
    }
}

/// `Σ_j y_j y_jᵀ` over the rows of an `M × n` return matrix.
pub fn realized_cov<T: Real>(returns: &Matrix<T>) -> RealizedCov<T> {
    let matrix = returns.gram();
    let n = matrix.rows();
    let singular = is_singular(&matrix);
    RealizedCov {
        singular,
        underdetermined: returns.rows() <= n,
        matrix,
    }
}

fn is_singular<T: Real>(m: &Matrix<T>) -> bool {
    if m.rows() == 0 || !m.is_finite() {
        return true;
    }
    let eig = crate::linalg::SymEigen::new(m);
    let top = eig.max();
    top <= T::zero() || eig.min() <= T::from_count(m.rows()) * T::epsilon() * top
}

/// Average of `k` realized covariances, each computed on the grid with
/// spacing `base_step` finest ticks offset by `0, …, k-1` ticks.
pub fn subsampled_realized_cov<T: Real>(
    panel: &IntradayPanel<T>,
    day: NaiveDate,
    base_step: usize,
    k: usize,
) -> Result<RealizedCov<T>> {
    let d = panel.day_index(day)?;
    subsampled_at(panel, d, base_step, k)
}

pub(crate) fn subsampled_at<T: Real>(
    panel: &IntradayPanel<T>,
    d: usize,
    base_step: usize,
    k: usize,
) -> Result<RealizedCov<T>> {
    if base_step == 0 || k == 0 {
        return Err(Error::InvalidArgument(
            "base_step and subgrid count must be at least 1".into(),
        ));
    }
    let m = panel.n_intervals();
    if base_step * k > m {
        return Err(Error::InsufficientData {
            what: "finest grid intervals for base_step × subgrids",
            required: base_step * k,
            actual: m,
        });
    }
    let n = panel.n_assets();
    let mut acc = Matrix::zeros(n, n);
    let mut underdetermined = false;
    for offset in 0..k {
        let rc = realized_cov(&panel.returns_at(d, offset, base_step));
        underdetermined |= rc.underdetermined;
        acc = acc.add(&rc.matrix);
    }
    let matrix = acc.scaled(T::one() / T::from_count(k));
    Ok(RealizedCov {
        singular: is_singular(&matrix),
        underdetermined,
        matrix,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 3, d).unwrap()
    }

    fn one_day_panel(prices: Vec<Vec<f64>>) -> IntradayPanel<f64> {
        let n = prices[0].len();
        let grid: Vec<NaiveDateTime> = (0..prices.len())
            .map(|k| day(1).and_hms_opt(9, 30, 0).unwrap() + TimeDelta::minutes(5 * k as i64))
            .collect();
        IntradayPanel::new(
            (0..n).map(|a| format!("A{a}")).collect(),
            vec![day(1)],
            vec![grid],
            vec![Matrix::from_rows(&prices)],
        )
        .unwrap()
    }

    #[test]
    fn returns_are_first_differences() {
        let p = one_day_panel(vec![vec![0.0], vec![0.01], vec![0.03]]);
        let r = p.intraday_returns(day(1)).unwrap();
        assert_eq!(r.rows(), 2);
        assert!((r[(0, 0)] - 0.01).abs() < 1e-15);
        assert!((r[(1, 0)] - 0.02).abs() < 1e-15);
        assert!(matches!(
            p.intraday_returns(day(2)),
            Err(Error::UnknownDay(_))
        ));
    }

    #[test]
    fn constant_prices_give_zero_returns() {
        let p = one_day_panel(vec![vec![4.6, 3.0]; 5]);
        let r = p.intraday_returns(day(1)).unwrap();
        assert!(r.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn five_minute_session_has_78_returns() {
        let g = SessionGrid::default();
        let points = g.points(day(1));
        assert_eq!(points.len(), 79);
        let ticks: Vec<Tick<f64>> = points
            .iter()
            .enumerate()
            .map(|(k, &ts)| Tick {
                timestamp: ts,
                symbol: "X".into(),
                logprice: k as f64 * 1e-3,
            })
            .collect();
        let p = IntradayPanel::from_ticks(&ticks, None).unwrap();
        assert_eq!(p.intraday_returns(day(1)).unwrap().rows(), 78);
    }

    #[test]
    fn previous_tick_alignment() {
        let base = day(1).and_hms_opt(9, 31, 0).unwrap();
        let ticks = vec![
            Tick {
                timestamp: base,
                symbol: "A".into(),
                logprice: 1.0,
            },
            Tick {
                timestamp: base + TimeDelta::minutes(6),
                symbol: "A".into(),
                logprice: 2.0,
            },
            Tick {
                timestamp: base + TimeDelta::minutes(1),
                symbol: "B".into(),
                logprice: 5.0,
            },
        ];
        let grid = SessionGrid {
            open: NaiveTime::from_hms_opt(9, 30, 0).unwrap(),
            close: NaiveTime::from_hms_opt(9, 45, 0).unwrap(),
            step: TimeDelta::minutes(5),
        };
        let p = IntradayPanel::from_ticks(&ticks, Some(grid)).unwrap();
        let block = p.prices(0);
        // grid 9:30, 9:35, 9:40, 9:45
        assert_eq!(block.column(0), vec![1.0, 1.0, 2.0, 2.0]);
        assert_eq!(block.column(1), vec![5.0; 4]);
        assert!(IntradayPanel::from_ticks(&ticks, None).is_err());
    }

    #[test]
    fn single_asset_sum_of_squares() {
        let r = Matrix::<f64>::from_rows(&[[0.01], [-0.02]]);
        let rc = realized_cov(&r);
        assert!((rc.matrix[(0, 0)] - 0.0005).abs() < 1e-18);
    }

    #[test]
    fn identical_columns_flag_singularity() {
        let r = Matrix::from_rows(&[[0.01, 0.01], [-0.02, -0.02], [0.005, 0.005]]);
        let rc = realized_cov(&r);
        assert!(rc.singular);
        assert_eq!(rc.matrix[(0, 0)], rc.matrix[(0, 1)]);
        assert_eq!(rc.matrix[(1, 1)], rc.matrix[(0, 1)]);
        assert!(rc.into_spd().is_err());
    }

    #[test]
    fn one_subgrid_equals_base_grid() {
        let prices: Vec<Vec<f64>> = (0..31)
            .map(|k| {
                let x = k as f64;
                vec![(x * 0.37).sin() * 0.01, (x * 0.11).cos() * 0.02]
            })
            .collect();
        let p = one_day_panel(prices);
        let sub = subsampled_realized_cov(&p, day(1), 3, 1).unwrap();
        let direct = realized_cov(&p.returns_at(0, 0, 3));
        assert_eq!(sub.matrix, direct.matrix);
        assert!(subsampled_realized_cov(&p, day(1), 3, 11).is_err());
        assert!(subsampled_realized_cov(&p, day(1), 0, 1).is_err());
        let avg = subsampled_realized_cov(&p, day(1), 3, 3).unwrap();
        assert!(!avg.singular);
        assert!(avg.into_spd().is_ok());
    }
}
