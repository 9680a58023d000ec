use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One row of a descriptive statistics table. Kurtosis is the raw fourth
/// standardized moment (3 for a Gaussian).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    pub max: f64,
    pub min: f64,
    pub std: f64,
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
    pub hurst: Option<f64>,
}

pub const HURST_MIN_LEN: usize = 32;

pub fn summary_stats(series: &[f64]) -> Result<SummaryStats> {
    if series.is_empty() {
        return Err(Error::InsufficientData {
            what: "summary statistics",
            required: 1,
            actual: 0,
        });
    }
    if let Some(bad) = series.iter().find(|v| !v.is_finite()) {
        return Err(Error::Parse(format!("non-finite value {bad} in series")));
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let min = series.iter().copied().fold(f64::INFINITY, f64::min);
    let max = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let central = |p: i32| series.iter().map(|x| (x - mean).powi(p)).sum::<f64>() / n;
    let m2 = central(2);
    let std = if series.len() > 1 && max > min {
        (m2 * n / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let scale = mean.abs().max(max - min);
    let degenerate = max == min || m2.sqrt() <= 1e-14 * scale;
    let (skewness, kurtosis) = if degenerate {
        (None, None)
    } else {
        (
            Some(central(3) / m2.powf(1.5)),
            Some(central(4) / (m2 * m2)),
        )
    };
    let hurst = if series.len() >= HURST_MIN_LEN && !degenerate {
        hurst_rs(series)
    } else {
        None
    };
    Ok(SummaryStats {
        mean: mean.clamp(min, max),
        max,
        min,
        std,
        skewness,
        kurtosis,
        hurst,
    })
}

/// Classical rescaled-range estimate: mean R/S over non-overlapping blocks of
/// sizes 8, 16, …, ⌊len/2⌋, slope of log(R/S) on log(size).
pub fn hurst_rs(series: &[f64]) -> Option<f64> {
    let mut pts = Vec::new();
    let mut size = 8;
    while size <= series.len() / 2 {
        let mut acc = 0.0;
        let mut count = 0usize;
        for block in series.chunks_exact(size) {
            let mean = block.iter().sum::<f64>() / size as f64;
            let (mut cum, mut lo, mut hi, mut ss) = (0.0f64, 0.0f64, 0.0f64, 0.0);
            for x in block {
                cum += x - mean;
                lo = lo.min(cum);
                hi = hi.max(cum);
                ss += (x - mean) * (x - mean);
            }
            let s = (ss / size as f64).sqrt();
            if s > 0.0 {
                acc += (hi - lo) / s;
                count += 1;
            }
        }
        if count > 0 && acc > 0.0 {
            pts.push(((size as f64).ln(), (acc / count as f64).ln()));
        }
        size *= 2;
    }
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}
