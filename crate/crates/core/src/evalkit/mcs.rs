use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

use super::loss::LossSeries;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McsResult {
    /// Models in the confidence set, in input order.
    pub retained: Vec<String>,
    /// Every model in elimination order; the last one is never eliminated.
    pub elimination_order: Vec<String>,
    /// MCS p-value per model, in input order.
    pub p_values: Vec<f64>,
    pub alpha: f64,
    pub n_boot: usize,
    pub block_len: usize,
}

pub const DEFAULT_N_BOOT: usize = 999;

/// `⌈T^{1/3}⌉`.
pub fn default_block_len(t: usize) -> usize {
    if t <= 1 {
        return 1;
    }
    let b = (t as f64).cbrt().ceil() as usize;
    // guard the cube root of exact cubes against rounding up
    if (b - 1).pow(3) >= t {
        b - 1
    } else {
        b
    }
}

/// Circular block bootstrap indices for a series of length `t`.
fn block_indices<R: Rng>(t: usize, block: usize, r: &mut R) -> Vec<usize> {
    let mut idx = Vec::with_capacity(t);
    while idx.len() < t {
        let start = r.random_range(0..t);
        for k in 0..block.min(t - idx.len()) {
            idx.push((start + k) % t);
        }
    }
    idx
}

/// Model confidence set with the range statistic `max |t_ij|`, block
/// bootstrap variances and running-maximum p-values.
pub fn mcs(losses: &[LossSeries], alpha: f64, n_boot: usize, block_len: usize, seed: u64) -> Result<McsResult> {
    let k = losses.len();
    if k == 0 {
        return Err(Error::InvalidArgument("MCS needs at least one model".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside (0, 1)")));
    }
    let t = losses[0].values.len();
    if let Some(bad) = losses.iter().find(|l| l.values.len() != t) {
        return Err(Error::Dimension {
            expected: t,
            actual: bad.values.len(),
        });
    }
    if losses.iter().any(|l| l.values.iter().any(|v| !v.is_finite())) {
        return Err(Error::InvalidArgument("non-finite loss".into()));
    }
    let names: Vec<String> = losses.iter().map(|l| l.model.clone()).collect();
    if k == 1 {
        return Ok(McsResult {
            retained: names.clone(),
            elimination_order: names,
            p_values: vec![1.0],
            alpha,
            n_boot,
            block_len,
        });
    }
    if t < 2 || n_boot == 0 || block_len == 0 {
        return Err(Error::InvalidArgument(
            "MCS needs at least two days, one replication and a positive block".into(),
        ));
    }
    let means: Vec<f64> = losses
        .iter()
        .map(|l| l.values.iter().sum::<f64>() / t as f64)
        .collect();
    // boot[b][i]: mean loss of model i in replication b
    let boot: Vec<Vec<f64>> = (0..n_boot)
        .into_par_iter()
        .map(|b| {
            let mut r = rng::stream(seed, &[0x3C5, b as u64]);
            let idx = block_indices(t, block_len, &mut r);
            losses
                .iter()
                .map(|l| idx.iter().map(|&s| l.values[s]).sum::<f64>() / t as f64)
                .collect()
        })
        .collect();

    // pairwise bootstrap variances of the mean differentials
    let mut var = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let dbar = means[i] - means[j];
            let v = boot
                .iter()
                .map(|bm| (bm[i] - bm[j] - dbar).powi(2))
                .sum::<f64>()
                / n_boot as f64;
            var[i][j] = v;
            var[j][i] = v;
        }
    }
    let tstat = |i: usize, j: usize, num: f64| -> f64 {
        let v = var[i][j];
        if v > 0.0 {
            num / v.sqrt()
        } else if num == 0.0 {
            0.0
        } else {
            num.signum() * f64::INFINITY
        }
    };

    let mut alive: Vec<usize> = (0..k).collect();
    let mut order = Vec::with_capacity(k);
    let mut pvals = vec![1.0; k];
    let mut running: f64 = 0.0;
    while alive.len() > 1 {
        let mut stat: f64 = 0.0;
        let mut worst = alive[0];
        let mut worst_t = f64::NEG_INFINITY;
        for &i in &alive {
            let mut row_max = f64::NEG_INFINITY;
            for &j in &alive {
                if i != j {
                    let tij = tstat(i, j, means[i] - means[j]);
                    row_max = row_max.max(tij);
                    stat = stat.max(tij.abs());
                }
            }
            if row_max > worst_t {
                worst_t = row_max;
                worst = i;
            }
        }
        let exceed = boot
            .iter()
            .filter(|bm| {
                let mut s: f64 = 0.0;
                for (a, &i) in alive.iter().enumerate() {
                    for &j in &alive[a + 1..] {
                        let c = bm[i] - bm[j] - (means[i] - means[j]);
                        let v = if var[i][j] > 0.0 {
                            (c / var[i][j].sqrt()).abs()
                        } else {
                            0.0
                        };
                        s = s.max(v);
                    }
                }
                s >= stat
            })
            .count();
        let p = exceed as f64 / n_boot as f64;
        running = running.max(p);
        pvals[worst] = running;
        order.push(names[worst].clone());
        alive.retain(|&i| i != worst);
    }
    pvals[alive[0]] = 1.0;
    order.push(names[alive[0]].clone());
    let retained = (0..k)
        .filter(|&i| pvals[i] >= alpha)
        .map(|i| names[i].clone())
        .collect();
    Ok(McsResult {
        retained,
        elimination_order: order,
        p_values: pvals,
        alpha,
        n_boot,
        block_len,
    })
}
