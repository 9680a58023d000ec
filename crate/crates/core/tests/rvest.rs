use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use volcop::rvest::{
    estimate_series, hurst_rs, realized_cov, simulate_panel, subsampled_realized_cov, SimConfig,
    VolParams,
};
use volcop::Matrix;

fn brute_force(r: &Matrix) -> Vec<Vec<f64>> {
    let n = r.cols();
    let mut out = vec![vec![0.0; n]; n];
    for t in 0..r.rows() {
        for i in 0..n {
            for j in 0..n {
                out[i][j] += r[(t, i)] * r[(t, j)];
            }
        }
    }
    out
}

#[test]
fn realized_cov_matches_outer_product_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let r = Matrix::from_fn(78, 6, |_, _| rng.sample::<f64, _>(StandardNormal) * 1e-3);
    let rc = realized_cov(&r);
    let bf = brute_force(&r);
    for i in 0..6 {
        for j in 0..6 {
            assert_eq!(rc.matrix[(i, j)], bf[i][j]);
        }
    }
    assert!(!rc.singular && !rc.underdetermined);
}

#[test]
fn too_few_returns_are_flagged() {
    let r = Matrix::from_rows(&[[0.01, 0.02, -0.01], [0.0, 0.01, 0.03]]);
    let rc = realized_cov(&r);
    assert!(rc.underdetermined);
    assert!(rc.singular);
}

fn quiet(assets: usize, days: usize, intervals: usize) -> SimConfig {
    SimConfig {
        assets,
        days,
        intervals,
        noise_sd: 0.0,
        vol: VolParams {
            vol_of_vol: 0.0,
            drift: 0.0,
            ..VolParams::default()
        },
        seed: 3,
        ..SimConfig::default()
    }
}

#[test]
fn constant_volatility_realized_cov_converges() {
    let mut errs = Vec::new();
    for m in [50usize, 800] {
        let sim = simulate_panel(&quiet(3, 40, m)).unwrap();
        let sigma0 = sim.integrated.get(0).as_matrix().clone();
        for t in 1..sim.integrated.len() {
            assert!(sim.integrated.get(t).as_matrix().sub(&sigma0).max_abs() < 1e-15);
        }
        let mut total = 0.0;
        for day in sim.panel.days() {
            let rc = realized_cov(&sim.panel.intraday_returns(*day).unwrap());
            total += rc.matrix.sub(&sigma0).max_abs() / sigma0.max_abs();
        }
        errs.push(total / sim.panel.days().len() as f64);
    }
    // O(M^{-1/2}): 16x more intervals should cut the error about 4x
    assert!(errs[0] < 0.5, "{errs:?}");
    assert!(errs[1] < errs[0] / 2.5, "{errs:?}");
}

#[test]
fn simulation_is_reproducible_and_noise_is_additive() {
    let cfg = SimConfig {
        assets: 3,
        days: 30,
        intervals: 60,
        noise_sd: 0.0,
        seed: 9,
        ..SimConfig::default()
    };
    let a = simulate_panel(&cfg).unwrap();
    let b = simulate_panel(&cfg).unwrap();
    assert_eq!(a.panel, b.panel);
    assert_eq!(a.integrated, b.integrated);

    // without noise, prices are continuous across days
    for d in 1..a.panel.days().len() {
        let prev = a.panel.prices(d - 1);
        assert_eq!(prev.row(prev.rows() - 1), a.panel.prices(d).row(0));
    }

    let noisy = simulate_panel(&SimConfig {
        noise_sd: 1e-3,
        ..cfg.clone()
    })
    .unwrap();
    assert_eq!(noisy.integrated, a.integrated);
    let mut ss = 0.0;
    let mut count = 0.0;
    for d in 0..a.panel.days().len() {
        let diff = noisy.panel.prices(d).sub(a.panel.prices(d));
        ss += diff.as_slice().iter().map(|x| x * x).sum::<f64>();
        count += diff.as_slice().len() as f64;
    }
    let sd = (ss / count).sqrt();
    assert!((sd - 1e-3).abs() < 5e-5, "{sd}");
}

#[test]
fn integrated_covariances_are_spd() {
    let sim = simulate_panel(&SimConfig {
        assets: 6,
        days: 60,
        intervals: 78,
        vol: VolParams {
            vol_of_vol: 0.6,
            ..VolParams::default()
        },
        ..SimConfig::default()
    })
    .unwrap();
    for g in sim.integrated.mats() {
        assert!(g.min_eigenvalue() > 0.0);
    }
    let est = estimate_series(&sim.panel, 1, 1).unwrap();
    assert_eq!(est.len(), 60);
}

#[test]
fn subsampling_reduces_mse_under_noise() {
    // 10-second ticks, 5-minute base grid
    let sim = simulate_panel(&SimConfig {
        assets: 2,
        days: 200,
        intervals: 2340,
        noise_sd: 5e-4,
        seed: 21,
        ..SimConfig::default()
    })
    .unwrap();
    let (mut mse_1, mut mse_k) = (0.0, 0.0);
    for (d, day) in sim.panel.days().iter().enumerate() {
        let truth = sim.integrated.get(d).as_matrix();
        let one = subsampled_realized_cov(&sim.panel, *day, 30, 1).unwrap();
        let many = subsampled_realized_cov(&sim.panel, *day, 30, 30).unwrap();
        let sq = |m: &Matrix| m.sub(truth).as_slice().iter().map(|x| x * x).sum::<f64>();
        mse_1 += sq(&one.matrix);
        mse_k += sq(&many.matrix);
        assert!(!many.singular);
    }
    assert!(mse_k <= mse_1, "K=30 {mse_k} vs K=1 {mse_1}");
}

#[test]
fn hurst_of_white_noise_is_near_half() {
    let mut estimates = Vec::new();
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..4096).map(|_| rng.sample(StandardNormal)).collect();
        estimates.push(hurst_rs(&x).unwrap());
    }
    let inside = estimates
        .iter()
        .filter(|h| (0.45..=0.58).contains(*h))
        .count();
    assert!(inside >= 17, "{estimates:?}");
    estimates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert!((0.45..=0.58).contains(&estimates[10]), "{estimates:?}");
}

#[test]
fn daily_returns_are_close_to_close() {
    let sp = simulate_panel(&SimConfig {
        assets: 2,
        days: 30,
        intervals: 20,
        seed: 5,
        ..SimConfig::default()
    })
    .unwrap();
    let p = &sp.panel;
    let r = p.daily_returns();
    assert_eq!((r.rows(), r.cols()), (30, 2));
    let last = p.n_intervals();
    for a in 0..2 {
        assert_eq!(r[(0, a)], p.prices(0)[(last, a)] - p.prices(0)[(0, a)]);
        for d in 1..30 {
            assert_eq!(r[(d, a)], p.prices(d)[(last, a)] - p.prices(d - 1)[(last, a)]);
        }
        // the returns telescope to the total log price change
        let total: f64 = (0..30).map(|d| r[(d, a)]).sum();
        let span = p.prices(29)[(last, a)] - p.prices(0)[(0, a)];
        assert!((total - span).abs() < 1e-12);
    }
}
