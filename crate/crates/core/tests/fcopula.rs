use chrono::{Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use volcop::benchmod::har_fit;
use volcop::copulae::{ClaytonCopula, CopulaModel, Family};
use volcop::fcopula::*;
use volcop::matxform::{diagonal_positions, vech_len};
use volcop::{Coord, Matrix, VechHistory};

fn dates(t: usize) -> Vec<NaiveDate> {
    let d0 = NaiveDate::from_ymd_opt(2001, 1, 1).unwrap();
    (0..t).map(|k| d0 + Days::new(k as u64)).collect()
}

fn iid_history(n: usize, t: usize, seed: u64, coord: Coord) -> VechHistory {
    let m = vech_len(n);
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let v = Matrix::from_fn(t, m, |_, _| r.random_range(0.5..1.5));
    VechHistory::new(coord, dates(t), v).unwrap()
}

/// Each coordinate an independent Clayton(θ) Markov chain in ranks, mapped
/// to values in (0.5, 1.5).
fn clayton_chain(n: usize, t: usize, theta: f64, seed: u64) -> VechHistory {
    let m = vech_len(n);
    let c = CopulaModel::Clayton(ClaytonCopula::new(2, theta).unwrap());
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut v = Matrix::zeros(t, m);
    for j in 0..m {
        let mut u: f64 = r.random_range(0.01..0.99);
        for row in 0..t {
            v[(row, j)] = 0.5 + u;
            u = c.conditional_sample_with(&[u], 1, &mut r).unwrap()[(0, 0)];
        }
    }
    VechHistory::new(Coord::Cholesky, dates(t), v).unwrap()
}

#[test]
fn approach_dimensions_for_six_assets() {
    let h = iid_history(6, 460, 1, Coord::Cholesky);
    let p = LagPanel::new(&h).unwrap();
    assert_eq!(p.pseudo().dim(), 42);
    let mc1 = CopulaForecaster::fit(&p, Approach::Mc1, Family::T, 50, 1).unwrap();
    assert_eq!(mc1.copulas().len(), 1);
    assert_eq!(mc1.copulas()[0].dim(), 42);
    let mc2 = CopulaForecaster::fit(&p, Approach::Mc2, Family::Clayton, 50, 1).unwrap();
    assert_eq!(mc2.copulas().len(), 21);
    assert!(mc2.copulas().iter().all(|c| c.dim() == 22));
    let hy = CopulaForecaster::fit(&p, Approach::CopulaHar, Family::Gumbel, 50, 1).unwrap();
    assert_eq!(hy.copulas().len(), 6);
    let models = hy.coord_models().unwrap();
    let diag = diagonal_positions(6);
    assert_eq!(diag, vec![0, 2, 5, 9, 14, 20]);
    for (j, part) in models.iter().enumerate() {
        assert_eq!(matches!(part, CoordModel::Copula(_)), diag.contains(&j));
    }
}

#[test]
fn single_asset_approaches_coincide() {
    let h = clayton_chain(1, 300, 2.0, 2);
    let p = LagPanel::new(&h).unwrap();
    for fam in [Family::T, Family::Clayton] {
        let mc1 = CopulaForecaster::fit(&p, Approach::Mc1, fam, 10, 0).unwrap();
        let mc2 = CopulaForecaster::fit(&p, Approach::Mc2, fam, 10, 0).unwrap();
        let ent = CopulaForecaster::fit(&p, Approach::Entry, fam, 10, 0).unwrap();
        assert_eq!(mc1.copulas(), ent.copulas());
        assert_eq!(mc2.copulas(), mc1.copulas());
    }
    let hy = CopulaForecaster::fit(&p, Approach::CopulaHar, Family::Gumbel, 10, 0).unwrap();
    let ent = CopulaForecaster::fit(&p, Approach::Entry, Family::Gumbel, 10, 0).unwrap();
    assert_eq!(hy.forecast(&h).unwrap(), ent.forecast(&h).unwrap());
}

#[test]
fn gumbel_is_rejected_for_multivariate_approaches() {
    let h = iid_history(1, 100, 3, Coord::Cholesky);
    assert!(fit_mc1(&h, Family::Gumbel, 10, 0).is_err());
    assert!(fit_mc2(&h, Family::Gumbel, 10, 0).is_err());
    assert!(fit_entry(&h, Family::Gumbel, 10, 0).is_ok());
}

#[test]
fn short_history_names_the_minimum() {
    let h = iid_history(1, 20, 3, Coord::Cholesky);
    let err = fit_entry(&h, Family::T, 10, 0).unwrap_err().to_string();
    assert!(err.contains("30"), "{err}");
}

#[test]
fn iid_history_gives_independent_lag_blocks() {
    let h = iid_history(2, 5000, 4, Coord::Cholesky);
    let f = fit_mc1(&h, Family::T, 10, 0).unwrap();
    let CopulaModel::T(t) = f.copulas()[0] else {
        panic!("wrong family")
    };
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        for j in 3..6 {
            worst = worst.max(t.corr()[(i, j)].abs());
        }
    }
    assert!(worst < 0.05, "{worst}");

    let e = fit_entry(&h, Family::Clayton, 10, 0).unwrap();
    for c in e.copulas() {
        assert!(c.kendall_tau() < 0.05, "{}", c.kendall_tau());
    }
}

#[test]
fn markov_chain_dependence_is_detected() {
    let h = clayton_chain(1, 2000, 2.0, 5);
    for fam in [Family::T, Family::Clayton, Family::Gumbel] {
        let e = fit_entry(&h, fam, 10, 0).unwrap();
        let tau = e.copulas()[0].kendall_tau();
        assert!(tau > 0.3, "{fam}: {tau}");
    }
}

#[test]
fn hybrid_reuses_har_and_entry_forecasts() {
    let h = clayton_chain(3, 200, 1.5, 6);
    let p = LagPanel::new(&h).unwrap();
    let hy = CopulaForecaster::fit(&p, Approach::CopulaHar, Family::T, 200, 9).unwrap();
    let ent = CopulaForecaster::fit(&p, Approach::Entry, Family::T, 200, 9).unwrap();
    let fh = hy.forecast(&h).unwrap();
    let fe = ent.forecast(&h).unwrap();
    let diag = diagonal_positions(3);
    for j in 0..6 {
        if diag.contains(&j) {
            assert_eq!(fh.vech.values()[j], fe.vech.values()[j]);
        } else {
            let col = h.column(j);
            let har = har_fit(&col).unwrap();
            let want = har.forecast(&col[col.len() - 22..]).unwrap();
            assert_eq!(fh.vech.values()[j], want);
        }
    }
}

#[test]
fn independence_limit_is_the_sample_mean() {
    let h = iid_history(2, 400, 7, Coord::LogMatrix);
    let f = fit_entry(&h, Family::Clayton, 100_000, 3).unwrap();
    let out = f.forecast(&h).unwrap();
    for j in 0..3 {
        let col = h.column(j);
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        assert!((out.vech.values()[j] - mean).abs() < 1e-2, "{j}");
    }
}

#[test]
fn forecasts_are_seed_deterministic() {
    let h = clayton_chain(2, 150, 2.0, 8);
    for (a, fam) in [
        (Approach::Mc1, Family::T),
        (Approach::Mc2, Family::Clayton),
        (Approach::Entry, Family::Gumbel),
    ] {
        let p = LagPanel::new(&h).unwrap();
        let f1 = CopulaForecaster::fit(&p, a, fam, 300, 42).unwrap();
        let f2 = CopulaForecaster::fit(&p, a, fam, 300, 42).unwrap();
        let f3 = CopulaForecaster::fit(&p, a, fam, 300, 43).unwrap();
        let x = f1.forecast(&h).unwrap();
        assert_eq!(x, f2.forecast(&h).unwrap());
        assert_ne!(x, f3.forecast(&h).unwrap());
    }
}

#[test]
fn markov_contract_ignores_older_history() {
    let h = clayton_chain(2, 150, 2.0, 10);
    let f = fit_mc1(&h, Family::Clayton, 200, 1).unwrap();
    let mut v = h.values().clone();
    for r in 0..h.len() - 1 {
        for c in 0..v.cols() {
            v[(r, c)] = 0.9;
        }
    }
    let h2 = VechHistory::new(h.coord(), h.dates().to_vec(), v).unwrap();
    assert_eq!(f.forecast(&h).unwrap(), f.forecast(&h2).unwrap());
}

#[test]
fn copula_fit_is_invariant_to_monotone_transforms() {
    let h = clayton_chain(2, 200, 2.0, 11);
    let mut v = h.values().clone();
    for r in 0..v.rows() {
        v[(r, 1)] = v[(r, 1)].exp() * 3.0 - 1.0;
    }
    let h2 = VechHistory::new(h.coord(), h.dates().to_vec(), v).unwrap();
    for (a, fam) in [(Approach::Mc1, Family::T), (Approach::Entry, Family::Clayton)] {
        let f1 = CopulaForecaster::fit(&LagPanel::new(&h).unwrap(), a, fam, 10, 0).unwrap();
        let f2 = CopulaForecaster::fit(&LagPanel::new(&h2).unwrap(), a, fam, 10, 0).unwrap();
        assert_eq!(f1.copulas(), f2.copulas());
    }
}

#[test]
fn rolling_forecasts_are_always_spd() {
    let window = 100;
    for coord in [Coord::Cholesky, Coord::LogMatrix] {
        let base = clayton_chain(2, window + 648, 3.0, 12);
        let h = VechHistory::new(coord, base.dates().to_vec(), base.values().clone()).unwrap();
        for t in window..window + 648 {
            let w = h.window(t - window..t);
            let p = LagPanel::new(&w).unwrap();
            for (a, fam) in [
                (Approach::Mc1, Family::T),
                (Approach::Mc1, Family::Clayton),
                (Approach::Entry, Family::Gumbel),
                (Approach::CopulaHar, Family::Clayton),
            ] {
                let f = CopulaForecaster::fit(&p, a, fam, 50, t as u64).unwrap();
                let out = f.forecast(&w).unwrap();
                assert!(out.matrix.min_eigenvalue() > 0.0, "{coord:?} {a} day {t}");
            }
        }
    }
}

#[test]
fn mc2_tracks_mc1_on_mc1_generated_data() {
    use volcop::harness::MarkovTSpec;
    let spec = MarkovTSpec {
        assets: 2,
        days: 700,
        seed: 13,
        ..MarkovTSpec::default()
    };
    let series = spec.generate().unwrap().series;
    let (h, _) = series.to_vech(Coord::Cholesky);
    let window = 500;
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for t in window..h.len() {
        let w = h.window(t - window..t);
        let p = LagPanel::new(&w).unwrap();
        let f1 = CopulaForecaster::fit(&p, Approach::Mc1, Family::T, 1000, t as u64).unwrap();
        let f2 = CopulaForecaster::fit(&p, Approach::Mc2, Family::T, 1000, t as u64).unwrap();
        a.push(f1.forecast(&w).unwrap().vech.into_values());
        b.push(f2.forecast(&w).unwrap().vech.into_values());
    }
    let corr = |x: &[f64], y: &[f64]| {
        let n = x.len() as f64;
        let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
        let sxy: f64 = x.iter().zip(y).map(|(p, q)| (p - mx) * (q - my)).sum();
        let sxx: f64 = x.iter().map(|p| (p - mx).powi(2)).sum();
        let syy: f64 = y.iter().map(|q| (q - my).powi(2)).sum();
        sxy / (sxx * syy).sqrt()
    };
    for j in 0..3 {
        let x: Vec<f64> = a.iter().map(|v| v[j]).collect();
        let y: Vec<f64> = b.iter().map(|v| v[j]).collect();
        let r = corr(&x, &y);
        assert!(r > 0.9, "coordinate {j}: {r}");
    }
}

#[test]
fn serialized_forecasters_reproduce_forecasts() {
    let h = clayton_chain(2, 150, 2.0, 14);
    let p = LagPanel::new(&h).unwrap();
    for (a, fam) in [
        (Approach::Mc1, Family::T),
        (Approach::Mc2, Family::Clayton),
        (Approach::Entry, Family::Gumbel),
        (Approach::CopulaHar, Family::T),
    ] {
        let f = CopulaForecaster::fit(&p, a, fam, 200, 5).unwrap();
        let text = serde_json::to_string(&f.to_json()).unwrap();
        let j: ForecasterJson = serde_json::from_str(&text).unwrap();
        let g = CopulaForecaster::from_json(&p, j).unwrap();
        assert_eq!(f.forecast(&h).unwrap(), g.forecast(&h).unwrap(), "{a}");
    }
    let mut j = CopulaForecaster::fit(&p, Approach::CopulaHar, Family::Clayton, 10, 0)
        .unwrap()
        .to_json();
    j.parts.swap(0, 1);
    assert!(CopulaForecaster::from_json(&p, j).is_err());
    let mut j = fit_mc1(&h, Family::T, 10, 0).unwrap().to_json();
    j.family = Family::Gumbel;
    assert!(CopulaForecaster::from_json(&p, j).is_err());
}
