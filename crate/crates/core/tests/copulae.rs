use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use volcop::copulae::{
    fit, kendall_tau, ClaytonCopula, CopulaModel, Family, FitWarning, GumbelCopula, PseudoSample,
    TCopula,
};
use volcop::Matrix;

fn t2(rho: f64, nu: f64) -> CopulaModel {
    CopulaModel::T(TCopula::new(Matrix::from_rows(&[[1.0, rho], [rho, 1.0]]), nu).unwrap())
}

fn empirical_tau(m: &Matrix) -> f64 {
    kendall_tau(&m.column(0), &m.column(1)).unwrap()
}

#[test]
fn t_fit_recovers_parameters() {
    let sample = t2(0.5, 5.0).sample(100_000, 5);
    let fitted = fit(Family::T, &sample).unwrap();
    let CopulaModel::T(t) = &fitted.model else {
        panic!("wrong family")
    };
    assert!((t.corr()[(0, 1)] - 0.5).abs() < 0.02, "{}", t.corr()[(0, 1)]);
    assert!((t.nu() - 5.0).abs() < 1.5, "{}", t.nu());
}

#[test]
fn clayton_on_independent_uniforms_is_near_independence() {
    let sample = CopulaModel::T(TCopula::new(Matrix::identity(2), 1e6).unwrap()).sample(5000, 8);
    let fitted = fit(Family::Clayton, &sample).unwrap();
    let CopulaModel::Clayton(c) = &fitted.model else {
        panic!("wrong family")
    };
    assert!(c.theta() < 0.05, "{}", c.theta());
}

#[test]
fn clayton_pins_negative_dependence_at_lower_bound() {
    let sample = t2(-0.6, 8.0).sample(2000, 9);
    let fitted = fit(Family::Clayton, &sample).unwrap();
    assert!(fitted.warnings.contains(&FitWarning::AtLowerBound));
    assert!(fitted.warnings.contains(&FitWarning::NegativeDependence));
    let fitted = fit(Family::Gumbel, &sample).unwrap();
    assert!(fitted.warnings.contains(&FitWarning::NegativeDependence));
}

#[test]
fn comonotone_pair_is_projected() {
    let u: Vec<f64> = (1..=200).map(|r| r as f64 / 201.0).collect();
    let m = Matrix::from_fn(200, 2, |r, _| u[r]);
    let fitted = fit(Family::T, &PseudoSample::new(m).unwrap()).unwrap();
    assert!(fitted.warnings.contains(&FitWarning::ProjectedToPd));
    let CopulaModel::T(t) = &fitted.model else {
        panic!("wrong family")
    };
    assert!(t.corr()[(0, 1)] < 1.0 && t.corr()[(0, 1)] > 0.999);
}

#[test]
fn constant_column_is_a_fit_error() {
    let m = Matrix::from_fn(100, 2, |r, c| if c == 0 { 0.5 } else { (r + 1) as f64 / 101.0 });
    let data = PseudoSample::new(m).unwrap();
    for fam in [Family::T, Family::Clayton, Family::Gumbel] {
        assert!(fit(fam, &data).is_err());
    }
}

#[test]
fn too_few_rows_for_t_dimension() {
    let m = Matrix::from_fn(30, 4, |r, c| ((r * 7 + c * 3) % 29 + 1) as f64 / 31.0);
    let err = fit(Family::T, &PseudoSample::new(m).unwrap()).unwrap_err();
    assert!(err.to_string().contains("40"), "{err}");
}

#[test]
fn conditional_of_uncorrelated_t_has_mean_one_half() {
    let m = CopulaModel::T(TCopula::new(Matrix::identity(3), 4.0).unwrap());
    for u in [0.05, 0.5, 0.97] {
        let draws = m.conditional_sample(&[u], 100_000, 3).unwrap();
        for c in 0..2 {
            let mean = draws.column(c).iter().sum::<f64>() / 1e5;
            assert!((mean - 0.5).abs() < 0.005, "{u}: {mean}");
        }
    }
}

#[test]
fn strong_t_conditional_matches_rejection_sampling() {
    let m = t2(0.99, 50.0);
    let cond = m.conditional_sample(&[0.9], 100_000, 4).unwrap();
    let cond_mean = cond.as_slice().iter().sum::<f64>() / 1e5;

    let joint = m.sample(2_000_000, 5).into_matrix();
    let kept: Vec<f64> = (0..joint.rows())
        .filter(|&r| (joint[(r, 0)] - 0.9).abs() < 0.002)
        .map(|r| joint[(r, 1)])
        .collect();
    assert!(kept.len() > 2000);
    let rej_mean = kept.iter().sum::<f64>() / kept.len() as f64;
    assert!(cond_mean > 0.8 && cond_mean < 0.95, "{cond_mean}");
    assert!((cond_mean - rej_mean).abs() < 0.005, "{cond_mean} vs {rej_mean}");
}

#[test]
fn clayton_near_independence_conditional_is_uniform() {
    let m = CopulaModel::Clayton(ClaytonCopula::new(2, 1e-4).unwrap());
    let mut v = m.conditional_sample(&[0.1], 10_000, 6).unwrap().column(0);
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let ks = v
        .iter()
        .enumerate()
        .map(|(i, &x)| ((i + 1) as f64 / n - x).abs().max((x - i as f64 / n).abs()))
        .fold(0.0, f64::max);
    assert!(ks < 0.02, "{ks}");
}

#[test]
fn multivariate_clayton_conditional_reassembles_joint() {
    // draw u1 uniform, then (u2, u3) | u1; pairwise taus must match θ/(θ+2)
    let theta = 2.0;
    let m = CopulaModel::Clayton(ClaytonCopula::new(3, theta).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let n = 20_000;
    let mut rows = Matrix::zeros(n, 3);
    for r in 0..n {
        let u1: f64 = rand::Rng::random_range(&mut rng, 1e-9..1.0);
        let rest = m.conditional_sample_with(&[u1], 1, &mut rng).unwrap();
        rows[(r, 0)] = u1;
        rows[(r, 1)] = rest[(0, 0)];
        rows[(r, 2)] = rest[(0, 1)];
    }
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        let t = kendall_tau(&rows.column(a), &rows.column(b)).unwrap();
        assert!((t - 0.5).abs() < 0.02, "pair {a}{b}: {t}");
    }
}

#[test]
fn exchangeable_densities_are_permutation_symmetric() {
    let eq = Matrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { 0.4 });
    let models = [
        CopulaModel::T(TCopula::new(eq, 6.0).unwrap()),
        CopulaModel::Clayton(ClaytonCopula::new(3, 1.7).unwrap()),
    ];
    let u = [0.2, 0.55, 0.9];
    for m in &models {
        let base = m.density(&u).unwrap();
        for p in [[1, 0, 2], [2, 1, 0], [0, 2, 1], [1, 2, 0]] {
            let v = [u[p[0]], u[p[1]], u[p[2]]];
            assert!((m.density(&v).unwrap() - base).abs() < 1e-12 * base);
        }
    }
    let g = CopulaModel::Gumbel(GumbelCopula::new(2.2).unwrap());
    assert!((g.density(&[0.3, 0.8]).unwrap() - g.density(&[0.8, 0.3]).unwrap()).abs() < 1e-12);
}

#[test]
fn samplers_are_reproducible() {
    for m in [
        t2(0.3, 4.0),
        CopulaModel::Clayton(ClaytonCopula::new(2, 1.0).unwrap()),
        CopulaModel::Gumbel(GumbelCopula::new(1.5).unwrap()),
    ] {
        assert_eq!(m.sample(100, 77), m.sample(100, 77));
        assert_ne!(m.sample(100, 77), m.sample(100, 78));
        assert_eq!(
            m.conditional_sample(&[0.3], 50, 1).unwrap(),
            m.conditional_sample(&[0.3], 50, 1).unwrap()
        );
    }
}

#[test]
fn sampled_taus_match_closed_forms() {
    let cases: Vec<(CopulaModel, f64)> = vec![
        (t2(0.2, 4.0), 2.0 / std::f64::consts::PI * 0.2f64.asin()),
        (t2(0.5, 4.0), 2.0 / std::f64::consts::PI * 0.5f64.asin()),
        (t2(0.8, 4.0), 2.0 / std::f64::consts::PI * 0.8f64.asin()),
        (CopulaModel::Clayton(ClaytonCopula::new(2, 0.5).unwrap()), 0.5 / 2.5),
        (CopulaModel::Clayton(ClaytonCopula::new(2, 2.0).unwrap()), 0.5),
        (CopulaModel::Clayton(ClaytonCopula::new(2, 5.0).unwrap()), 5.0 / 7.0),
        (CopulaModel::Gumbel(GumbelCopula::new(1.5).unwrap()), 1.0 - 1.0 / 1.5),
        (CopulaModel::Gumbel(GumbelCopula::new(2.0).unwrap()), 0.5),
        (CopulaModel::Gumbel(GumbelCopula::new(4.0).unwrap()), 0.75),
    ];
    for (i, (m, want)) in cases.iter().enumerate() {
        assert!((m.kendall_tau() - want).abs() < 1e-12);
        let got = empirical_tau(&m.sample(100_000, 100 + i as u64).into_matrix());
        assert!((got - want).abs() < 0.01, "case {i}: {got} vs {want}");
    }
}

#[test]
fn conditional_draws_reassemble_bivariate_tau() {
    for m in [
        t2(0.6, 5.0),
        CopulaModel::Clayton(ClaytonCopula::new(2, 3.0).unwrap()),
        CopulaModel::Gumbel(GumbelCopula::new(2.5).unwrap()),
    ] {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 20_000;
        let mut rows = Matrix::zeros(n, 2);
        for r in 0..n {
            let u1: f64 = rand::Rng::random_range(&mut rng, 1e-9..1.0);
            rows[(r, 0)] = u1;
            rows[(r, 1)] = m.conditional_sample_with(&[u1], 1, &mut rng).unwrap()[(0, 0)];
        }
        let got = empirical_tau(&rows);
        assert!((got - m.kendall_tau()).abs() < 0.02, "{:?}: {got}", m.family());
    }
}

// Gauss-Legendre nodes on [0, 1] by Newton iteration on P_n
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (1..=n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            ((x + 1.0) / 2.0, w / 2.0)
        })
        .collect()
}

#[test]
fn bivariate_densities_integrate_to_one() {
    // u = s^3 (10 - 15 s + 6 s^2) clusters nodes at the edges
    let nodes: Vec<(f64, f64)> = gauss_legendre(120)
        .into_iter()
        .map(|(s, w)| {
            let u = s.powi(3) * (10.0 - 15.0 * s + 6.0 * s * s);
            (u, w * 30.0 * s * s * (1.0 - s) * (1.0 - s))
        })
        .collect();
    for m in [
        t2(0.3, 10.0),
        t2(0.7, 4.0),
        CopulaModel::Clayton(ClaytonCopula::new(2, 0.5).unwrap()),
        CopulaModel::Clayton(ClaytonCopula::new(2, 2.0).unwrap()),
        CopulaModel::Gumbel(GumbelCopula::new(1.5).unwrap()),
        CopulaModel::Gumbel(GumbelCopula::new(3.0).unwrap()),
    ] {
        let mut total = 0.0;
        for &(u, wu) in &nodes {
            for &(v, wv) in &nodes {
                total += wu * wv * m.density(&[u, v]).unwrap();
            }
        }
        assert!((total - 1.0).abs() < 2e-3, "{:?}: {total}", m.family());
    }
}
