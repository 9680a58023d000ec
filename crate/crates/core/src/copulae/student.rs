use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::gamma::ln_gamma;

use super::{FitWarning, PseudoSample};
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix, SymEigen};
use std::sync::{Arc, OnceLock};

pub const NU_MIN: f64 = 2.1;
pub const NU_MAX: f64 = 200.0;
pub const EIGEN_FLOOR: f64 = 1e-6;

/// Student-t copula with correlation `R` and degrees of freedom `ν`.
#[derive(Clone, Debug)]
pub struct TCopula {
    corr: Matrix<f64>,
    nu: f64,
    chol: Cholesky<f64>,
}

impl PartialEq for TCopula {
    fn eq(&self, other: &Self) -> bool {
        self.corr == other.corr && self.nu == other.nu
    }
}

impl TCopula {
    pub fn new(corr: Matrix<f64>, nu: f64) -> Result<Self> {
        let d = corr.rows();
        if d < 2 || !corr.is_square() {
            return Err(Error::InvalidArgument(
                "t copula needs a d×d correlation, d ≥ 2".into(),
            ));
        }
        if !(nu > 2.0) || !nu.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "degrees of freedom {nu} must exceed 2"
            )));
        }
        if (0..d).any(|i| (corr[(i, i)] - 1.0).abs() > 1e-9) {
            return Err(Error::InvalidArgument(
                "correlation diagonal must be 1".into(),
            ));
        }
        if corr.asymmetry() > 1e-12 {
            return Err(Error::InvalidArgument(
                "correlation is not symmetric".into(),
            ));
        }
        let chol = Cholesky::new(&corr)
            .ok_or_else(|| Error::NotSpd("correlation is not positive definite".into()))?;
        Ok(Self { corr, nu, chol })
    }

    pub fn dim(&self) -> usize {
        self.corr.rows()
    }

    pub fn corr(&self) -> &Matrix<f64> {
        &self.corr
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    fn marginal(&self) -> StudentsT {
        StudentsT::new(0.0, 1.0, self.nu).expect("validated nu")
    }

    pub(super) fn log_density(&self, u: &[f64]) -> f64 {
        let t = self.marginal();
        let x: Vec<f64> = u.iter().map(|&ui| t.inverse_cdf(ui)).collect();
        let consts = LogConsts::new(self.nu, self.dim(), self.chol.log_det());
        consts.row(&self.chol, &x, x.iter().map(|&xi| consts.log_f1(xi)).sum())
    }

    pub(super) fn sample<R: Rng + ?Sized>(&self, b: usize, rng: &mut R) -> Matrix<f64> {
        let d = self.dim();
        let t = self.marginal();
        let chi = ChiSquared::new(self.nu).expect("validated nu");
        let mut out = Matrix::zeros(b, d);
        let mut z = vec![0.0; d];
        for r in 0..b {
            for zi in z.iter_mut() {
                *zi = StandardNormal.sample(rng);
            }
            let w: f64 = chi.sample(rng);
            let s = (self.nu / w).sqrt();
            let y = self.chol.mul_lower(&z);
            for (c, yi) in y.iter().enumerate() {
                out[(r, c)] = interior(t.cdf(yi * s));
            }
        }
        out
    }

    /// Conditional law of the last `d - d1` coordinates given the first `d1`:
    /// a t distribution with location `R21 R11⁻¹ x1`, dispersion
    /// `(ν + x1ᵀR11⁻¹x1)/(ν + d1) · (R22 − R21 R11⁻¹ R12)` and `ν + d1` degrees
    /// of freedom, mapped back through the `t_ν` marginal.
    pub(super) fn conditional_sample<R: Rng + ?Sized>(
        &self,
        u_cond: &[f64],
        b: usize,
        rng: &mut R,
    ) -> Result<Matrix<f64>> {
        let d = self.dim();
        let d1 = u_cond.len();
        let d2 = d - d1;
        let t = self.marginal();
        let x1: Vec<f64> = u_cond.iter().map(|&u| t.inverse_cdf(u)).collect();
        let first: Vec<usize> = (0..d1).collect();
        let rest: Vec<usize> = (d1..d).collect();
        let r11 = self.corr.submatrix(&first, &first);
        let r21 = self.corr.submatrix(&rest, &first);
        let r22 = self.corr.submatrix(&rest, &rest);
        let c11 = Cholesky::new(&r11)
            .ok_or_else(|| Error::NotSpd("conditioning block is not positive definite".into()))?;
        let alpha = c11.solve(&x1);
        let mu = r21.matvec(&alpha);
        let q1 = crate::linalg::dot(&x1, &alpha);
        // R21 R11⁻¹ R12 column by column
        let mut schur = r22.clone();
        for j in 0..d2 {
            let col = c11.solve(&r21.row(j).to_vec());
            for i in 0..d2 {
                schur[(i, j)] -= crate::linalg::dot(r21.row(i), &col);
            }
        }
        schur.symmetrize();
        let cs = Cholesky::new(&schur).ok_or_else(|| {
            Error::NotSpd("conditional dispersion is not positive definite".into())
        })?;
        let df = self.nu + d1 as f64;
        let scale = ((self.nu + q1) / df).sqrt();
        let chi = ChiSquared::new(df).expect("positive df");
        let mut out = Matrix::zeros(b, d2);
        let mut z = vec![0.0; d2];
        for r in 0..b {
            for zi in z.iter_mut() {
                *zi = StandardNormal.sample(rng);
            }
            let w: f64 = chi.sample(rng);
            let s = scale * (df / w).sqrt();
            let y = cs.mul_lower(&z);
            for c in 0..d2 {
                out[(r, c)] = interior(t.cdf(mu[c] + s * y[c]));
            }
        }
        Ok(out)
    }
}

fn interior(u: f64) -> f64 {
    u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

struct LogConsts {
    nu: f64,
    d: f64,
    joint: f64,
    uni: f64,
}

impl LogConsts {
    fn new(nu: f64, d: usize, log_det: f64) -> Self {
        let d = d as f64;
        let lnpi = std::f64::consts::PI.ln();
        Self {
            nu,
            d,
            joint: ln_gamma((nu + d) / 2.0)
                - ln_gamma(nu / 2.0)
                - 0.5 * d * (nu.ln() + lnpi)
                - 0.5 * log_det,
            uni: ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0) - 0.5 * (nu.ln() + lnpi),
        }
    }

    fn log_f1(&self, x: f64) -> f64 {
        self.uni - 0.5 * (self.nu + 1.0) * (x * x / self.nu).ln_1p()
    }

    fn row(&self, chol: &Cholesky<f64>, x: &[f64], sum_log_f1: f64) -> f64 {
        let y = chol.forward(x);
        let q: f64 = y.iter().map(|v| v * v).sum();
        self.joint - 0.5 * (self.nu + self.d) * (q / self.nu).ln_1p() - sum_log_f1
    }
}

/// Nearest correlation by eigenvalue clipping at `EIGEN_FLOOR` and rescaling
/// to unit diagonal. The flag reports whether clipping happened.
pub fn project_correlation(m: &Matrix<f64>) -> (Matrix<f64>, bool) {
    let eig = SymEigen::new(m);
    let clipped = eig.min() < EIGEN_FLOOR;
    let mut out = if clipped {
        eig.map(|l| l.max(EIGEN_FLOOR))
    } else {
        m.clone()
    };
    let d = out.rows();
    let s: Vec<f64> = (0..d).map(|i| out[(i, i)].sqrt()).collect();
    for i in 0..d {
        for j in 0..d {
            out[(i, j)] = if i == j {
                1.0
            } else {
                out[(i, j)] / (s[i] * s[j])
            };
        }
    }
    out.symmetrize();
    (out, clipped)
}

/// Number of log-spaced candidate values of `ν` in `[NU_MIN, NU_MAX]`.
pub const NU_LADDER_LEN: usize = 128;

pub fn nu_ladder(k: usize) -> f64 {
    let frac = k as f64 / (NU_LADDER_LEN - 1) as f64;
    (NU_MIN.ln() + frac * (NU_MAX / NU_MIN).ln()).exp()
}

/// Per-`ν` values needed by the likelihood at a set of levels: the `t_ν`
/// quantiles and their univariate log densities.
#[derive(Debug)]
struct LevelValues {
    q: Vec<f64>,
    log_f1: Vec<f64>,
}

impl LevelValues {
    fn compute(levels: impl Iterator<Item = f64>, nu: f64) -> Self {
        let t = StudentsT::new(0.0, 1.0, nu).expect("nu in bracket");
        let consts = LogConsts::new(nu, 1, 0.0);
        let q: Vec<f64> = levels.map(|u| t.inverse_cdf(u)).collect();
        let log_f1 = q.iter().map(|&x| consts.log_f1(x)).collect();
        Self { q, log_f1 }
    }
}

/// Lazily filled table of `t_ν` quantiles at the levels `r / denom`,
/// `r = 1, …, denom - 1`, for every ladder value of `ν`. Pseudo-observations
/// from empirical marginals fitted on `denom - 1` points all lie on these
/// levels, so one table serves every t fit of a rolling-window day.
#[derive(Debug)]
pub struct TQuantileTable {
    denom: usize,
    cache: Vec<OnceLock<Arc<LevelValues>>>,
}

impl TQuantileTable {
    pub fn new(denom: usize) -> Self {
        assert!(denom >= 2, "quantile table needs at least one level");
        Self {
            denom,
            cache: (0..NU_LADDER_LEN).map(|_| OnceLock::new()).collect(),
        }
    }

    pub fn denom(&self) -> usize {
        self.denom
    }

    fn get(&self, k: usize) -> Arc<LevelValues> {
        self.cache[k]
            .get_or_init(|| {
                let den = self.denom as f64;
                // index 0 is unused so that level r sits at index r
                let levels = std::iter::once(0.5).chain((1..self.denom).map(|r| r as f64 / den));
                Arc::new(LevelValues::compute(levels, nu_ladder(k)))
            })
            .clone()
    }

    /// Level index of every entry, or `None` if some entry is off the grid.
    fn index_of(&self, data: &PseudoSample) -> Option<Vec<u32>> {
        let den = self.denom as f64;
        data.as_matrix()
            .as_slice()
            .iter()
            .map(|&u| {
                let r = (u * den).round();
                (r >= 1.0 && r < den && r / den == u).then_some(r as u32)
            })
            .collect()
    }
}

enum Levels<'a> {
    Table(&'a TQuantileTable),
    Local(Vec<f64>, Vec<Option<Arc<LevelValues>>>),
}

impl Levels<'_> {
    fn get(&mut self, k: usize) -> Arc<LevelValues> {
        match self {
            Levels::Table(t) => t.get(k),
            Levels::Local(values, memo) => memo[k]
                .get_or_insert_with(|| {
                    Arc::new(LevelValues::compute(values.iter().copied(), nu_ladder(k)))
                })
                .clone(),
        }
    }
}

/// Tau inversion `ρ = sin(πτ/2)`, correlation projection, then the profile
/// likelihood over the `ν` ladder. Returns the model, its log-likelihood and
/// warnings.
pub(super) fn fit(
    data: &PseudoSample,
    tau: &Matrix<f64>,
    table: Option<&TQuantileTable>,
) -> Result<(TCopula, f64, Vec<FitWarning>)> {
    let d = data.dim();
    let n = data.len();
    if n < 10 * d {
        return Err(Error::InsufficientData {
            what: "t copula observations (10 per dimension)",
            required: 10 * d,
            actual: n,
        });
    }
    if tau.rows() != d || tau.cols() != d {
        return Err(Error::Dimension {
            expected: d,
            actual: tau.rows(),
        });
    }
    if !tau.is_finite() {
        return Err(Error::Fit("constant pseudo-observation column".into()));
    }
    let half_pi = std::f64::consts::FRAC_PI_2;
    let rho = Matrix::from_fn(d, d, |i, j| {
        if i == j {
            1.0
        } else {
            (half_pi * tau[(i, j)]).sin()
        }
    });
    let (corr, clipped) = project_correlation(&rho);
    let mut warnings = Vec::new();
    if clipped {
        warnings.push(FitWarning::ProjectedToPd);
    }
    let chol = Cholesky::new(&corr).ok_or_else(|| Error::Fit("projection failed".into()))?;
    let log_det = chol.log_det();

    let (mut levels, index) = match table.and_then(|t| t.index_of(data).map(|i| (t, i))) {
        Some((t, idx)) => (Levels::Table(t), idx),
        None => {
            let flat = data.as_matrix().as_slice();
            let mut values = flat.to_vec();
            values.sort_by(f64::total_cmp);
            values.dedup();
            let idx = flat
                .iter()
                .map(|v| values.partition_point(|w| w < v) as u32)
                .collect();
            (Levels::Local(values, vec![None; NU_LADDER_LEN]), idx)
        }
    };

    let mut x = vec![0.0; d];
    let mut loglik = |k: usize| {
        let nu = nu_ladder(k);
        let lv = levels.get(k);
        let consts = LogConsts::new(nu, d, log_det);
        let mut total = 0.0;
        for r in 0..n {
            let mut s1 = 0.0;
            for (xi, &l) in x.iter_mut().zip(&index[r * d..(r + 1) * d]) {
                *xi = lv.q[l as usize];
                s1 += lv.log_f1[l as usize];
            }
            total += consts.row(&chol, &x, s1);
        }
        total
    };
    let (k, ll) = golden_section_max_discrete(&mut loglik, NU_LADDER_LEN);
    if !ll.is_finite() {
        return Err(Error::Fit("t copula likelihood is not finite".into()));
    }
    if k == NU_LADDER_LEN - 1 {
        warnings.push(FitWarning::GaussianLike);
    }
    let nu = nu_ladder(k);
    Ok((TCopula { corr, nu, chol }, ll, warnings))
}

/// Golden-section search over the indices `0..len` of a unimodal sequence,
/// finishing with an exhaustive scan of the last few indices. The two ends
/// are always evaluated.
fn golden_section_max_discrete(f: &mut impl FnMut(usize) -> f64, len: usize) -> (usize, f64) {
    let mut memo: Vec<Option<f64>> = vec![None; len];
    let mut eval = |k: usize, memo: &mut Vec<Option<f64>>| {
        *memo[k].get_or_insert_with(|| {
            let v = f(k);
            if v.is_nan() {
                f64::NEG_INFINITY
            } else {
                v
            }
        })
    };
    let (mut a, mut b) = (0usize, len - 1);
    while b - a > 3 {
        let span = (b - a) as f64;
        let c = b - (0.618_033_988_749_894_9 * span).round() as usize;
        let d = a + (0.618_033_988_749_894_9 * span).round() as usize;
        let (c, d) = if c < d { (c, d) } else { (c, c + 1) };
        if eval(c, &mut memo) >= eval(d, &mut memo) {
            b = d;
        } else {
            a = c;
        }
    }
    let mut best = (a, eval(a, &mut memo));
    for k in (a + 1..=b).chain([0, len - 1]) {
        let v = eval(k, &mut memo);
        if v > best.1 {
            best = (k, v);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_repairs_indefinite_input() {
        let m = Matrix::from_rows(&[[1.0, 0.9, 0.9], [0.9, 1.0, -0.9], [0.9, -0.9, 1.0]]);
        let (p, clipped) = project_correlation(&m);
        assert!(clipped);
        assert!(SymEigen::new(&p).min() > 0.0);
        for i in 0..3 {
            assert_eq!(p[(i, i)], 1.0);
        }
        let ok = Matrix::from_rows(&[[1.0, 0.3], [0.3, 1.0]]);
        let (same, clipped) = project_correlation(&ok);
        assert!(!clipped);
        assert!((same[(0, 1)] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn uncorrelated_t_density_at_median() {
        // identity correlation is not independence: c(½,…,½) has a closed form
        for (nu, d) in [(2.5, 2usize), (7.0, 4), (150.0, 3)] {
            let c = TCopula::new(Matrix::identity(d), nu).unwrap();
            let df = d as f64;
            let expect = ln_gamma((nu + df) / 2.0) + (df - 1.0) * ln_gamma(nu / 2.0)
                - df * ln_gamma((nu + 1.0) / 2.0);
            assert!((c.log_density(&vec![0.5; d]) - expect).abs() < 1e-12);
        }
        let c = TCopula::new(Matrix::identity(4), 1e7).unwrap();
        assert!(c.log_density(&[0.5; 4]).abs() < 1e-5);
    }
}

#[cfg(test)]
mod ladder_tests {
    use super::*;

    #[test]
    fn discrete_golden_finds_peak() {
        for peak in [0usize, 1, 17, 64, 126, 127] {
            let mut calls = 0;
            let (k, _) = golden_section_max_discrete(
                &mut |k| {
                    calls += 1;
                    -((k as f64) - peak as f64).powi(2)
                },
                NU_LADDER_LEN,
            );
            assert_eq!(k, peak);
            assert!(calls <= 16, "{calls} evaluations");
        }
        assert!((nu_ladder(0) - NU_MIN).abs() < 1e-12);
        assert!((nu_ladder(NU_LADDER_LEN - 1) - NU_MAX).abs() < 1e-9);
    }
}
