use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, Open01};

use super::{FitWarning, PseudoSample};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::optim::{brent_root, golden_section_max};

pub const CLAYTON_MIN: f64 = 1e-4;
pub const CLAYTON_MAX: f64 = 50.0;
pub const GUMBEL_MIN: f64 = 1.0;
pub const GUMBEL_MAX: f64 = 50.0;

/// Exchangeable Clayton copula, generator `φ(u) = u^{-θ} − 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClaytonCopula {
    dim: usize,
    theta: f64,
}

impl ClaytonCopula {
    pub fn new(dim: usize, theta: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidArgument("clayton copula needs d ≥ 2".into()));
        }
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "clayton theta {theta} must be positive"
            )));
        }
        Ok(Self { dim, theta })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub(super) fn log_density(&self, u: &[f64]) -> f64 {
        let ln_u: Vec<f64> = u.iter().map(|v| v.ln()).collect();
        clayton_log_density_ln(self.theta, &ln_u, clayton_norm(self.theta, self.dim))
    }

    pub(super) fn sample<R: Rng + ?Sized>(&self, b: usize, rng: &mut R) -> Matrix<f64> {
        let inv = 1.0 / self.theta;
        let frailty = Gamma::new(inv, 1.0).expect("positive shape");
        let mut out = Matrix::zeros(b, self.dim);
        for r in 0..b {
            let v: f64 = frailty.sample(rng);
            for c in 0..self.dim {
                let e: f64 = Exp1.sample(rng);
                out[(r, c)] = interior((-(e / v).ln_1p() * inv).exp());
            }
        }
        out
    }

    /// Sequential inversion: given `k` conditioning coordinates with
    /// `S = Σ φ(u_i)`, the next coordinate has conditional distribution
    /// `((1 + S + φ(v)) / (1 + S))^{-(1/θ + k)}`, inverted in closed form.
    pub(super) fn conditional_sample<R: Rng + ?Sized>(
        &self,
        u_cond: &[f64],
        b: usize,
        rng: &mut R,
    ) -> Matrix<f64> {
        let theta = self.theta;
        let phi = |u: f64| (-theta * u.ln()).exp_m1();
        let s0: f64 = u_cond.iter().map(|&u| phi(u)).sum();
        let d2 = self.dim - u_cond.len();
        let mut out = Matrix::zeros(b, d2);
        for r in 0..b {
            let mut s = s0;
            for c in 0..d2 {
                let k = (u_cond.len() + c) as f64;
                let a = 1.0 / theta + k;
                let w: f64 = Open01.sample(rng);
                let phi_v = (1.0 + s) * (-w.ln() / a).exp_m1();
                let v = interior((-phi_v.ln_1p() / theta).exp());
                out[(r, c)] = v;
                s += phi(v);
            }
        }
        out
    }
}

fn clayton_norm(theta: f64, d: usize) -> f64 {
    (0..d).map(|k| (k as f64 * theta).ln_1p()).sum()
}

// ln c(u) from ln u; the generator sum is evaluated as ln1p(Σ expm1(·)) for
// small exponents and by log-sum-exp otherwise
fn clayton_log_density_ln(theta: f64, ln_u: &[f64], norm: f64) -> f64 {
    let d = ln_u.len() as f64;
    let sum_ln: f64 = ln_u.iter().sum();
    let amax = ln_u.iter().map(|l| -theta * l).fold(0.0, f64::max);
    let log_gen = if amax < 1.0 {
        ln_u.iter()
            .map(|l| (-theta * l).exp_m1())
            .sum::<f64>()
            .ln_1p()
    } else {
        let s: f64 = ln_u.iter().map(|l| (-theta * l - amax).exp()).sum();
        amax + (s - (d - 1.0) * (-amax).exp()).ln()
    };
    norm - (theta + 1.0) * sum_ln - (1.0 / theta + d) * log_gen
}

/// Bivariate Gumbel copula `C(u,v) = exp(−((−ln u)^θ + (−ln v)^θ)^{1/θ})`.
#[derive(Clone, Debug, PartialEq)]
pub struct GumbelCopula {
    theta: f64,
}

impl GumbelCopula {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta >= 1.0) || !theta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "gumbel theta {theta} must be ≥ 1"
            )));
        }
        Ok(Self { theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub(super) fn log_density(&self, u: &[f64]) -> f64 {
        gumbel_log_density(self.theta, (-u[0].ln()).ln(), (-u[1].ln()).ln())
    }

    /// Marshall–Olkin with a positive stable frailty of index `1/θ`
    /// (Chambers–Mallows–Stuck / Kanter representation).
    pub(super) fn sample<R: Rng + ?Sized>(&self, b: usize, rng: &mut R) -> Matrix<f64> {
        let alpha = 1.0 / self.theta;
        let mut out = Matrix::zeros(b, 2);
        for r in 0..b {
            let v = if alpha == 1.0 {
                1.0
            } else {
                let w: f64 = Open01.sample(rng);
                let angle = std::f64::consts::PI * w;
                let e: f64 = Exp1.sample(rng);
                (alpha * angle).sin() / angle.sin().powf(1.0 / alpha)
                    * (((1.0 - alpha) * angle).sin() / e).powf((1.0 - alpha) / alpha)
            };
            for c in 0..2 {
                let e: f64 = Exp1.sample(rng);
                out[(r, c)] = interior((-(e / v).powf(alpha)).exp());
            }
        }
        out
    }

    /// Inverts `∂C/∂u (v | u) = w` for `v` by Brent's method on `ln(−ln v)`.
    pub(super) fn conditional_sample<R: Rng + ?Sized>(
        &self,
        u: f64,
        b: usize,
        rng: &mut R,
    ) -> Result<Matrix<f64>> {
        let theta = self.theta;
        let lx = (-u.ln()).ln();
        let mut out = Matrix::zeros(b, 1);
        for r in 0..b {
            let w: f64 = Open01.sample(rng);
            let target = w.ln();
            let g = |ly: f64| gumbel_log_h(theta, lx, ly) - target;
            let (mut lo, mut hi) = (-60.0, 8.0);
            while g(hi) > 0.0 && hi < 700.0 {
                lo = hi;
                hi += 16.0;
            }
            if g(lo) < 0.0 || g(hi) > 0.0 {
                return Err(Error::NonConvergence(format!(
                    "gumbel conditional bracket failed: theta {theta}, u {u}, w {w}"
                )));
            }
            let ly = brent_root(g, lo, hi, 1e-12, 200).map_err(|e| {
                Error::NonConvergence(format!(
                    "gumbel conditional (theta {theta}, u {u}, w {w}): {e}"
                ))
            })?;
            out[(r, 0)] = interior((-ly.exp()).exp());
        }
        Ok(out)
    }
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

// arguments are ln x and ln y with x = −ln u, y = −ln v
fn gumbel_log_density(theta: f64, lx: f64, ly: f64) -> f64 {
    let ls = log_sum_exp(theta * lx, theta * ly);
    let a = (ls / theta).exp();
    -a + lx.exp()
        + ly.exp()
        + (theta - 1.0) * (lx + ly)
        + (1.0 / theta - 2.0) * ls
        + (a + theta - 1.0).ln()
}

// ln ∂C/∂u = −A + x + (θ−1) ln x + (1/θ − 1) ln s
fn gumbel_log_h(theta: f64, lx: f64, ly: f64) -> f64 {
    let ls = log_sum_exp(theta * lx, theta * ly);
    -(ls / theta).exp() + lx.exp() + (theta - 1.0) * lx + (1.0 / theta - 1.0) * ls
}

fn interior(u: f64) -> f64 {
    u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Clayton fit by maximizing the log-likelihood over `ln θ`.
pub(super) fn fit_clayton(data: &PseudoSample) -> Result<(ClaytonCopula, f64, Vec<FitWarning>)> {
    let d = data.dim();
    let ln_u: Vec<f64> = data.as_matrix().as_slice().iter().map(|u| u.ln()).collect();
    let loglik = |theta: f64| {
        let norm = clayton_norm(theta, d);
        ln_u.chunks_exact(d)
            .map(|row| clayton_log_density_ln(theta, row, norm))
            .sum::<f64>()
    };
    let (lt, ll) = golden_section_max(
        |z| loglik(z.exp()),
        CLAYTON_MIN.ln(),
        CLAYTON_MAX.ln(),
        1e-4,
        200,
    );
    let theta = lt.exp().clamp(CLAYTON_MIN, CLAYTON_MAX);
    let mut warnings = Vec::new();
    if lt - CLAYTON_MIN.ln() < 1e-3 {
        warnings.push(FitWarning::AtLowerBound);
    } else if CLAYTON_MAX.ln() - lt < 1e-3 {
        warnings.push(FitWarning::AtUpperBound);
    }
    if !ll.is_finite() {
        return Err(Error::Fit("clayton likelihood is not finite".into()));
    }
    Ok((ClaytonCopula { dim: d, theta }, ll, warnings))
}

/// Gumbel fit by maximizing the log-likelihood over `ln θ`.
pub(super) fn fit_gumbel(data: &PseudoSample) -> Result<(GumbelCopula, f64, Vec<FitWarning>)> {
    if data.dim() != 2 {
        return Err(Error::InvalidArgument(
            "gumbel copula is only available in two dimensions".into(),
        ));
    }
    let llx: Vec<f64> = data
        .as_matrix()
        .as_slice()
        .iter()
        .map(|u| (-u.ln()).ln())
        .collect();
    let loglik = |theta: f64| {
        llx.chunks_exact(2)
            .map(|p| gumbel_log_density(theta, p[0], p[1]))
            .sum::<f64>()
    };
    let (lt, ll) = golden_section_max(|z| loglik(z.exp()), 0.0, GUMBEL_MAX.ln(), 1e-4, 200);
    let theta = lt.exp().clamp(GUMBEL_MIN, GUMBEL_MAX);
    let mut warnings = Vec::new();
    if lt < 1e-3 {
        warnings.push(FitWarning::AtLowerBound);
    } else if GUMBEL_MAX.ln() - lt < 1e-3 {
        warnings.push(FitWarning::AtUpperBound);
    }
    if !ll.is_finite() {
        return Err(Error::Fit("gumbel likelihood is not finite".into()));
    }
    Ok((GumbelCopula { theta }, ll, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;

    // C(u,v) for finite-difference checks
    fn gumbel_cdf(theta: f64, u: f64, v: f64) -> f64 {
        let s = (-u.ln()).powf(theta) + (-v.ln()).powf(theta);
        (-s.powf(1.0 / theta)).exp()
    }

    fn clayton_cdf(theta: f64, u: f64, v: f64) -> f64 {
        (u.powf(-theta) + v.powf(-theta) - 1.0).powf(-1.0 / theta)
    }

    #[test]
    fn densities_match_mixed_differences() {
        let h = 1e-4;
        let mixed = |c: &dyn Fn(f64, f64) -> f64, u: f64, v: f64| {
            (c(u + h, v + h) - c(u + h, v - h) - c(u - h, v + h) + c(u - h, v - h)) / (4.0 * h * h)
        };
        for &(u, v) in &[(0.3, 0.6), (0.8, 0.75), (0.1, 0.9)] {
            for theta in [1.3, 3.0] {
                let g = GumbelCopula::new(theta).unwrap();
                let fd = mixed(&|a, b| gumbel_cdf(theta, a, b), u, v);
                let an = g.log_density(&[u, v]).exp();
                assert!(
                    (an - fd).abs() < 1e-4 * fd.max(1.0),
                    "gumbel {theta} {u} {v}: {an} vs {fd}"
                );
                let c = ClaytonCopula::new(2, theta).unwrap();
                let fd = mixed(&|a, b| clayton_cdf(theta, a, b), u, v);
                assert!((c.log_density(&[u, v]).exp() - fd).abs() < 1e-4 * fd.max(1.0));
            }
        }
    }

    #[test]
    fn gumbel_h_matches_partial_derivative() {
        let theta = 2.5;
        let (u, v) = (0.4, 0.7);
        let h = 1e-6;
        let fd = (gumbel_cdf(theta, u + h, v) - gumbel_cdf(theta, u - h, v)) / (2.0 * h);
        let lh = gumbel_log_h(theta, (-u.ln()).ln(), (-v.ln()).ln());
        assert!((lh.exp() - fd).abs() < 1e-7);
    }

    #[test]
    fn clayton_density_near_independence_is_one() {
        let c = ClaytonCopula::new(3, 1e-4).unwrap();
        for u in [[0.1, 0.5, 0.9], [0.02, 0.3, 0.97]] {
            assert!((c.log_density(&u).exp() - 1.0).abs() < 1e-2);
        }
    }
}
