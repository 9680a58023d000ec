//! Bijections between SPD matrices and unconstrained half-vectorized
//! coordinates: the upper Cholesky factor and the symmetric matrix log.
//!
//! Every vech in the crate uses the same ordering: column-major over the
//! upper triangle, so position 0 is (0,0), 1 is (0,1), 2 is (1,1), 3 is
//! (0,2) and so on. With this layout the diagonal of an `n × n` matrix sits
//! at positions `k(k+3)/2`, i.e. 0, 2, 5, 9, 14, 20 for `n = 6`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix, SymEigen};
use crate::scalar::Real;

/// Coordinate system of a vech vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coord {
    Cholesky,
    #[serde(rename = "logmatrix")]
    LogMatrix,
}

impl Coord {
    pub fn name(self) -> &'static str {
        match self {
            Coord::Cholesky => "cholesky",
            Coord::LogMatrix => "logmatrix",
        }
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Coord {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cholesky" | "chol" => Ok(Coord::Cholesky),
            "logmatrix" | "log" | "logm" => Ok(Coord::LogMatrix),
            other => Err(Error::InvalidArgument(format!(
                "unknown coordinate system `{other}`"
            ))),
        }
    }
}

/// `n(n+1)/2`.
#[inline]
pub const fn vech_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Recovers `n` from a vech length, if `m` is triangular.
pub fn vech_dim(m: usize) -> Option<usize> {
    let mut n = 0;
    while vech_len(n) < m {
        n += 1;
    }
    (vech_len(n) == m).then_some(n)
}

/// Position of entry `(i, j)` (either order) in the vech.
#[inline]
pub fn vech_index(i: usize, j: usize) -> usize {
    let (r, c) = if i <= j { (i, j) } else { (j, i) };
    c * (c + 1) / 2 + r
}

/// Inverse of [`vech_index`]: the `(row, col)` with `row <= col` stored at `k`.
pub fn vech_position(k: usize) -> (usize, usize) {
    let mut c = 0;
    while vech_len(c + 1) <= k {
        c += 1;
    }
    (k - vech_len(c), c)
}

/// Vech positions holding diagonal entries.
pub fn diagonal_positions(n: usize) -> Vec<usize> {
    (0..n).map(|k| vech_index(k, k)).collect()
}

/// Vech positions holding off-diagonal entries.
pub fn off_diagonal_positions(n: usize) -> Vec<usize> {
    (0..vech_len(n))
        .filter(|&k| {
            let (i, j) = vech_position(k);
            i != j
        })
        .collect()
}

/// A value together with a warning flag raised by a numerical repair.
#[derive(Clone, Debug, PartialEq)]
pub struct Flagged<V> {
    pub value: V,
    pub flagged: bool,
}

impl<V> Flagged<V> {
    pub fn clean(value: V) -> Self {
        Self {
            value,
            flagged: false,
        }
    }

    pub fn map<U>(self, f: impl FnOnce(V) -> U) -> Flagged<U> {
        Flagged {
            value: f(self.value),
            flagged: self.flagged,
        }
    }
}

/// Symmetric positive-definite matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SpdMatrix<T> {
    inner: Matrix<T>,
}

impl<T: Real> SpdMatrix<T> {
    /// Validates symmetry (relative tolerance) and positive definiteness.
    /// The stored matrix is the symmetrized input.
    pub fn new(mut m: Matrix<T>) -> Result<Self> {
        if !m.is_square() || m.rows() == 0 {
            return Err(Error::NotSpd(format!("shape {}x{}", m.rows(), m.cols())));
        }
        if !m.is_finite() {
            return Err(Error::NotSpd("non-finite entry".into()));
        }
        let asym = m.asymmetry();
        if asym > T::symmetry_tol() {
            return Err(Error::NotSpd(format!("relative asymmetry {asym}")));
        }
        m.symmetrize();
        if Cholesky::new(&m).is_none() {
            let min = SymEigen::new(&m).min();
            return Err(Error::NotSpd(format!("minimum eigenvalue {min}")));
        }
        Ok(Self { inner: m })
    }

    /// Wraps a matrix that is SPD by construction (e.g. `PᵀP` or `Q exp(Λ) Qᵀ`).
    pub(crate) fn new_unchecked(mut m: Matrix<T>) -> Self {
        debug_assert!(m.is_square());
        m.symmetrize();
        Self { inner: m }
    }

    pub fn dim(&self) -> usize {
        self.inner.rows()
    }

    pub fn as_matrix(&self) -> &Matrix<T> {
        &self.inner
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.inner
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.inner[(i, j)]
    }

    pub fn eigen(&self) -> SymEigen<T> {
        SymEigen::new(&self.inner)
    }

    pub fn min_eigenvalue(&self) -> T {
        self.eigen().min()
    }

    pub fn cholesky(&self) -> Option<Cholesky<T>> {
        Cholesky::new(&self.inner)
    }

    /// Upper triangle (including the diagonal) in vech order.
    pub fn upper_vech(&self) -> Vec<T> {
        let n = self.dim();
        (0..vech_len(n))
            .map(|k| {
                let (i, j) = vech_position(k);
                self.inner[(i, j)]
            })
            .collect()
    }
}

/// Half-vectorized coordinates tagged with their coordinate system.
#[derive(Clone, Debug, PartialEq)]
pub struct VechVector<T> {
    coord: Coord,
    values: Vec<T>,
}

impl<T: Real> VechVector<T> {
    pub fn new(coord: Coord, values: Vec<T>) -> Result<Self> {
        if values.is_empty() || vech_dim(values.len()).is_none() {
            return Err(Error::InvalidArgument(format!(
                "vech length {} is not triangular",
                values.len()
            )));
        }
        Ok(Self { coord, values })
    }

    pub fn coord(&self) -> Coord {
        self.coord
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        vech_dim(self.values.len()).expect("validated at construction")
    }

    /// Symmetric matrix whose upper triangle is the vech.
    fn to_symmetric(&self) -> Matrix<T> {
        let n = self.dim();
        Matrix::from_fn(n, n, |i, j| self.values[vech_index(i, j)])
    }

    fn require(&self, coord: Coord) -> Result<()> {
        if self.coord != coord {
            return Err(Error::InvalidArgument(format!(
                "expected {coord} coordinates, got {}",
                self.coord
            )));
        }
        Ok(())
    }
}

/// Vech of the upper-triangular `P` with positive diagonal and `PᵀP = g`.
pub fn chol_vech<T: Real>(g: &SpdMatrix<T>) -> VechVector<T> {
    let l = g
        .cholesky()
        .expect("SpdMatrix invariant guarantees a Cholesky factor")
        .into_lower();
    let n = g.dim();
    // P = Lᵀ, so P[i][j] = L[j][i]
    let values = (0..vech_len(n))
        .map(|k| {
            let (i, j) = vech_position(k);
            l[(j, i)]
        })
        .collect();
    VechVector {
        coord: Coord::Cholesky,
        values,
    }
}

/// `PᵀP` from Cholesky coordinates. Non-positive diagonal entries are
/// replaced by their absolute value (zero is lifted to a tiny positive
/// value) and the result is flagged.
pub fn unvech_chol<T: Real>(x: &VechVector<T>) -> Result<Flagged<SpdMatrix<T>>> {
    x.require(Coord::Cholesky)?;
    let n = x.dim();
    let mut p = Matrix::zeros(n, n);
    for (k, &v) in x.values.iter().enumerate() {
        let (i, j) = vech_position(k);
        p[(i, j)] = v;
    }
    let scale = x.values.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let floor = if scale > T::zero() {
        scale * T::epsilon().sqrt()
    } else {
        T::epsilon().sqrt()
    };
    let mut flagged = false;
    for i in 0..n {
        let d = p[(i, i)];
        if !(d > T::zero()) {
            flagged = true;
            let a = d.abs();
            p[(i, i)] = if a > T::zero() { a } else { floor };
        }
    }
    Ok(Flagged {
        value: SpdMatrix::new_unchecked(p.gram()),
        flagged,
    })
}

/// Vech of the symmetric matrix logarithm. Eigenvalues below
/// `1e-12 · λ_max` are clamped to that floor and the result is flagged.
pub fn logm_vech<T: Real>(g: &SpdMatrix<T>) -> Flagged<VechVector<T>> {
    let eig = g.eigen();
    let floor = T::lit(1e-12) * eig.max();
    let flagged = eig.min() < floor;
    let log = eig.map(|l| l.max(floor).ln());
    let values = (0..vech_len(g.dim()))
        .map(|k| {
            let (i, j) = vech_position(k);
            log[(i, j)]
        })
        .collect();
    Flagged {
        value: VechVector {
            coord: Coord::LogMatrix,
            values,
        },
        flagged,
    }
}

/// Matrix exponential of the symmetric matrix encoded by a log-matrix vech.
pub fn expm_vech<T: Real>(a: &VechVector<T>) -> Result<SpdMatrix<T>> {
    a.require(Coord::LogMatrix)?;
    let eig = SymEigen::new(&a.to_symmetric());
    Ok(SpdMatrix::new_unchecked(eig.map(|l| l.exp())))
}

/// Dispatches to [`chol_vech`] or [`logm_vech`].
pub fn to_vech<T: Real>(g: &SpdMatrix<T>, coord: Coord) -> Flagged<VechVector<T>> {
    match coord {
        Coord::Cholesky => Flagged::clean(chol_vech(g)),
        Coord::LogMatrix => logm_vech(g),
    }
}

/// Dispatches to [`unvech_chol`] or [`expm_vech`] by the vector's tag.
pub fn from_vech<T: Real>(x: &VechVector<T>) -> Result<Flagged<SpdMatrix<T>>> {
    match x.coord {
        Coord::Cholesky => unvech_chol(x),
        Coord::LogMatrix => expm_vech(x).map(Flagged::clean),
    }
}
