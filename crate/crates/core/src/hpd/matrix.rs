use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::HpdError;
use crate::{CMatrix, CVector};

/// Relative tolerance for the Hermitian symmetry check.
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;

/// Returns `(m + mᴴ) / 2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Largest entrywise deviation from Hermitian symmetry, relative to the
/// largest entry magnitude.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst / scale
}

fn check_square(m: &CMatrix) -> Result<(), HpdError> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(HpdError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(())
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: DVector<f64>,
    /// Unit-norm eigenvectors stored column-wise, matching `values`.
    pub vectors: CMatrix,
}

impl HermitianEigen {
    /// Decomposes `m`. Only its Hermitian part is used.
    pub fn new(m: &CMatrix) -> Result<Self, HpdError> {
        check_square(m)?;
        let eig = hermitian_part(m).symmetric_eigen();
        if eig.eigenvalues.iter().any(|v| !v.is_finite())
            || eig.eigenvectors.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(HpdError::NonFiniteEigenvalue);
        }
        let n = eig.eigenvalues.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
        let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        Ok(Self { values, vectors })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn max(&self) -> f64 {
        self.values[0]
    }

    pub fn min(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Rebuilds `U f(Λ) Uᴴ`, re-symmetrized.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let mut scaled = self.vectors.clone();
        for (c, &lambda) in self.values.iter().enumerate() {
            let w = f(lambda);
            scaled.column_mut(c).scale_mut(w);
        }
        hermitian_part(&(scaled * self.vectors.adjoint()))
    }

    /// Like [`map`](Self::map) but requires every eigenvalue to be strictly
    /// positive.
    pub fn map_positive(&self, f: impl Fn(f64) -> f64) -> Result<CMatrix, HpdError> {
        let min = self.min();
        if min <= 0.0 {
            return Err(HpdError::NotPositiveDefinite { min_eigenvalue: min });
        }
        Ok(self.map(f))
    }

    /// Leading `k` eigenvectors as an `M × k` matrix.
    pub fn leading_vectors(&self, k: usize) -> CMatrix {
        self.vectors.columns(0, k).into_owned()
    }
}

/// Serialized form: `{dim, re, im}` with row-major entries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub dim: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl MatrixRecord {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let dim = m.nrows();
        let mut re = Vec::with_capacity(dim * dim);
        let mut im = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                re.push(m[(i, j)].re);
                im.push(m[(i, j)].im);
            }
        }
        Self { dim, re, im }
    }

    pub fn to_matrix(&self) -> Result<CMatrix, HpdError> {
        let n = self.dim * self.dim;
        if self.dim == 0 || self.re.len() != n || self.im.len() != n {
            return Err(HpdError::MalformedRecord {
                dim: self.dim,
                re: self.re.len(),
                im: self.im.len(),
            });
        }
        Ok(CMatrix::from_fn(self.dim, self.dim, |i, j| {
            Complex64::new(self.re[i * self.dim + j], self.im[i * self.dim + j])
        }))
    }
}

/// A Hermitian matrix, not necessarily definite. Elements of the tangent
/// space of the HPD manifold are of this type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRecord", into = "MatrixRecord")]
pub struct HermitianMatrix {
    inner: CMatrix,
}

/// Tangent vectors of the HPD manifold.
pub type TangentMatrix = HermitianMatrix;

impl HermitianMatrix {
    pub fn new(m: CMatrix) -> Result<Self, HpdError> {
        check_square(&m)?;
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(HpdError::NonFiniteEntry);
        }
        let defect = hermitian_defect(&m);
        if defect > HERMITIAN_TOLERANCE {
            return Err(HpdError::NotHermitian { defect });
        }
        Ok(Self {
            inner: hermitian_part(&m),
        })
    }

    pub(crate) fn from_raw(m: CMatrix) -> Self {
        Self {
            inner: hermitian_part(&m),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            inner: CMatrix::zeros(dim, dim),
        }
    }

    /// Rank-one outer product `z zᴴ`.
    pub fn outer(z: &CVector) -> Self {
        Self::from_raw(z * z.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.inner
    }

    pub fn into_matrix(self) -> CMatrix {
        self.inner
    }

    pub fn norm_fro(&self) -> f64 {
        self.inner.norm()
    }

    pub fn trace(&self) -> f64 {
        self.inner.trace().re
    }

    pub fn eigen(&self) -> Result<HermitianEigen, HpdError> {
        HermitianEigen::new(&self.inner)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            inner: self.inner.scale(s),
        }
    }

    /// Matrix exponential; always HPD.
    pub fn exp(&self) -> Result<HpdMatrix, HpdError> {
        let eig = self.eigen()?;
        Ok(HpdMatrix::from_raw(eig.map(f64::exp)))
    }

    /// Attempts to view this matrix as HPD.
    pub fn to_hpd(&self) -> Result<HpdMatrix, HpdError> {
        HpdMatrix::new(self.inner.clone())
    }
}

impl TryFrom<MatrixRecord> for HermitianMatrix {
    type Error = HpdError;

    fn try_from(r: MatrixRecord) -> Result<Self, Self::Error> {
        Self::new(r.to_matrix()?)
    }
}

impl From<HermitianMatrix> for MatrixRecord {
    fn from(m: HermitianMatrix) -> Self {
        MatrixRecord::from_matrix(&m.inner)
    }
}

/// A Hermitian positive-definite matrix: a point on the HPD manifold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRecord", into = "MatrixRecord")]
pub struct HpdMatrix {
    inner: CMatrix,
}

impl HpdMatrix {
    /// Validates Hermitian symmetry and strict positive definiteness.
    pub fn new(m: CMatrix) -> Result<Self, HpdError> {
        Self::with_loading(m, 0.0)
    }

    /// Adds `loading · I` before validation.
    pub fn with_loading(m: CMatrix, loading: f64) -> Result<Self, HpdError> {
        if !(loading.is_finite() && loading >= 0.0) {
            return Err(HpdError::InvalidLoading(loading));
        }
        let h = HermitianMatrix::new(m)?;
        let mut inner = h.inner;
        if loading > 0.0 {
            for i in 0..inner.nrows() {
                inner[(i, i)] += Complex64::new(loading, 0.0);
            }
        }
        let eig = HermitianEigen::new(&inner)?;
        let min = eig.min();
        if !(min > 0.0) {
            return Err(HpdError::NotPositiveDefinite { min_eigenvalue: min });
        }
        Ok(Self { inner })
    }

    /// Wraps a matrix known to be HPD (e.g. the output of a spectral
    /// function with positive image), re-symmetrizing it.
    pub(crate) fn from_raw(m: CMatrix) -> Self {
        Self {
            inner: hermitian_part(&m),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            inner: CMatrix::identity(dim, dim),
        }
    }

    pub fn from_diagonal(values: &[f64]) -> Result<Self, HpdError> {
        let n = values.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = Complex64::new(v, 0.0);
        }
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.inner
    }

    pub fn into_matrix(self) -> CMatrix {
        self.inner
    }

    pub fn as_hermitian(&self) -> HermitianMatrix {
        HermitianMatrix {
            inner: self.inner.clone(),
        }
    }

    pub fn trace(&self) -> f64 {
        self.inner.trace().re
    }

    pub fn norm_fro(&self) -> f64 {
        self.inner.norm()
    }

    pub fn eigen(&self) -> Result<HermitianEigen, HpdError> {
        HermitianEigen::new(&self.inner)
    }

    /// `vᴴ Γ v`, real by Hermitian symmetry.
    pub fn quadratic_form(&self, v: &CVector) -> f64 {
        (v.adjoint() * &self.inner * v)[(0, 0)].re
    }

    pub fn sqrt(&self) -> Result<Self, HpdError> {
        Ok(Self::from_raw(self.eigen()?.map_positive(f64::sqrt)?))
    }

    pub fn inv_sqrt(&self) -> Result<Self, HpdError> {
        Ok(Self::from_raw(self.eigen()?.map_positive(|x| 1.0 / x.sqrt())?))
    }

    pub fn inverse(&self) -> Result<Self, HpdError> {
        Ok(Self::from_raw(self.eigen()?.map_positive(|x| 1.0 / x)?))
    }

    /// Principal matrix logarithm, a tangent vector at the identity.
    pub fn log(&self) -> Result<HermitianMatrix, HpdError> {
        Ok(HermitianMatrix::from_raw(self.eigen()?.map_positive(f64::ln)?))
    }

    /// Real matrix power `Γᵗ`.
    pub fn powf(&self, t: f64) -> Result<Self, HpdError> {
        Ok(Self::from_raw(self.eigen()?.map_positive(|x| x.powf(t))?))
    }

    /// Congruence `Aᴴ Γ A` for an invertible `A`.
    pub fn congruence(&self, a: &CMatrix) -> Result<Self, HpdError> {
        if a.nrows() != self.dim() || a.ncols() != self.dim() {
            return Err(HpdError::DimensionMismatch {
                expected: self.dim(),
                found: a.nrows().max(a.ncols()),
            });
        }
        Self::new(hermitian_part(&(a.adjoint() * &self.inner * a)))
    }

    /// `c · Γ` for `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self, HpdError> {
        if !(c.is_finite() && c > 0.0) {
            return Err(HpdError::InvalidScale(c));
        }
        Ok(Self {
            inner: self.inner.scale(c),
        })
    }

    pub(crate) fn check_same_dim(&self, other: &Self) -> Result<(), HpdError> {
        if self.dim() != other.dim() {
            return Err(HpdError::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }
}

impl TryFrom<MatrixRecord> for HpdMatrix {
    type Error = HpdError;

    fn try_from(r: MatrixRecord) -> Result<Self, Self::Error> {
        Self::new(r.to_matrix()?)
    }
}

impl From<HpdMatrix> for MatrixRecord {
    fn from(m: HpdMatrix) -> Self {
        MatrixRecord::from_matrix(&m.inner)
    }
}
