//! Recursive mean estimators updated one observation at a time.

use super::geometry::geodesic_point;
use super::{HermitianMatrix, HpdError, HpdMatrix};
use crate::CVector;

/// `R_i = R^{1/2} (R^{-1/2} Γᵢ R^{-1/2})^{1/i} R^{1/2}`: move a fraction
/// `1/i` of the way along the geodesic from the running mean to the new
/// observation. `i = 1` returns the observation.
pub fn streaming_riemannian_update(r_prev: &HpdMatrix, g_i: &HpdMatrix, i: usize) -> Result<HpdMatrix, HpdError> {
    if i == 0 {
        return Err(HpdError::InvalidIndex(i));
    }
    r_prev.check_same_dim(g_i)?;
    if i == 1 {
        return Ok(g_i.clone());
    }
    geodesic_point(r_prev, g_i, 1.0 / i as f64)
}

/// `E_n = ((n−1)/n) E_{n−1} + (1/n) X`, where `n` counts the observations
/// consumed so far including `x`.
pub fn streaming_euclidean_update(
    e_prev: &HermitianMatrix,
    x: &HermitianMatrix,
    n: usize,
) -> Result<HermitianMatrix, HpdError> {
    if n == 0 {
        return Err(HpdError::InvalidIndex(n));
    }
    if e_prev.dim() != x.dim() {
        return Err(HpdError::DimensionMismatch {
            expected: e_prev.dim(),
            found: x.dim(),
        });
    }
    let nf = n as f64;
    let m = e_prev.as_matrix().scale((nf - 1.0) / nf) + x.as_matrix().scale(1.0 / nf);
    Ok(HermitianMatrix::from_raw(m))
}

/// Running affine-invariant mean, starting from the identity.
#[derive(Debug, Clone)]
pub struct RiemannianMeanTracker {
    mean: HpdMatrix,
    count: usize,
}

impl RiemannianMeanTracker {
    pub fn new(dim: usize) -> Self {
        Self {
            mean: HpdMatrix::identity(dim),
            count: 0,
        }
    }

    pub fn push(&mut self, g: &HpdMatrix) -> Result<&HpdMatrix, HpdError> {
        let next = streaming_riemannian_update(&self.mean, g, self.count + 1)?;
        self.mean = next;
        self.count += 1;
        Ok(&self.mean)
    }

    pub fn mean(&self) -> &HpdMatrix {
        &self.mean
    }

    pub fn count(&self) -> usize {
        self.count
    }
}

/// Running arithmetic mean of rank-1 terms `z zᴴ`.
#[derive(Debug, Clone)]
pub struct EuclideanMeanTracker {
    mean: HermitianMatrix,
    count: usize,
}

impl EuclideanMeanTracker {
    pub fn new(dim: usize) -> Self {
        Self {
            mean: HermitianMatrix::zeros(dim),
            count: 0,
        }
    }

    pub fn push_outer(&mut self, z: &CVector) -> Result<&HermitianMatrix, HpdError> {
        self.push(&HermitianMatrix::outer(z))
    }

    pub fn push(&mut self, x: &HermitianMatrix) -> Result<&HermitianMatrix, HpdError> {
        self.mean = streaming_euclidean_update(&self.mean, x, self.count + 1)?;
        self.count += 1;
        Ok(&self.mean)
    }

    pub fn mean(&self) -> &HermitianMatrix {
        &self.mean
    }

    pub fn count(&self) -> usize {
        self.count
    }
}
