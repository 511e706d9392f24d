use nalgebra::linalg::{Cholesky, Schur};
use nalgebra::Dyn;
use serde::{Deserialize, Serialize};

use super::{threshold_count, BeamError, BeamformerKind, MeanKind, SubspaceDimRule};
use crate::array::ArrayGeometry;
use crate::hpd::{hermitian_part, HermitianEigen, HpdMatrix};
use crate::{CMatrix, CVector, Complex64};

/// Steering vectors for a fixed set of look directions, stored as the
/// columns of an `M × G` matrix.
#[derive(Debug, Clone)]
pub struct SteeringGrid {
    thetas: Vec<f64>,
    vectors: CMatrix,
    wavelength: f64,
}

impl SteeringGrid {
    pub fn new(geom: &ArrayGeometry, thetas: Vec<f64>, wavelength: f64) -> Result<Self, BeamError> {
        if thetas.is_empty() {
            return Err(BeamError::EmptyGrid);
        }
        if thetas.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(BeamError::InvalidGrid("angles must be strictly increasing".into()));
        }
        let mut vectors = CMatrix::zeros(geom.len(), thetas.len());
        for (i, &t) in thetas.iter().enumerate() {
            vectors.set_column(i, &geom.steering_vector(t, wavelength)?.entries);
        }
        Ok(Self {
            thetas,
            vectors,
            wavelength,
        })
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn vectors(&self) -> &CMatrix {
        &self.vectors
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn steering(&self, i: usize) -> CVector {
        self.vectors.column(i).into_owned()
    }
}

/// Beamformer output power over a grid of look directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamPattern {
    /// Radians, strictly increasing.
    pub thetas: Vec<f64>,
    pub power: Vec<f64>,
    pub kind: BeamformerKind,
    pub mean_kind: Option<MeanKind>,
}

impl BeamPattern {
    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    /// Index of the grid point closest to `theta`.
    pub fn nearest_index(&self, theta: f64) -> Option<usize> {
        (0..self.len()).min_by(|&a, &b| {
            (self.thetas[a] - theta)
                .abs()
                .total_cmp(&(self.thetas[b] - theta).abs())
        })
    }

    /// Pattern value at the grid point closest to `theta`.
    pub fn value_at(&self, theta: f64) -> Option<f64> {
        self.nearest_index(theta).map(|i| self.power[i])
    }

    pub fn power_db(&self) -> Vec<f64> {
        self.power.iter().map(|p| 10.0 * p.max(1e-300).log10()).collect()
    }
}

#[derive(Debug, Clone)]
enum Form {
    /// `dᴴ Γ d`.
    Quadratic(CMatrix),
    /// `‖Uᴴ d‖²` for orthonormal `U`.
    Projection(CMatrix),
    /// `1 / (dᴴ Γ⁻¹ d)`.
    InverseQuadratic(Cholesky<Complex64, Dyn>),
}

/// A beamformer ready to be evaluated on any steering grid.
#[derive(Debug, Clone)]
pub struct Beamformer {
    kind: BeamformerKind,
    mean_kind: Option<MeanKind>,
    dim: usize,
    form: Form,
}

fn check_subspace_dim(n_d: usize, m: usize) -> Result<(), BeamError> {
    if n_d == 0 || n_d >= m {
        return Err(BeamError::InvalidSubspaceDim { n_d, m });
    }
    Ok(())
}

/// Eigenvectors of a general complex matrix for its `k` eigenvalues of
/// largest modulus, together with all eigenvalue moduli (descending).
fn leading_eigenvectors_general(p: &CMatrix, k: usize) -> (CMatrix, Vec<f64>) {
    let n = p.nrows();
    let (q, t) = Schur::new(p.clone()).unpack();
    let scale = t.norm().max(f64::MIN_POSITIVE);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| t[(b, b)].norm().total_cmp(&t[(a, a)].norm()));
    let moduli: Vec<f64> = order.iter().map(|&i| t[(i, i)].norm()).collect();
    let mut out = CMatrix::zeros(n, k);
    for (c, &idx) in order.iter().take(k).enumerate() {
        // Back substitution on (T − λI) y = 0 with y[idx] = 1.
        let lambda = t[(idx, idx)];
        let mut y = CVector::zeros(n);
        y[idx] = Complex64::new(1.0, 0.0);
        for j in (0..idx).rev() {
            let s: Complex64 = (j + 1..=idx).map(|l| t[(j, l)] * y[l]).sum();
            let den = t[(j, j)] - lambda;
            y[j] = if den.norm() <= 1e-12 * scale {
                Complex64::new(0.0, 0.0)
            } else {
                -s / den
            };
        }
        let v = &q * y;
        let nv = v.norm();
        out.set_column(c, &v.unscale(nv));
    }
    (out, moduli)
}

fn orthonormal_basis(v: &CMatrix) -> CMatrix {
    let k = v.ncols();
    let q = v.clone().qr().q();
    q.columns(0, k).into_owned()
}

impl Beamformer {
    /// Delay-and-sum: `P(θ) = dᴴ Γ d`.
    pub fn ds(g: &HpdMatrix) -> Self {
        Self {
            kind: BeamformerKind::Ds,
            mean_kind: None,
            dim: g.dim(),
            form: Form::Quadratic(g.as_matrix().clone()),
        }
    }

    /// Subspace beamformer: power of the steering vector projected on the
    /// leading `n_d` eigenvectors of `g`.
    pub fn sbsp(g: &HpdMatrix, n_d: usize) -> Result<Self, BeamError> {
        check_subspace_dim(n_d, g.dim())?;
        let u = g.eigen()?.leading_vectors(n_d);
        Ok(Self {
            kind: BeamformerKind::Sbsp,
            mean_kind: None,
            dim: g.dim(),
            form: Form::Projection(u),
        })
    }

    /// MVDR: `P(θ) = 1 / (dᴴ Γ⁻¹ d)`, solved through a Cholesky factor.
    pub fn mvdr(g: &HpdMatrix) -> Result<Self, BeamError> {
        let chol = Cholesky::new(g.as_matrix().clone()).ok_or(crate::hpd::HpdError::NotPositiveDefinite {
            min_eigenvalue: g.eigen().map(|e| e.min()).unwrap_or(f64::NAN),
        })?;
        Ok(Self {
            kind: BeamformerKind::Mvdr,
            mean_kind: None,
            dim: g.dim(),
            form: Form::InverseQuadratic(chol),
        })
    }

    /// Intersection beamformer. Each segment contributes the projector on
    /// its leading `per_segment_dims[i]` eigenvectors; the projectors are
    /// multiplied in segment order and the leading eigenvectors of the
    /// product, selected by `final_rule` on the eigenvalue moduli, span the
    /// returned subspace. With `symmetrized` the Hermitian part of the
    /// product (the average of the forward and reversed products) is used.
    pub fn intersection(
        segments: &[HpdMatrix],
        per_segment_dims: &[usize],
        final_rule: SubspaceDimRule,
        symmetrized: bool,
    ) -> Result<Self, BeamError> {
        let first = segments.first().ok_or(BeamError::NoSegments)?;
        let m = first.dim();
        if per_segment_dims.len() != segments.len() {
            return Err(BeamError::InvalidConfig(format!(
                "{} subspace dimensions for {} segments",
                per_segment_dims.len(),
                segments.len()
            )));
        }
        let mut product = CMatrix::identity(m, m);
        for (g, &k) in segments.iter().zip(per_segment_dims) {
            if g.dim() != m {
                return Err(BeamError::DimensionMismatch {
                    expected: m,
                    found: g.dim(),
                });
            }
            check_subspace_dim(k, m)?;
            let v = g.eigen()?.leading_vectors(k);
            product *= &v * v.adjoint();
        }
        let u = if symmetrized {
            let eig = HermitianEigen::new(&hermitian_part(&product))?;
            let moduli: Vec<f64> = {
                let mut a: Vec<f64> = eig.values.iter().map(|v| v.abs()).collect();
                a.sort_by(|x, y| y.total_cmp(x));
                a
            };
            let n_d = threshold_count(&moduli, final_rule);
            // Order by modulus, matching the non-symmetric path.
            let mut idx: Vec<usize> = (0..m).collect();
            idx.sort_by(|&a, &b| eig.values[b].abs().total_cmp(&eig.values[a].abs()));
            let mut v = CMatrix::zeros(m, n_d);
            for (c, &i) in idx.iter().take(n_d).enumerate() {
                v.set_column(c, &eig.vectors.column(i));
            }
            v
        } else {
            let (_, moduli) = leading_eigenvectors_general(&product, 0);
            let n_d = threshold_count(&moduli, final_rule);
            let (v, _) = leading_eigenvectors_general(&product, n_d);
            orthonormal_basis(&v)
        };
        Ok(Self {
            kind: BeamformerKind::Intersection,
            mean_kind: None,
            dim: m,
            form: Form::Projection(u),
        })
    }

    pub fn with_mean_kind(mut self, mean_kind: MeanKind) -> Self {
        self.mean_kind = Some(mean_kind);
        self
    }

    pub fn kind(&self) -> BeamformerKind {
        self.kind
    }

    /// Orthonormal basis of the signal subspace for projection beamformers.
    pub fn subspace(&self) -> Option<&CMatrix> {
        match &self.form {
            Form::Projection(u) => Some(u),
            _ => None,
        }
    }

    /// Output power for every direction of `grid`.
    pub fn evaluate(&self, grid: &SteeringGrid) -> Result<BeamPattern, BeamError> {
        if grid.dim() != self.dim {
            return Err(BeamError::DimensionMismatch {
                expected: grid.dim(),
                found: self.dim,
            });
        }
        let d = grid.vectors();
        let power: Vec<f64> = match &self.form {
            Form::Quadratic(g) => {
                let gd = g * d;
                column_dots(d, &gd).into_iter().map(|v| v.max(0.0)).collect()
            }
            Form::Projection(u) => {
                let ud = u.adjoint() * d;
                ud.column_iter().map(|c| c.norm_squared()).collect()
            }
            Form::InverseQuadratic(chol) => {
                let x = chol.solve(d);
                column_dots(d, &x).into_iter().map(|v| 1.0 / v).collect()
            }
        };
        Ok(BeamPattern {
            thetas: grid.thetas().to_vec(),
            power,
            kind: self.kind,
            mean_kind: self.mean_kind,
        })
    }
}

/// Real parts of `aᵢᴴ bᵢ` for matching columns.
fn column_dots(a: &CMatrix, b: &CMatrix) -> Vec<f64> {
    a.column_iter()
        .zip(b.column_iter())
        .map(|(x, y)| x.dotc(&y).re)
        .collect()
}

pub fn ds_beam_pattern(g: &HpdMatrix, grid: &SteeringGrid) -> Result<BeamPattern, BeamError> {
    Beamformer::ds(g).evaluate(grid)
}

pub fn sbsp_beam_pattern(g: &HpdMatrix, n_d: usize, grid: &SteeringGrid) -> Result<BeamPattern, BeamError> {
    Beamformer::sbsp(g, n_d)?.evaluate(grid)
}

pub fn mvdr_beam_pattern(g: &HpdMatrix, grid: &SteeringGrid) -> Result<BeamPattern, BeamError> {
    Beamformer::mvdr(g)?.evaluate(grid)
}

/// Intersection pattern with the final dimension fixed to `n_d`.
pub fn intersection_beam_pattern(
    segments: &[HpdMatrix],
    n_d: usize,
    per_segment_dims: &[usize],
    grid: &SteeringGrid,
) -> Result<BeamPattern, BeamError> {
    Beamformer::intersection(segments, per_segment_dims, SubspaceDimRule::Oracle(n_d), false)?.evaluate(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hpd::random::random_hpd;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const LAMBDA: f64 = 0.0878;

    fn setup(m: usize) -> (ArrayGeometry, SteeringGrid) {
        let geom = ArrayGeometry::ula([0.0; 3], 0.0436, m, [1.0, 0.0, 0.0]).unwrap();
        let thetas: Vec<f64> = (0..281).map(|i| (-70.0 + 0.5 * i as f64).to_radians()).collect();
        let grid = SteeringGrid::new(&geom, thetas, LAMBDA).unwrap();
        (geom, grid)
    }

    fn outer_plus(d: &CVector, eps: f64) -> HpdMatrix {
        let m = d.len();
        HpdMatrix::new(hermitian_part(&(d * d.adjoint() + CMatrix::identity(m, m).scale(eps)))).unwrap()
    }

    #[test]
    fn ds_identity_is_flat() {
        let (_, grid) = setup(6);
        let p = ds_beam_pattern(&HpdMatrix::identity(6), &grid).unwrap();
        assert!(p.power.iter().all(|v| (v - 6.0).abs() < 1e-12));
    }

    #[test]
    fn ds_matched_rank_one_peaks_at_source() {
        let (geom, grid) = setup(8);
        let theta0 = 20f64.to_radians();
        let d = geom.steering_vector(theta0, LAMBDA).unwrap().entries;
        let g = outer_plus(&d, 1e-9);
        let p = ds_beam_pattern(&g, &grid).unwrap();
        let i = p.nearest_index(theta0).unwrap();
        let (imax, vmax) = p
            .power
            .iter()
            .enumerate()
            .fold((0, 0.0), |a, (i, v)| if *v > a.1 { (i, *v) } else { a });
        assert_eq!(imax, i);
        assert_abs_diff_eq!(vmax, 64.0, epsilon = 1e-6);
    }

    #[test]
    fn sbsp_bounds_and_complement_identity() {
        let (geom, grid) = setup(6);
        let h = geom.steering_vector(0.4, LAMBDA).unwrap().entries;
        let g = outer_plus(&h, 1.0);
        let p = sbsp_beam_pattern(&g, 5, &grid).unwrap();
        let u_min = g.eigen().unwrap().vectors.column(5).into_owned();
        for (i, v) in p.power.iter().enumerate() {
            assert!(*v >= -1e-12 && *v <= 6.0 + 1e-9);
            let d = grid.steering(i);
            assert_abs_diff_eq!(*v, 6.0 - d.dotc(&u_min).norm_sqr(), epsilon = 1e-9);
        }
        assert!(matches!(
            sbsp_beam_pattern(&g, 6, &grid),
            Err(BeamError::InvalidSubspaceDim { .. })
        ));
        assert!(matches!(
            sbsp_beam_pattern(&g, 0, &grid),
            Err(BeamError::InvalidSubspaceDim { .. })
        ));
    }

    #[test]
    fn sbsp_rank_one_maximum() {
        let (geom, grid) = setup(6);
        let theta0 = -0.5;
        let d = geom.steering_vector(theta0, LAMBDA).unwrap().entries;
        let p = sbsp_beam_pattern(&outer_plus(&d, 1e-3), 1, &grid).unwrap();
        let i = p.nearest_index(theta0).unwrap();
        assert!(p.power.iter().all(|v| *v <= p.power[i] + 1e-9));
    }

    #[test]
    fn mvdr_white_and_homogeneity() {
        let (_, grid) = setup(5);
        let p = mvdr_beam_pattern(&HpdMatrix::from_diagonal(&[3.0; 5]).unwrap(), &grid).unwrap();
        assert!(p.power.iter().all(|v| (v - 3.0 / 5.0).abs() < 1e-12));
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let g = random_hpd(&mut rng, 5, 1.0);
        let a = mvdr_beam_pattern(&g, &grid).unwrap();
        let b = mvdr_beam_pattern(&g.scaled(7.0).unwrap(), &grid).unwrap();
        for (x, y) in a.power.iter().zip(&b.power) {
            assert_abs_diff_eq!(7.0 * x, *y, epsilon = 1e-9 * y);
        }
    }

    #[test]
    fn mvdr_matches_sherman_morrison() {
        let (geom, grid) = setup(6);
        let h = geom.steering_vector(0.2, LAMBDA).unwrap().entries.scale(1.3);
        let s2 = 0.7;
        let g = outer_plus(&h, s2);
        let p = mvdr_beam_pattern(&g, &grid).unwrap();
        let hh = h.norm_squared();
        for (i, v) in p.power.iter().enumerate() {
            let d = grid.steering(i);
            // (s²I + hhᴴ)⁻¹ = (I − hhᴴ/(s² + ‖h‖²)) / s².
            let q = (d.norm_squared() - d.dotc(&h).norm_sqr() / (s2 + hh)) / s2;
            assert_abs_diff_eq!(*v, 1.0 / q, epsilon = 1e-9 * v.abs().max(1.0));
        }
    }

    #[test]
    fn scaling_preserves_argmax() {
        let (_, grid) = setup(6);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let g = random_hpd(&mut rng, 6, 2.0);
        let argmax = |p: &BeamPattern| p.power.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        for c in [0.01, 3.0, 1e4] {
            let gs = g.scaled(c).unwrap();
            assert_eq!(
                argmax(&ds_beam_pattern(&g, &grid).unwrap()),
                argmax(&ds_beam_pattern(&gs, &grid).unwrap())
            );
            assert_eq!(
                argmax(&mvdr_beam_pattern(&g, &grid).unwrap()),
                argmax(&mvdr_beam_pattern(&gs, &grid).unwrap())
            );
            let a = sbsp_beam_pattern(&g, 2, &grid).unwrap();
            let b = sbsp_beam_pattern(&gs, 2, &grid).unwrap();
            for (x, y) in a.power.iter().zip(&b.power) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn intersection_single_and_identical_segments_match_sbsp() {
        let (_, grid) = setup(6);
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let g = random_hpd(&mut rng, 6, 3.0);
        let s = sbsp_beam_pattern(&g, 2, &grid).unwrap();
        for k in [1, 3] {
            let segs = vec![g.clone(); k];
            let p = intersection_beam_pattern(&segs, 2, &vec![2; k], &grid).unwrap();
            for (x, y) in p.power.iter().zip(&s.power) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn intersection_keeps_common_vector() {
        // Orthogonal directions: d(θ) with sin θ spaced by 1/3 for M = 6,
        // spacing λ/2.
        let geom = ArrayGeometry::ula([0.0; 3], 0.5, 6, [1.0, 0.0, 0.0]).unwrap();
        let angles = [0.0f64, (1.0f64 / 3.0).asin(), (-1.0f64 / 3.0).asin()];
        let d: Vec<CVector> = angles
            .iter()
            .map(|t| geom.steering_vector(*t, 1.0).unwrap().entries)
            .collect();
        for a in 0..3 {
            for b in a + 1..3 {
                assert!(d[a].dotc(&d[b]).norm() < 1e-12);
            }
        }
        let eye = CMatrix::identity(6, 6);
        let g1 = HpdMatrix::new(hermitian_part(
            &(&d[0] * d[0].adjoint() * Complex64::new(2.0, 0.0) + &d[1] * d[1].adjoint() + eye.scale(0.01)),
        ))
        .unwrap();
        let g2 = HpdMatrix::new(hermitian_part(
            &(&d[0] * d[0].adjoint() * Complex64::new(2.0, 0.0) + &d[2] * d[2].adjoint() + eye.scale(0.01)),
        ))
        .unwrap();
        let bf =
            Beamformer::intersection(&[g1.clone(), g2.clone()], &[2, 2], SubspaceDimRule::Oracle(1), false).unwrap();
        let u = bf.subspace().unwrap();
        let h0 = d[0].unscale(6f64.sqrt());
        assert_abs_diff_eq!(u.column(0).dotc(&h0).norm(), 1.0, epsilon = 1e-9);
        // P h0 = h0 for the product of projectors.
        let proj = |g: &HpdMatrix| {
            let v = g.eigen().unwrap().leading_vectors(2);
            &v * v.adjoint()
        };
        let p = proj(&g1) * proj(&g2);
        assert!((&p * &h0 - &h0).norm() < 1e-9);
        let sym = Beamformer::intersection(&[g1, g2], &[2, 2], SubspaceDimRule::Oracle(1), true).unwrap();
        assert_abs_diff_eq!(sym.subspace().unwrap().column(0).dotc(&h0).norm(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn intersection_disjoint_subspaces_vanish() {
        let geom = ArrayGeometry::ula([0.0; 3], 0.5, 6, [1.0, 0.0, 0.0]).unwrap();
        let grid = SteeringGrid::new(&geom, (0..61).map(|i| -1.2 + 0.04 * i as f64).collect(), 1.0).unwrap();
        let e = |i: usize| {
            let mut v = CVector::zeros(6);
            v[i] = Complex64::new(1.0, 0.0);
            v
        };
        let eye = CMatrix::identity(6, 6).scale(1e-3);
        let g1 = HpdMatrix::new(&e(0) * e(0).adjoint() + &eye).unwrap();
        let g2 = HpdMatrix::new(&e(1) * e(1).adjoint() + &eye).unwrap();
        // Product of orthogonal projectors is zero; its eigenvectors are
        // arbitrary, so check the product itself.
        let v1 = g1.eigen().unwrap().leading_vectors(1);
        let v2 = g2.eigen().unwrap().leading_vectors(1);
        let prod = (&v1 * v1.adjoint()) * (&v2 * v2.adjoint());
        assert!(prod.norm() < 1e-12);
        let p = intersection_beam_pattern(&[g1, g2], 1, &[1, 1], &grid).unwrap();
        assert!(p.power.iter().all(|v| v.is_finite() && *v <= 6.0 + 1e-9));
    }

    #[test]
    fn general_eigenvectors_of_non_normal_matrix() {
        let m = CMatrix::from_row_slice(
            3,
            3,
            &[
                Complex64::new(2.0, 0.0),
                Complex64::new(1.0, 1.0),
                Complex64::new(0.0, 0.5),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.5, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(0.3, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.1, 0.0),
            ],
        );
        let (v, moduli) = leading_eigenvectors_general(&m, 3);
        assert!(moduli.windows(2).all(|w| w[0] >= w[1]));
        for c in 0..3 {
            let x = v.column(c).into_owned();
            let mx = &m * &x;
            // Rayleigh-style eigenvalue estimate and residual.
            let lambda = x.dotc(&mx);
            assert!((mx - x.scale(1.0) * lambda).norm() < 1e-9);
        }
    }
}
