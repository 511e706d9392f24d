//! Batch means of HPD matrices under the affine-invariant, Log-Euclidean
//! and Euclidean geometries.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::geometry::Whitener;
use super::matrix::{hermitian_part, HermitianEigen};
use super::{HpdError, HpdMatrix};
use crate::CMatrix;

/// How convergence of the Karcher iteration is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopCriterion {
    /// Frobenius norm of the whitened tangent mean `Γ^{-1/2} P̄ Γ^{-1/2}`,
    /// i.e. the Riemannian length of the update. Independent of the overall
    /// scale of the inputs.
    #[default]
    Whitened,
    /// Plain Frobenius norm of the tangent mean `P̄`.
    TangentFrobenius,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeanConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub stop: StopCriterion,
}

impl Default for MeanConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_iterations: 200,
            stop: StopCriterion::default(),
        }
    }
}

impl MeanConfig {
    pub fn validate(&self) -> Result<(), HpdError> {
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) || self.max_iterations == 0 {
            return Err(HpdError::InvalidConfig(format!(
                "tolerance must be positive and max_iterations >= 1, got {} / {}",
                self.tolerance, self.max_iterations
            )));
        }
        Ok(())
    }
}

/// Result of [`karcher_mean`].
#[derive(Debug, Clone)]
pub struct KarcherMean {
    pub mean: HpdMatrix,
    pub iterations: usize,
    /// Norm of the last tangent update, measured per [`StopCriterion`].
    pub residual: f64,
}

fn check_inputs(ms: &[HpdMatrix]) -> Result<usize, HpdError> {
    let first = ms.first().ok_or(HpdError::EmptyInput)?;
    for m in &ms[1..] {
        first.check_same_dim(m)?;
    }
    Ok(first.dim())
}

/// Entrywise arithmetic mean.
pub fn euclidean_mean(ms: &[HpdMatrix]) -> Result<HpdMatrix, HpdError> {
    let dim = check_inputs(ms)?;
    let mut acc = CMatrix::zeros(dim, dim);
    for m in ms {
        acc += m.as_matrix();
    }
    Ok(HpdMatrix::from_raw(acc.unscale(ms.len() as f64)))
}

/// `exp(mean(log Γᵢ))`.
pub fn log_euclidean_mean(ms: &[HpdMatrix]) -> Result<HpdMatrix, HpdError> {
    let dim = check_inputs(ms)?;
    let mut acc = CMatrix::zeros(dim, dim);
    for m in ms {
        acc += m.log()?.as_matrix();
    }
    let mean_log = acc.unscale(ms.len() as f64);
    Ok(HpdMatrix::from_raw(HermitianEigen::new(&mean_log)?.map(f64::exp)))
}

/// State of the Karcher iteration at one point.
struct KarcherPoint {
    whitener: Whitener,
    /// Whitened tangent mean `Γ^{-1/2} P̄ Γ^{-1/2}`.
    tangent: CMatrix,
    /// Mean squared distance to the inputs.
    cost: f64,
    /// Bound on the step that keeps gradient descent contracting, from the
    /// spread of each whitened input's spectrum.
    safe_step: f64,
}

impl KarcherPoint {
    fn new(at: &HpdMatrix, ms: &[HpdMatrix]) -> Result<Self, HpdError> {
        let dim = at.dim();
        let whitener = Whitener::new(at)?;
        let mut s = CMatrix::zeros(dim, dim);
        let mut cost = 0.0;
        let mut curvature = 0.0;
        for m in ms {
            let e = HermitianEigen::new(&whitener.whiten(m.as_matrix()))?;
            cost += e.values.iter().map(|v| v.ln().powi(2)).sum::<f64>();
            // (r/2) coth(r/2) with r the log condition number; 1 when r = 0.
            let half = 0.5 * (e.max() / e.min()).ln();
            curvature += if half > 1e-8 { half / half.tanh() } else { 1.0 };
            s += e.map_positive(f64::ln)?;
        }
        let k = ms.len() as f64;
        Ok(Self {
            whitener,
            tangent: hermitian_part(&s.unscale(k)),
            cost: cost / k,
            safe_step: 2.0 / (1.0 + curvature / k),
        })
    }

    fn step(&self, eig: &HermitianEigen, eta: f64) -> HpdMatrix {
        HpdMatrix::from_raw(self.whitener.color(&eig.map(|v| (eta * v).exp())))
    }

    /// Whether `other` improves on `self`. Near the minimum cost changes
    /// drop below rounding, which for inputs with condition numbers near
    /// 1e8 is around 1e-9 relative, and the gradient norm decides instead.
    fn improved_by(&self, other: &KarcherPoint) -> bool {
        let noise = 1e-8 * self.cost;
        other.cost < self.cost - noise
            || (other.cost <= self.cost + noise && other.tangent.norm() < self.tangent.norm())
    }
}

/// Affine-invariant (Karcher) mean by the fixed-point iteration
/// `Γ ← Exp_Γ(mean_i Log_Γ(Γᵢ))`, started from the Euclidean mean.
///
/// Each update moves a fraction `2 / (1 + mean_i (rᵢ/2) coth(rᵢ/2))` of the
/// way along the tangent mean, `rᵢ` being the log condition number of each
/// whitened input. The fraction is 1 for tightly clustered inputs and
/// shrinks for widely spread, nearly singular ones (short segments), where
/// the full step overshoots. It is halved further if the sum of squared
/// distances does not decrease.
///
/// On failure to converge the last iterate is carried inside
/// [`HpdError::NoConvergence`].
pub fn karcher_mean(ms: &[HpdMatrix], cfg: &MeanConfig) -> Result<KarcherMean, HpdError> {
    cfg.validate()?;
    check_inputs(ms)?;
    let mut current = euclidean_mean(ms)?;
    let mut point = KarcherPoint::new(&current, ms)?;
    let mut residual = f64::INFINITY;
    for iteration in 1..=cfg.max_iterations {
        residual = match cfg.stop {
            StopCriterion::Whitened => point.tangent.norm(),
            StopCriterion::TangentFrobenius => point.whitener.color(&point.tangent).norm(),
        };
        let eig = HermitianEigen::new(&point.tangent)?;
        let mut eta = point.safe_step;
        let (next, next_point) = loop {
            let candidate = point.step(&eig, eta);
            let eval = KarcherPoint::new(&candidate, ms)?;
            if point.improved_by(&eval) || eta < 1e-6 {
                break (candidate, eval);
            }
            eta *= 0.5;
        };
        current = next;
        point = next_point;
        if residual < cfg.tolerance {
            return Ok(KarcherMean {
                mean: current,
                iterations: iteration,
                residual,
            });
        }
    }
    Err(HpdError::NoConvergence {
        iterations: cfg.max_iterations,
        residual,
        last: Box::new(current),
    })
}

/// Relative commutator tolerance used by [`commuting_mean`].
pub const COMMUTATOR_TOLERANCE: f64 = 1e-8;

/// Closed-form Riemannian mean of pairwise-commuting HPD matrices,
/// `∏ Γᵢ^{1/K}`, evaluated in a joint eigenbasis.
pub fn commuting_mean(ms: &[HpdMatrix]) -> Result<HpdMatrix, HpdError> {
    let dim = check_inputs(ms)?;
    for (i, a) in ms.iter().enumerate() {
        for b in &ms[i + 1..] {
            let (a, b) = (a.as_matrix(), b.as_matrix());
            let residual = (a * b - b * a).norm() / (a.norm() * b.norm());
            if residual > COMMUTATOR_TOLERANCE {
                return Err(HpdError::NotCommuting { residual });
            }
        }
    }
    // A generic linear combination of commuting Hermitian matrices has a
    // simple spectrum on each joint eigenspace, so its eigenvectors
    // diagonalize every input. Retry with other weights when an accidental
    // degeneracy leaves an input non-diagonal.
    const GOLDEN: f64 = 0.618_033_988_749_894_8;
    for attempt in 0..8 {
        let mut combo = CMatrix::zeros(dim, dim);
        for (i, m) in ms.iter().enumerate() {
            let w = 1.0 + ((i + 1) as f64 * GOLDEN * (attempt + 1) as f64 + 0.1 * attempt as f64).fract();
            combo += m.as_matrix().scale(w);
        }
        let basis = HermitianEigen::new(&combo)?.vectors;
        let mut log_sum = DVector::<f64>::zeros(dim);
        let mut diagonal = true;
        for m in ms {
            let d = basis.adjoint() * m.as_matrix() * &basis;
            let scale = d.norm();
            let off: f64 = (0..dim)
                .flat_map(|r| (0..dim).filter(move |&c| c != r).map(move |c| (r, c)))
                .map(|(r, c)| d[(r, c)].norm_sqr())
                .sum::<f64>()
                .sqrt();
            if off > 1e-6 * scale {
                diagonal = false;
                break;
            }
            for l in 0..dim {
                let lambda = d[(l, l)].re;
                if lambda <= 0.0 {
                    return Err(HpdError::NotPositiveDefinite { min_eigenvalue: lambda });
                }
                log_sum[l] += lambda.ln();
            }
        }
        if diagonal {
            let k = ms.len() as f64;
            let mut scaled = basis.clone();
            for l in 0..dim {
                let g = (log_sum[l] / k).exp();
                scaled.column_mut(l).scale_mut(g);
            }
            return Ok(HpdMatrix::from_raw(scaled * basis.adjoint()));
        }
    }
    Err(HpdError::NotCommuting { residual: f64::NAN })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hpd::geometry::geodesic_point;
    use crate::hpd::random::{random_commuting_set, random_hpd, random_invertible};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diff(a: &HpdMatrix, b: &HpdMatrix) -> f64 {
        (a.as_matrix() - b.as_matrix()).norm()
    }

    #[test]
    fn means_of_identical_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let g = random_hpd(&mut rng, 4, 1.0);
        let ms = vec![g.clone(); 5];
        let cfg = MeanConfig::default();
        assert!(diff(&karcher_mean(&ms, &cfg).unwrap().mean, &g) < 1e-12);
        assert!(diff(&euclidean_mean(&ms).unwrap(), &g) < 1e-12);
        assert!(diff(&log_euclidean_mean(&ms).unwrap(), &g) < 1e-12);
        assert!(diff(&commuting_mean(&ms).unwrap(), &g) < 1e-12);
    }

    #[test]
    fn diagonal_examples() {
        let a = HpdMatrix::from_diagonal(&[1.0, 4.0]).unwrap();
        let b = HpdMatrix::from_diagonal(&[4.0, 1.0]).unwrap();
        let c = commuting_mean(&[a.clone(), b.clone()]).unwrap();
        assert!(diff(&c, &HpdMatrix::from_diagonal(&[2.0, 2.0]).unwrap()) < 1e-14);
        let e = euclidean_mean(&[
            HpdMatrix::from_diagonal(&[1.0, 1.0]).unwrap(),
            HpdMatrix::from_diagonal(&[3.0, 3.0]).unwrap(),
        ])
        .unwrap();
        assert!(diff(&e, &HpdMatrix::from_diagonal(&[2.0, 2.0]).unwrap()) < 1e-15);
    }

    #[test]
    fn karcher_two_points_is_geodesic_midpoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let a = random_hpd(&mut rng, 5, 1.0);
            let b = random_hpd(&mut rng, 5, 1.0);
            let k = karcher_mean(&[a.clone(), b.clone()], &MeanConfig::default()).unwrap();
            let mid = geodesic_point(&a, &b, 0.5).unwrap();
            assert!(diff(&k.mean, &mid) < 1e-8);
        }
    }

    #[test]
    fn commuting_family_agreement() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10 {
            let dim = rng.random_range(2..7);
            let k = rng.random_range(2..6);
            let (set, eigs) = random_commuting_set(&mut rng, dim, k);
            let c = commuting_mean(&set).unwrap();
            let km = karcher_mean(&set, &MeanConfig::default()).unwrap().mean;
            let le = log_euclidean_mean(&set).unwrap();
            assert!(diff(&c, &km) < 1e-8);
            assert!(diff(&c, &le) < 1e-8);
            // Per-eigenvalue geometric means.
            let mut expected: Vec<f64> = (0..dim)
                .map(|l| eigs.iter().map(|e| e[l].ln()).sum::<f64>() / k as f64)
                .map(f64::exp)
                .collect();
            expected.sort_by(|a, b| b.total_cmp(a));
            let got = c.eigen().unwrap().values;
            for (g, e) in got.iter().zip(&expected) {
                assert_abs_diff_eq!(*g, *e, epsilon = 1e-10 * e.max(1.0));
            }
        }
    }

    #[test]
    fn non_commuting_inputs_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let a = random_hpd(&mut rng, 3, 1.0);
        let b = random_hpd(&mut rng, 3, 1.0);
        assert!(matches!(commuting_mean(&[a, b]), Err(HpdError::NotCommuting { .. })));
    }

    #[test]
    fn empty_and_mismatched_inputs() {
        let cfg = MeanConfig::default();
        assert!(matches!(karcher_mean(&[], &cfg), Err(HpdError::EmptyInput)));
        assert!(matches!(euclidean_mean(&[]), Err(HpdError::EmptyInput)));
        let ms = [HpdMatrix::identity(2), HpdMatrix::identity(3)];
        assert!(matches!(
            log_euclidean_mean(&ms),
            Err(HpdError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn no_convergence_reports_last_iterate() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let ms: Vec<_> = (0..4).map(|_| random_hpd(&mut rng, 4, 3.0)).collect();
        let cfg = MeanConfig {
            tolerance: 1e-300,
            max_iterations: 2,
            ..MeanConfig::default()
        };
        match karcher_mean(&ms, &cfg) {
            Err(HpdError::NoConvergence { iterations, last, .. }) => {
                assert_eq!(iterations, 2);
                assert_eq!(last.dim(), 4);
            }
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn congruence_invariance_of_karcher_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let ms: Vec<_> = (0..5).map(|_| random_hpd(&mut rng, 4, 1.0)).collect();
        let a = random_invertible(&mut rng, 4);
        let cfg = MeanConfig::default();
        let mean = karcher_mean(&ms, &cfg).unwrap().mean;
        let moved: Vec<_> = ms.iter().map(|m| m.congruence(&a).unwrap()).collect();
        let mean_moved = karcher_mean(&moved, &cfg).unwrap().mean;
        let expected = mean.congruence(&a).unwrap();
        assert!(diff(&mean_moved, &expected) < 1e-7 * expected.norm_fro().max(1.0));
    }

    #[test]
    fn tangent_frobenius_criterion_converges_too() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let ms: Vec<_> = (0..4).map(|_| random_hpd(&mut rng, 3, 1.0)).collect();
        let a = karcher_mean(&ms, &MeanConfig::default()).unwrap().mean;
        let b = karcher_mean(
            &ms,
            &MeanConfig {
                stop: StopCriterion::TangentFrobenius,
                ..MeanConfig::default()
            },
        )
        .unwrap()
        .mean;
        assert!(diff(&a, &b) < 1e-9);
    }
}
