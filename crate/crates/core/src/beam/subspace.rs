use serde::{Deserialize, Serialize};

use crate::hpd::HpdMatrix;

/// How the signal-subspace dimension is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubspaceDimRule {
    /// Count eigenvalues, normalized to unit sum, above their mean plus one
    /// (population) standard deviation.
    MeanMatrix,
    /// Count eigenvalues above 1.5 times their mean.
    PerSegment,
    /// A known dimension.
    Oracle(usize),
}

/// Applies `rule` to a list of nonnegative spectral magnitudes. The result
/// is at least 1 and at most `len − 1`.
pub fn threshold_count(values: &[f64], rule: SubspaceDimRule) -> usize {
    let m = values.len();
    let raw = match rule {
        SubspaceDimRule::Oracle(n) => n,
        SubspaceDimRule::MeanMatrix => {
            let total: f64 = values.iter().sum();
            if total <= 0.0 {
                0
            } else {
                let p: Vec<f64> = values.iter().map(|v| v / total).collect();
                let mean = 1.0 / m as f64;
                let var = p.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / m as f64;
                let thr = mean + var.sqrt();
                p.iter().filter(|x| **x > thr).count()
            }
        }
        SubspaceDimRule::PerSegment => {
            let mean = values.iter().sum::<f64>() / m as f64;
            values.iter().filter(|x| **x > 1.5 * mean).count()
        }
    };
    raw.max(1).min(m.saturating_sub(1).max(1))
}

pub fn estimate_subspace_dim(g: &HpdMatrix, rule: SubspaceDimRule) -> usize {
    if let SubspaceDimRule::Oracle(n) = rule {
        return threshold_count(&vec![0.0; g.dim()], SubspaceDimRule::Oracle(n));
    }
    let values: Vec<f64> = match g.eigen() {
        Ok(e) => e.values.iter().cloned().collect(),
        Err(_) => return 1,
    };
    threshold_count(&values, rule)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isotropic_floors_at_one() {
        let g = HpdMatrix::identity(5);
        assert_eq!(estimate_subspace_dim(&g, SubspaceDimRule::PerSegment), 1);
        assert_eq!(estimate_subspace_dim(&g, SubspaceDimRule::MeanMatrix), 1);
    }

    #[test]
    fn one_dominant_eigenvalue() {
        let g = HpdMatrix::from_diagonal(&[10.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(estimate_subspace_dim(&g, SubspaceDimRule::MeanMatrix), 1);
        assert_eq!(estimate_subspace_dim(&g, SubspaceDimRule::PerSegment), 1);
        let g = HpdMatrix::from_diagonal(&[10.0, 9.0, 0.1, 0.1, 0.1, 0.1]).unwrap();
        assert_eq!(estimate_subspace_dim(&g, SubspaceDimRule::PerSegment), 2);
    }

    #[test]
    fn oracle_is_passed_through_and_clamped() {
        let g = HpdMatrix::identity(4);
        assert_eq!(estimate_subspace_dim(&g, SubspaceDimRule::Oracle(2)), 2);
        assert_eq!(estimate_subspace_dim(&g, SubspaceDimRule::Oracle(9)), 3);
        assert_eq!(estimate_subspace_dim(&g, SubspaceDimRule::Oracle(0)), 1);
    }
}
