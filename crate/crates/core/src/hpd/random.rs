//! Random HPD matrices for property checks and verification suites.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::HpdMatrix;
use crate::{CMatrix, Complex64};

pub fn random_complex(rng: &mut impl Rng, rows: usize, cols: usize) -> CMatrix {
    DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re, im)
    })
}

/// `A Aᴴ / n + floor·I` with Gaussian `A`; `spread` widens the spectrum.
pub fn random_hpd(rng: &mut impl Rng, n: usize, spread: f64) -> HpdMatrix {
    let a = random_complex(rng, n, n);
    let d = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::new((spread * (rng.random::<f64>() - 0.5)).exp(), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let b = &a * d;
    let m = &b * b.adjoint() / Complex64::new(n as f64, 0.0) + CMatrix::identity(n, n) * Complex64::new(0.1, 0.0);
    HpdMatrix::new(super::hermitian_part(&m)).unwrap()
}

pub fn random_unitary(rng: &mut impl Rng, n: usize) -> CMatrix {
    random_complex(rng, n, n).qr().q()
}

pub fn random_invertible(rng: &mut impl Rng, n: usize) -> CMatrix {
    random_complex(rng, n, n) + CMatrix::identity(n, n) * Complex64::new(2.0, 0.0)
}

/// `k` matrices sharing one random eigenbasis, with their eigenvalues.
pub fn random_commuting_set(rng: &mut impl Rng, n: usize, k: usize) -> (Vec<HpdMatrix>, Vec<Vec<f64>>) {
    let u = random_unitary(rng, n);
    let mut mats = Vec::new();
    let mut eigs = Vec::new();
    for _ in 0..k {
        let e: Vec<f64> = (0..n).map(|_| (4.0 * (rng.random::<f64>() - 0.5)).exp()).collect();
        let mut scaled = u.clone();
        for (l, v) in e.iter().enumerate() {
            scaled.column_mut(l).scale_mut(*v);
        }
        mats.push(HpdMatrix::new(super::hermitian_part(&(scaled * u.adjoint()))).unwrap());
        eigs.push(e);
    }
    (mats, eigs)
}
