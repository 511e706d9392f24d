//! Numerical checks of the manifold geometry and of the closed-form mean and
//! SIR results, grouped into suites. Every check runs a fixed number of
//! seeded random trials and reports its worst case against a tolerance.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::analysis::{
    analytic_mean_matrix, analytic_sir, analytic_total_sir, construct_vectors, misalignment_matrices,
    misalignment_mu_sq, mu_euclidean, mu_riemannian, orthogonal_ula_directions, output_sir,
    population_segment_matrices, quadratic_sir, sir_bar, AnalyticModel, Construction, InterferenceParams, ModelAtfs,
    MuRule,
};
use crate::array::ArrayGeometry;
use crate::beam::{doa_batch, doa_streaming, mean_matrix, Beamformer, BeamformerKind, MeanKind, SteeringGrid};
use crate::experiment::{ActivationPattern, ExperimentSpec};
use crate::hpd::random::{random_commuting_set, random_complex, random_hpd, random_invertible};
use crate::hpd::{
    affine_invariant_distance, commuting_mean, euclidean_mean, exp_map, hermitian_part, karcher_mean,
    log_euclidean_mean, log_map, HpdMatrix, MeanConfig, RiemannianMeanTracker,
};
use crate::sim::render_signals;
use crate::stft::{segment_correlations, DiagonalLoading, StftFrames};
use crate::{CMatrix, CVector, Complex64};

/// Karcher settings for checks that compare against closed forms.
pub fn tight_mean_config() -> MeanConfig {
    MeanConfig {
        tolerance: 1e-10,
        max_iterations: 500,
        ..MeanConfig::default()
    }
}

/// Karcher tolerance reachable on `set`. The whitened residual bottoms out
/// near `ε · cond`, which passes 1e-10 once condition numbers reach 1e6.
fn attainable_tolerance(set: &[HpdMatrix]) -> Res<f64> {
    let mut cond: f64 = 1.0;
    for g in set {
        let v = g.eigen()?.values;
        cond = cond.max(v[0] / v[v.len() - 1]);
    }
    Ok(tight_mean_config().tolerance.max(1e3 * f64::EPSILON * cond))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub trials: usize,
    /// Worst observed value of the checked quantity (an error, or a margin
    /// that must stay positive; see `detail`).
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Check {
    /// Error-style check: passes when `worst <= tolerance`.
    fn error(name: &str, trials: usize, worst: f64, tolerance: f64, what: &str) -> Self {
        Self {
            name: name.into(),
            passed: worst <= tolerance,
            trials,
            worst,
            tolerance,
            detail: format!("max {what} {worst:.3e} (tolerance {tolerance:e})"),
        }
    }

    fn failed(name: &str, trials: usize, detail: String) -> Self {
        Self {
            name: name.into(),
            passed: false,
            trials,
            worst: f64::NAN,
            tolerance: f64::NAN,
            detail,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {} [{} trials]: {}", self.name, self.trials, self.detail)
    }
}

/// Runs `body`, turning an error into a failed check.
fn guarded<E: fmt::Display>(name: &str, trials: usize, body: impl FnOnce() -> Result<Check, E>) -> Check {
    body().unwrap_or_else(|e| Check::failed(name, trials, format!("error: {e}")))
}

type Res<T> = Result<T, Box<dyn std::error::Error>>;

fn rel_fro(a: &HpdMatrix, b: &HpdMatrix) -> f64 {
    (a.as_matrix() - b.as_matrix()).norm() / b.norm_fro()
}

fn abs_fro(a: &HpdMatrix, b: &HpdMatrix) -> f64 {
    (a.as_matrix() - b.as_matrix()).norm()
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

// ---------------------------------------------------------------- geometry

/// Karcher mean of commuting sets against the eigenvalue-wise geometric mean.
pub fn commuting_oracle(trials: usize, seed: u64) -> Check {
    const NAME: &str = "karcher mean of commuting sets equals product of K-th roots";
    guarded(NAME, trials, || -> Res<Check> {
        let mut r = rng(seed, 1);
        let mut worst: f64 = 0.0;
        for _ in 0..trials {
            let n = r.random_range(3..=12);
            let k = r.random_range(2..=10);
            let (ms, _) = random_commuting_set(&mut r, n, k);
            let g = karcher_mean(&ms, &tight_mean_config())?.mean;
            worst = worst.max(abs_fro(&g, &commuting_mean(&ms)?));
        }
        Ok(Check::error(NAME, trials, worst, 1e-8, "Frobenius error"))
    })
}

/// Karcher mean of two matrices against `A^{1/2} (A^{-1/2} B A^{-1/2})^{1/2} A^{1/2}`.
pub fn two_point_midpoint(trials: usize, seed: u64) -> Check {
    const NAME: &str = "karcher mean of two matrices equals the geodesic midpoint";
    guarded(NAME, trials, || -> Res<Check> {
        let mut r = rng(seed, 2);
        let mut worst: f64 = 0.0;
        for _ in 0..trials {
            let n = r.random_range(2..=12);
            let a = random_hpd(&mut r, n, 3.0);
            let b = random_hpd(&mut r, n, 3.0);
            let g = karcher_mean(&[a.clone(), b.clone()], &tight_mean_config())?.mean;
            let ais = a.inv_sqrt()?;
            let inner = HpdMatrix::new(hermitian_part(&(ais.as_matrix() * b.as_matrix() * ais.as_matrix())))?;
            let s = a.sqrt()?;
            let mid = HpdMatrix::new(hermitian_part(
                &(s.as_matrix() * inner.sqrt()?.as_matrix() * s.as_matrix()),
            ))?;
            worst = worst.max(abs_fro(&g, &mid));
        }
        Ok(Check::error(NAME, trials, worst, 1e-8, "Frobenius error"))
    })
}

pub fn log_exp_round_trip(trials: usize, seed: u64) -> Check {
    const NAME: &str = "Exp_A(Log_A(B)) = B";
    guarded(NAME, trials, || -> Res<Check> {
        let mut r = rng(seed, 3);
        let mut worst: f64 = 0.0;
        for _ in 0..trials {
            let n = r.random_range(2..=12);
            let a = random_hpd(&mut r, n, 3.0);
            let b = random_hpd(&mut r, n, 3.0);
            let back = exp_map(&a, &log_map(&a, &b)?)?;
            worst = worst.max(rel_fro(&back, &b));
        }
        Ok(Check::error(NAME, trials, worst, 1e-10, "relative Frobenius error"))
    })
}

pub fn distance_invariance(trials: usize, seed: u64) -> Check {
    const NAME: &str = "affine-invariant distance is symmetric and congruence invariant";
    guarded(NAME, trials, || -> Res<Check> {
        let mut r = rng(seed, 4);
        let mut worst: f64 = 0.0;
        for _ in 0..trials {
            let n = r.random_range(2..=10);
            let a = random_hpd(&mut r, n, 3.0);
            let b = random_hpd(&mut r, n, 3.0);
            let c = random_invertible(&mut r, n);
            let d = affine_invariant_distance(&a, &b)?;
            let d_swapped = affine_invariant_distance(&b, &a)?;
            let d_moved = affine_invariant_distance(&a.congruence(&c)?, &b.congruence(&c)?)?;
            worst = worst.max((d - d_swapped).abs() / d).max((d - d_moved).abs() / d);
        }
        Ok(Check::error(NAME, trials, worst, 1e-8, "relative distance change"))
    })
}

/// Random sets sharing the unit eigenvector `h` with eigenvalue `λ₀`.
fn common_eigenvector_set(r: &mut ChaCha8Rng) -> (Vec<HpdMatrix>, CVector, f64) {
    let n = r.random_range(2..=10);
    let k = r.random_range(2..=8);
    let h = random_complex(r, n, 1).column(0).normalize();
    let p = CMatrix::identity(n, n) - &h * h.adjoint();
    let lambda0 = (4.0 * (r.random::<f64>() - 0.5)).exp();
    let ms = (0..k)
        .map(|_| {
            let a = random_hpd(r, n, 3.0);
            let m = (&h * h.adjoint()).scale(lambda0) + &p * a.as_matrix() * &p;
            HpdMatrix::new(hermitian_part(&m)).expect("HPD by construction")
        })
        .collect();
    (ms, h, lambda0)
}

/// All three means keep a shared eigenvector's eigenvalue.
pub fn common_eigenvalue(trials: usize, seed: u64) -> Check {
    const NAME: &str = "shared eigenvector keeps its eigenvalue under all three means";
    guarded(NAME, trials, || -> Res<Check> {
        let mut r = rng(seed, 5);
        let mut worst: f64 = 0.0;
        for _ in 0..trials {
            let (ms, h, lambda0) = common_eigenvector_set(&mut r);
            for g in [
                karcher_mean(&ms, &tight_mean_config())?.mean,
                log_euclidean_mean(&ms)?,
                euclidean_mean(&ms)?,
            ] {
                worst = worst.max((g.quadratic_form(&h) - lambda0).abs());
            }
        }
        Ok(Check::error(NAME, trials, worst, 1e-8, "eigenvalue error"))
    })
}

fn random_set(r: &mut ChaCha8Rng) -> Vec<HpdMatrix> {
    let n = r.random_range(2..=10);
    let k = r.random_range(2..=8);
    (0..k).map(|_| random_hpd(r, n, 3.0)).collect()
}

/// `tr(Γ_R) ≤ tr(Γ_LE)`; reports the largest relative excess.
pub fn trace_ordering(trials: usize, seed: u64) -> Check {
    const NAME: &str = "trace of Riemannian mean <= trace of Log-Euclidean mean";
    guarded(NAME, trials, || -> Res<Check> {
        let mut r = rng(seed, 6);
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..trials {
            let ms = random_set(&mut r);
            let tr = karcher_mean(&ms, &tight_mean_config())?.mean.trace();
            let tle = log_euclidean_mean(&ms)?.trace();
            worst = worst.max((tr - tle) / tle);
        }
        Ok(Check::error(
            NAME,
            trials,
            worst,
            1e-12,
            "relative excess tr(R) - tr(LE)",
        ))
    })
}

/// `Γ_R ⪯ Γ_E`: smallest eigenvalue of `Γ_E − Γ_R` is not below `−1e-8`.
pub fn loewner_ordering(trials: usize, seed: u64) -> Check {
    const NAME: &str = "Riemannian mean <= Euclidean mean in Loewner order";
    guarded(NAME, trials, || -> Res<Check> {
        let mut r = rng(seed, 6);
        let mut worst: f64 = 0.0;
        for _ in 0..trials {
            let ms = random_set(&mut r);
            let g = karcher_mean(&ms, &tight_mean_config())?.mean;
            let e = euclidean_mean(&ms)?;
            let diff = hermitian_part(&(e.as_matrix() - g.as_matrix()));
            let min = diff.symmetric_eigenvalues().min();
            worst = worst.max(-min);
        }
        Ok(Check::error(NAME, trials, worst, 1e-8, "negative eigenvalue of E - R"))
    })
}

// ----------------------------------------------------------- segment means

/// A random model with segment activity realizing its τ: `m` in 8..=12,
/// one to three interferences, two to six segments, each interference
/// active in at least one and idle in at least one segment.
fn random_segmented_model(r: &mut ChaCha8Rng) -> (AnalyticModel, Vec<Vec<bool>>) {
    let m = r.random_range(8..=12);
    let n_i = r.random_range(1..=3);
    let segments = r.random_range(2..=6);
    let mut model = AnalyticModel::random(r, m, n_i);
    let activity: Vec<Vec<bool>> = (0..n_i)
        .map(|_| loop {
            let a: Vec<bool> = (0..segments).map(|_| r.random_bool(0.5)).collect();
            if a.iter().any(|&x| x) && a.iter().any(|&x| !x) {
                break a;
            }
        })
        .collect();
    for (p, a) in model.interferences.iter_mut().zip(&activity) {
        p.tau = a.iter().filter(|&&x| x).count() as f64 / segments as f64;
    }
    (model, activity)
}

fn lemma1(trials: usize, seed: u64, name: &str, kind: MeanKind, rule: MuRule, tolerance: f64) -> Check {
    guarded(name, trials, || -> Res<Check> {
        let mut r = rng(seed, 7);
        let mut worst: f64 = 0.0;
        for _ in 0..trials {
            let (model, activity) = random_segmented_model(&mut r);
            let c = construct_vectors(&model, &mut r)?;
            let segs = population_segment_matrices(&model, &c.atfs, &activity)?;
            let g = mean_matrix(&segs, kind, &tight_mean_config())?;
            worst = worst.max(rel_fro(&g, &analytic_mean_matrix(&model, &c.atfs, rule)?));
        }
        Ok(Check::error(name, trials, worst, tolerance, "relative Frobenius error"))
    })
}

/// Karcher mean of population segment matrices against the closed form.
pub fn lemma1_riemannian(trials: usize, seed: u64) -> Check {
    lemma1(
        trials,
        seed,
        "Karcher mean of population segments has the closed form",
        MeanKind::Riemannian,
        MuRule::Riemannian,
        1e-6,
    )
}

pub fn lemma1_euclidean(trials: usize, seed: u64) -> Check {
    lemma1(
        trials,
        seed,
        "Euclidean mean of population segments has the closed form",
        MeanKind::Euclidean,
        MuRule::Euclidean,
        1e-12,
    )
}

/// `μ_R² < μ_E²` strictly for 0 < τ < 1; reports the largest `μ_R² / μ_E²`.
pub fn mu_ordering(trials: usize, seed: u64) -> Check {
    const NAME: &str = "Riemannian interference coefficient below Euclidean one";
    let mut r = rng(seed, 8);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let p = |r: &mut ChaCha8Rng| 10f64.powf(r.random_range(-3.0..3.0));
        let (s, h, v) = (p(&mut r), p(&mut r), p(&mut r));
        let tau = r.random_range(0.01..0.99);
        worst = worst.max(mu_riemannian(s, h, v, tau) / mu_euclidean(s, tau));
    }
    Check {
        name: NAME.into(),
        passed: worst < 1.0,
        trials,
        worst,
        tolerance: 1.0,
        detail: format!("largest ratio mu_R^2 / mu_E^2 is 1 - {:.3e}", 1.0 - worst),
    }
}

// -------------------------------------------------------------- properties

/// Which random models a SIR-ordering check draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    /// Any valid model.
    Any,
    /// `σ₀²‖h₀‖² ≥ σ_j² τ_j ‖h_j‖²` for every interference.
    DesiredDominant,
    /// ρ = 0: steering vectors orthogonal to the other sources' transfer functions.
    NoCrossCorrelation,
}

fn desired_dominant(m: &AnalyticModel) -> bool {
    let p0 = m.sigma0_sq * m.h0_norm_sq;
    m.interferences.iter().all(|i| p0 >= i.sigma_sq * i.tau * i.h_norm_sq)
}

fn draw_model(r: &mut ChaCha8Rng, family: ModelFamily) -> AnalyticModel {
    loop {
        let m = r.random_range(4..=16);
        let n_i = r.random_range(1..=4);
        let mut model = AnalyticModel::random(r, m, n_i);
        match family {
            ModelFamily::Any => return model,
            ModelFamily::DesiredDominant if desired_dominant(&model) => return model,
            ModelFamily::DesiredDominant => {}
            ModelFamily::NoCrossCorrelation => {
                model.rho = 0.0;
                return model;
            }
        }
    }
}

/// Per-interference ordering `SIR_j(Γ_R) > SIR_j(Γ_E) + 1e-12`. Reports the
/// number of violating (model, interference) pairs and the smallest gap.
pub fn sir_ordering(trials: usize, seed: u64, family: ModelFamily) -> Check {
    let name = format!("SIR_j(R) > SIR_j(E) on {family:?} models");
    guarded(&name.clone(), trials, || -> Res<Check> {
        let mut r = rng(seed, 9);
        let mut violations = 0;
        let mut pairs = 0;
        let mut min_gap = f64::INFINITY;
        let mut first = None;
        for _ in 0..trials {
            let model = draw_model(&mut r, family);
            let sr = analytic_sir(&model, MuRule::Riemannian)?;
            let se = analytic_sir(&model, MuRule::Euclidean)?;
            for (j, (a, b)) in sr.iter().zip(&se).enumerate() {
                pairs += 1;
                let gap = a - b;
                min_gap = min_gap.min(gap);
                if gap <= 1e-12 {
                    violations += 1;
                    first.get_or_insert((model.clone(), j, *a, *b));
                }
            }
        }
        let mut detail = format!("{violations} violations in {pairs} pairs, smallest gap {min_gap:.3e}");
        if let Some((m, j, a, b)) = first {
            let i = m.interferences[j];
            detail += &format!(
                "; first: interference {j} of {}, SIR_R {a:.4} vs SIR_E {b:.4}, kappa {:.3} rho {:.3}, \
                 desired energy {:.3e} vs tau*sigma^2*|h|^2 {:.3e}",
                m.interferences.len(),
                m.kappa,
                m.rho,
                m.sigma0_sq * m.h0_norm_sq,
                i.sigma_sq * i.tau * i.h_norm_sq
            );
        }
        Ok(Check {
            name,
            passed: violations == 0,
            trials,
            worst: min_gap,
            tolerance: 1e-12,
            detail,
        })
    })
}

/// Total-SIR ordering `SIR_tot(Γ_R) > SIR_tot(Γ_E)` on any valid model.
pub fn total_sir_ordering(trials: usize, seed: u64) -> Check {
    const NAME: &str = "SIR_tot(R) > SIR_tot(E) on any valid model";
    guarded(NAME, trials, || -> Res<Check> {
        let mut r = rng(seed, 10);
        let mut min_gap = f64::INFINITY;
        for _ in 0..trials {
            let model = draw_model(&mut r, ModelFamily::Any);
            let gap = analytic_total_sir(&model, MuRule::Riemannian)? - analytic_total_sir(&model, MuRule::Euclidean)?;
            min_gap = min_gap.min(gap);
        }
        Ok(Check {
            name: NAME.into(),
            passed: min_gap > 1e-12,
            trials,
            worst: min_gap,
            tolerance: 1e-12,
            detail: format!("smallest gap {min_gap:.3e}"),
        })
    })
}

/// Central difference of `f` at `x` with relative step `rel`, refined once
/// by Richardson extrapolation.
fn derivative(f: impl Fn(f64) -> f64, x: f64, rel: f64) -> f64 {
    let d = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    let h = rel * x;
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

/// Under desired dominance, `∂SIR_R/∂σ_v² < ∂SIR_E/∂σ_v² < 0`.
pub fn noise_derivative_ordering(trials: usize, seed: u64) -> Check {
    const NAME: &str = "dSIR_R/dnoise < dSIR_E/dnoise < 0 on desired-dominant models";
    guarded(NAME, trials, || -> Res<Check> {
        let mut r = rng(seed, 11);
        let mut violations = 0;
        let mut pairs = 0;
        for _ in 0..trials {
            let model = draw_model(&mut r, ModelFamily::DesiredDominant);
            for j in 0..model.interferences.len() {
                pairs += 1;
                let sir = |rule: MuRule| {
                    let model = &model;
                    move |v: f64| {
                        let m = AnalyticModel {
                            sigma_v_sq: v,
                            ..model.clone()
                        };
                        analytic_sir(&m, rule).map(|s| s[j]).unwrap_or(f64::NAN)
                    }
                };
                let dr = derivative(sir(MuRule::Riemannian), model.sigma_v_sq, 1e-4);
                let de = derivative(sir(MuRule::Euclidean), model.sigma_v_sq, 1e-4);
                if !(dr < de && de < 0.0) {
                    violations += 1;
                }
            }
        }
        Ok(Check {
            name: NAME.into(),
            passed: violations == 0,
            trials,
            worst: violations as f64,
            tolerance: 0.0,
            detail: format!("{violations} violations in {pairs} pairs (relative step 1e-4, Richardson)"),
        })
    })
}

/// SIR measured with transfer functions: `h₀` orthogonal to every
/// interference, interferences correlated among themselves.
pub fn sir_bar_ordering(trials: usize, seed: u64) -> Check {
    const NAME: &str = "SIR-bar(R) >= SIR-bar(E) with correlated interferences";
    guarded(NAME, trials, || -> Res<Check> {
        let mut r = rng(seed, 12);
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..trials {
            let m = r.random_range(3..=10);
            let n_i = r.random_range(1..=2 * m);
            let segments = r.random_range(2..=6);
            let h0 = random_complex(&mut r, m, 1).column(0).into_owned();
            let u0 = h0.normalize();
            let hs: Vec<CVector> = (0..n_i)
                .map(|_| {
                    let x = random_complex(&mut r, m, 1).column(0).into_owned();
                    let x = &x - &u0 * u0.dotc(&x);
                    x.scale(10f64.powf(r.random_range(-1.0..1.0)))
                })
                .collect();
            let s0 = 10f64.powf(r.random_range(-2.0..2.0));
            let sv = 10f64.powf(r.random_range(-3.0..1.0));
            let powers: Vec<f64> = (0..n_i).map(|_| 10f64.powf(r.random_range(-3.0..3.0))).collect();
            let segs = (0..segments)
                .map(|_| {
                    let mut g = CMatrix::identity(m, m).scale(sv) + (&h0 * h0.adjoint()).scale(s0);
                    for (h, p) in hs.iter().zip(&powers) {
                        if r.random_bool(0.5) {
                            g += (h * h.adjoint()).scale(*p);
                        }
                    }
                    HpdMatrix::new(hermitian_part(&g))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let cfg = MeanConfig {
                tolerance: attainable_tolerance(&segs)?,
                ..tight_mean_config()
            };
            let gr = karcher_mean(&segs, &cfg)?.mean;
            let ge = euclidean_mean(&segs)?;
            for h in &hs {
                let (a, b) = (sir_bar(&gr, &h0, h)?, sir_bar(&ge, &h0, h)?);
                worst = worst.max((b - a) / b);
            }
        }
        Ok(Check::error(
            NAME,
            trials,
            worst,
            1e-9,
            "relative shortfall of SIR-bar(R)",
        ))
    })
}

/// Grid over which the vanishing-noise limit is examined.
pub const VANISHING_TAUS: [f64; 3] = [0.1, 0.25, 0.45];
pub const VANISHING_POWERS: [f64; 3] = [1.0, 1e6, 1e12];

/// Noise powers from 1e-2 down to 1e-10, four per decade.
pub fn vanishing_noise_levels() -> Vec<f64> {
    (0..=32).map(|i| 10f64.powf(-2.0 - i as f64 / 4.0)).collect()
}

/// `‖Γ_R − Γ_opt‖_F` over [`vanishing_noise_levels`] for one interference
/// of power `sigma_sq` active a fraction `tau` of the time, with unit
/// desired power, on an anechoic 12-microphone model.
fn distance_to_optimal(tau: f64, sigma_sq: f64) -> Res<Vec<(f64, f64)>> {
    let mut model = AnalyticModel::two_alternating(12, 1.0);
    model.interferences.truncate(1);
    model.interferences[0].tau = tau;
    model.interferences[0].sigma_sq = sigma_sq;
    let c = construct_vectors(&model, &mut rng(0, 13))?;
    vanishing_noise_levels()
        .into_iter()
        .map(|v| {
            let m = AnalyticModel {
                sigma_v_sq: v,
                ..model.clone()
            };
            let gr = analytic_mean_matrix(&m, &c.atfs, MuRule::Riemannian)?;
            let go = analytic_mean_matrix(&m, &c.atfs, MuRule::Optimal)?;
            Ok(((gr.as_matrix() - go.as_matrix()).norm(), go.norm_fro()))
        })
        .collect()
}

/// `‖Γ_R − Γ_opt‖_F` decreases strictly as the noise vanishes, for every
/// (τ, σ²) on the grid.
pub fn vanishing_noise_monotone() -> Check {
    const NAME: &str = "distance of Riemannian mean to optimal matrix decreases with noise";
    let trials = VANISHING_TAUS.len() * VANISHING_POWERS.len();
    guarded(NAME, trials, || -> Res<Check> {
        let mut increases = 0;
        for tau in VANISHING_TAUS {
            for s in VANISHING_POWERS {
                let d = distance_to_optimal(tau, s)?;
                increases += d.windows(2).filter(|w| w[1].0 >= w[0].0).count();
            }
        }
        Ok(Check {
            name: NAME.into(),
            passed: increases == 0,
            trials,
            worst: increases as f64,
            tolerance: 0.0,
            detail: format!("{increases} non-decreasing steps over noise 1e-2 .. 1e-10"),
        })
    })
}

/// At noise 1e-10, `‖Γ_R − Γ_opt‖_F < 1e-6 ‖Γ_opt‖_F` on the whole grid.
/// The gap there is about `(σ²‖h‖²)^τ (σ_v²)^{1−τ}`, so strong interferences
/// active close to half the time stay far from the limit.
pub fn vanishing_noise_final() -> Check {
    const NAME: &str = "Riemannian mean within 1e-6 of optimal matrix at noise 1e-10";
    let trials = VANISHING_TAUS.len() * VANISHING_POWERS.len();
    guarded(NAME, trials, || -> Res<Check> {
        let mut worst: f64 = 0.0;
        let mut at = (0.0, 0.0);
        let mut failing = Vec::new();
        for tau in VANISHING_TAUS {
            for s in VANISHING_POWERS {
                let (d, n) = *distance_to_optimal(tau, s)?.last().expect("nonempty sweep");
                let ratio = d / n;
                if ratio >= 1e-6 {
                    failing.push(format!("tau {tau} sigma^2 {s:.0e}: {ratio:.2e}"));
                }
                if ratio > worst {
                    worst = ratio;
                    at = (tau, s);
                }
            }
        }
        let mut c = Check::error(NAME, trials, worst, 1e-6, "relative distance");
        c.passed = worst < 1e-6;
        c.detail += &format!(" at tau {} sigma^2 {:.0e}", at.0, at.1);
        if !failing.is_empty() {
            c.detail += &format!("; above tolerance: {}", failing.join(", "));
        }
        Ok(c)
    })
}

/// With a strong interference active 10% of the time and noise 1e-10, the
/// Riemannian SIR reaches that of the optimal matrix and the Euclidean SIR
/// falls to ρ/κ.
pub fn strong_interference_limits() -> Check {
    const NAME: &str = "strong interference, vanishing noise: SIR_R -> SIR_opt, SIR_E -> rho/kappa";
    guarded(NAME, 1, || -> Res<Check> {
        let model = AnalyticModel {
            sigma0_sq: 1.0,
            sigma_v_sq: 1e-10,
            interferences: vec![InterferenceParams {
                sigma_sq: 1e12,
                tau: 0.1,
                h_norm_sq: 12.0,
            }],
            kappa: 0.8,
            rho: 0.1,
            h0_norm_sq: 12.0,
            m: 12,
        };
        let sr = analytic_sir(&model, MuRule::Riemannian)?[0];
        let so = analytic_sir(&model, MuRule::Optimal)?[0];
        let se = analytic_sir(&model, MuRule::Euclidean)?[0];
        let e1 = (sr / so - 1.0).abs();
        let e2 = (se / (model.rho / model.kappa) - 1.0).abs();
        let mut c = Check::error(NAME, 1, e1.max(e2), 1e-6, "relative error");
        c.detail += &format!(" (SIR_R {sr:.6}, SIR_opt {so:.6}, SIR_E {se:.6})");
        Ok(c)
    })
}

// ------------------------------------------- two alternating interferences

/// Closed forms of the anechoic two-alternating setting at M = 12, σ_v² = 1.
pub fn example1_closed_form() -> Check {
    const NAME: &str = "two alternating interferences: SIR_R = sqrt(13), SIR_E = 26/14";
    guarded(NAME, 1, || -> Res<Check> {
        let model = AnalyticModel::two_alternating(12, 1.0);
        let mut worst: f64 = 0.0;
        for s in analytic_sir(&model, MuRule::Riemannian)? {
            worst = worst.max((s - 13f64.sqrt()).abs());
        }
        for s in analytic_sir(&model, MuRule::Euclidean)? {
            worst = worst.max((s - 26.0 / 14.0).abs());
        }
        Ok(Check::error(NAME, 1, worst, 1e-12, "absolute error"))
    })
}

/// Half-wavelength ULA with three mutually orthogonal directions.
struct Example1Setup {
    geom: ArrayGeometry,
    dirs: Vec<f64>,
    atfs: ModelAtfs,
    grid: SteeringGrid,
}

fn example1_setup() -> Res<Example1Setup> {
    let m = 12;
    let geom = ArrayGeometry::ula([0.0; 3], 0.5, m, [1.0, 0.0, 0.0])?;
    let dirs = orthogonal_ula_directions(m, 3)?;
    let sv = |t: f64| geom.steering_vector(t, 1.0).map(|s| s.entries);
    let atfs = ModelAtfs {
        h0: sv(dirs[0])?,
        interferences: vec![sv(dirs[1])?, sv(dirs[2])?],
    };
    let mut thetas = dirs.clone();
    thetas.sort_by(f64::total_cmp);
    let grid = SteeringGrid::new(&geom, thetas, 1.0)?;
    Ok(Example1Setup { geom, dirs, atfs, grid })
}

/// DS output SIR per interference for each of the Riemannian and
/// Euclidean means of `segs`.
fn pipeline_sirs(segs: &[HpdMatrix], setup: &Example1Setup) -> Res<[Vec<f64>; 2]> {
    let sir = |kind: MeanKind| -> Res<Vec<f64>> {
        let g = mean_matrix(segs, kind, &tight_mean_config())?;
        let p = Beamformer::ds(&g).evaluate(&setup.grid)?;
        Ok(output_sir(&p, setup.dirs[0], &setup.dirs[1..])?.per_interference)
    };
    Ok([sir(MeanKind::Riemannian)?, sir(MeanKind::Euclidean)?])
}

const EXAMPLE1_ACTIVITY: [[bool; 2]; 2] = [[true, false], [false, true]];

/// Mean matrix, DS pattern and output SIR from the population segment
/// matrices reproduce the closed forms.
pub fn example1_population() -> Check {
    const NAME: &str = "two alternating interferences: pipeline on population matrices";
    guarded(NAME, 1, || -> Res<Check> {
        let setup = example1_setup()?;
        let model = AnalyticModel::two_alternating(12, 1.0);
        let activity: Vec<Vec<bool>> = EXAMPLE1_ACTIVITY.iter().map(|a| a.to_vec()).collect();
        let segs = population_segment_matrices(&model, &setup.atfs, &activity)?;
        let [r, e] = pipeline_sirs(&segs, &setup)?;
        let worst = r
            .iter()
            .map(|s| (s - 13f64.sqrt()).abs())
            .chain(e.iter().map(|s| (s - 26.0 / 14.0).abs()))
            .fold(0.0, f64::max);
        let mut c = Check::error(NAME, 1, worst, 1e-6, "absolute error");
        c.detail += &format!(" (SIR_R {:?}, SIR_E {:?})", r, e);
        Ok(c)
    })
}

fn complex_gaussian(r: &mut ChaCha8Rng) -> Complex64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = StandardNormal.sample(r);
    let im: f64 = StandardNormal.sample(r);
    Complex64::new(s * re, s * im)
}

/// Largest relative deviation from the closed forms of one realization of
/// `l_w` circular Gaussian snapshots per segment.
fn example1_realization(setup: &Example1Setup, l_w: usize, r: &mut ChaCha8Rng) -> Res<f64> {
    let m = setup.geom.len();
    let mut frames = DMatrix::zeros(2 * l_w, m);
    for seg in 0..2 {
        for l in 0..l_w {
            let mut z: CVector = &setup.atfs.h0 * complex_gaussian(r);
            for (j, h) in setup.atfs.interferences.iter().enumerate() {
                if EXAMPLE1_ACTIVITY[j][seg] {
                    z += h * complex_gaussian(r);
                }
            }
            for i in 0..m {
                z[i] += complex_gaussian(r);
            }
            frames.row_mut(seg * l_w + l).copy_from(&z.transpose());
        }
    }
    let f = StftFrames {
        frames,
        bin: 0,
        window_size: 0,
        hop: 0,
    };
    let segs = segment_correlations(&f, l_w, DiagonalLoading::None)?;
    let [rr, e] = pipeline_sirs(&segs.matrices, setup)?;
    Ok(rr
        .iter()
        .map(|s| (s / 13f64.sqrt() - 1.0).abs())
        .chain(e.iter().map(|s| (s / (26.0 / 14.0) - 1.0).abs()))
        .fold(0.0, f64::max))
}

/// Same as [`example1_population`] but from sample correlation matrices of
/// `l_w` snapshots per segment. A single realization scatters by about 10%
/// at `l_w = 256`, so the median deviation over `realizations` is compared
/// with 15%.
pub fn example1_sampled(l_w: usize, realizations: usize, seed: u64) -> Check {
    let name = format!("two alternating interferences: pipeline on {l_w}-snapshot sample matrices");
    guarded(&name.clone(), realizations, || -> Res<Check> {
        let setup = example1_setup()?;
        let mut r = rng(seed, 14);
        let errs = (0..realizations)
            .map(|_| example1_realization(&setup, l_w, &mut r))
            .collect::<Res<Vec<f64>>>()?;
        let median = crate::experiment::percentile(&errs, 50.0).unwrap_or(f64::NAN);
        let within = errs.iter().filter(|&&e| e <= 0.15).count();
        let mut c = Check::error(&name, realizations, median, 0.15, "median relative error");
        c.detail = format!(
            "median relative error {median:.3e} (tolerance 0.15), {within}/{realizations} realizations within, largest {:.3e}",
            errs.iter().copied().fold(0.0, f64::max)
        );
        Ok(c)
    })
}

// ------------------------------------------------------------ misalignment

/// Offsets 0, 0.05, …, 0.5.
pub fn misalignment_offsets() -> Vec<f64> {
    (0..=10).map(|i| i as f64 * 0.05).collect()
}

/// The anechoic two-alternating model followed by `random` desired-dominant
/// two-interference models (dominance taken at zero offset).
fn misalignment_models(random: usize, seed: u64) -> Res<Vec<(AnalyticModel, Construction)>> {
    let mut r = rng(seed, 15);
    let mut out = Vec::new();
    let base = AnalyticModel::two_alternating(12, 1.0);
    let setup = example1_setup()?;
    out.push((
        base,
        Construction {
            steering: std::iter::once(setup.atfs.h0.clone())
                .chain(setup.atfs.interferences.iter().cloned())
                .collect(),
            atfs: setup.atfs,
        },
    ));
    while out.len() < random + 1 {
        let m = r.random_range(6..=12);
        let mut model = AnalyticModel::random(&mut r, m, 2);
        for i in &mut model.interferences {
            i.tau = 0.5;
        }
        if !desired_dominant(&model) {
            continue;
        }
        let c = construct_vectors(&model, &mut r)?;
        out.push((model, c));
    }
    Ok(out)
}

/// For every offset and model: Karcher and Euclidean means of the two
/// misaligned segment matrices, their DS SIR per interference, and the
/// closed-form μ². Returns (min relative SIR_R − SIR_E over α < ½,
/// max |SIR_R/SIR_E − 1| at α = ½, max relative μ² error).
fn misalignment_stats(random: usize, seed: u64) -> Res<(f64, f64, f64, usize)> {
    let models = misalignment_models(random, seed)?;
    let (mut min_gap, mut eq_err, mut mu_err) = (f64::INFINITY, 0.0f64, 0.0f64);
    let offsets = misalignment_offsets();
    for (model, c) in &models {
        for &alpha in &offsets {
            let (g1, g2) = misalignment_matrices(model, &c.atfs, alpha)?;
            let gr = karcher_mean(&[g1.clone(), g2.clone()], &tight_mean_config())?.mean;
            let ge = euclidean_mean(&[g1, g2])?;
            for j in 0..2 {
                let sr = quadratic_sir(&gr, &c.steering[0], &c.steering[j + 1])?;
                let se = quadratic_sir(&ge, &c.steering[0], &c.steering[j + 1])?;
                let gap = (sr - se) / se;
                if alpha == 0.5 {
                    eq_err = eq_err.max(gap.abs());
                } else {
                    min_gap = min_gap.min(gap);
                }
                let h = &c.atfs.interferences[j];
                let hh = h.norm_squared();
                for (g, rule) in [(&gr, MuRule::Riemannian), (&ge, MuRule::Euclidean)] {
                    let measured = (g.quadratic_form(h) / hh - model.sigma_v_sq) / hh;
                    let want = misalignment_mu_sq(model, j, alpha, rule);
                    mu_err = mu_err.max((measured - want).abs() / (want + model.sigma_v_sq / hh));
                }
            }
        }
    }
    Ok((min_gap, eq_err, mu_err, models.len() * offsets.len()))
}

/// `SIR(Γ_R(α)) ≥ SIR(Γ_E(α))` for α < ½ and equality at α = ½.
pub fn misalignment_sweep(random_models: usize, seed: u64) -> Vec<Check> {
    const ORDER: &str = "misaligned segments: SIR(R) >= SIR(E) for offsets 0 .. 0.45";
    const EQUAL: &str = "misaligned segments: SIR(R) = SIR(E) at offset 0.5";
    const MU: &str = "misaligned segments: interference coefficients match closed form";
    match misalignment_stats(random_models, seed) {
        Ok((min_gap, eq_err, mu_err, trials)) => {
            let order = Check {
                name: ORDER.into(),
                passed: min_gap >= -1e-9,
                trials,
                worst: min_gap,
                tolerance: -1e-9,
                detail: format!("smallest relative gap {min_gap:.3e}"),
            };
            vec![
                order,
                Check::error(EQUAL, trials, eq_err, 1e-9, "relative difference"),
                Check::error(MU, trials, mu_err, 1e-7, "relative error"),
            ]
        }
        Err(e) => [ORDER, EQUAL, MU]
            .iter()
            .map(|n| Check::failed(n, 0, format!("error: {e}")))
            .collect(),
    }
}

// --------------------------------------------------------------- streaming

/// Running Riemannian mean of random commuting sets against the
/// eigenvalue-wise geometric mean.
pub fn streaming_commuting(trials: usize, seed: u64) -> Check {
    const NAME: &str = "running Riemannian mean of commuting sets equals product of K-th roots";
    guarded(NAME, trials, || -> Res<Check> {
        let mut r = rng(seed, 20);
        let mut worst: f64 = 0.0;
        for _ in 0..trials {
            let n = r.random_range(3..=12);
            let k = r.random_range(2..=10);
            let (ms, _) = random_commuting_set(&mut r, n, k);
            let mut t = RiemannianMeanTracker::new(n);
            for g in &ms {
                t.push(g)?;
            }
            worst = worst.max(abs_fro(t.mean(), &commuting_mean(&ms)?));
        }
        Ok(Check::error(NAME, trials, worst, 1e-8, "Frobenius error"))
    })
}

/// Streaming DS estimate after the last segment of a stationary scene
/// against the batch Riemannian DS estimate. Each scene has a desired source
/// and one interference 10 dB weaker, both always on, in the default
/// reverberant room.
pub fn streaming_matches_batch(scenes: usize, seed: u64) -> Check {
    const NAME: &str = "streaming estimate after K segments matches batch estimate";
    guarded(NAME, scenes, || -> Res<Check> {
        let spec = ExperimentSpec {
            interferences: 1,
            segments: 6,
            segment_samples: 8192,
            activation: ActivationPattern::Bernoulli { p: 1.0 },
            input_sir_db: 10.0,
            seed,
            ..ExperimentSpec::two_interferences()
        };
        let cfg = &spec.pipeline;
        let step = cfg.grid.step_deg;
        let mut worst: f64 = 0.0;
        for trial in 0..scenes {
            let sc = spec.scenario(trial)?;
            let sig = render_signals(&sc, spec.render_samples())?;
            let (seq, _) = doa_streaming(&sig.channels, sig.fs, &sc.array, cfg, BeamformerKind::Ds)?;
            let batch = doa_batch(
                &sig.channels,
                sig.fs,
                &sc.array,
                cfg,
                MeanKind::Riemannian,
                BeamformerKind::Ds,
            )?;
            let last = seq.last().and_then(|e| e.primary()).ok_or("no streaming estimate")?;
            let b = batch.estimate.primary().ok_or("no batch estimate")?;
            worst = worst.max((last - b).abs().to_degrees() / step);
        }
        let mut c = Check::error(NAME, scenes, worst, 1.0 + 1e-9, "difference in grid steps");
        c.detail += &format!(" ({step} degree grid)");
        Ok(c)
    })
}

// ------------------------------------------------------------------ suites

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Geometry,
    Lemma1,
    Props,
    Example1,
    Misalignment,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Geometry,
        Suite::Lemma1,
        Suite::Props,
        Suite::Example1,
        Suite::Misalignment,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Geometry => "geometry",
            Suite::Lemma1 => "lemma1",
            Suite::Props => "props",
            Suite::Example1 => "example1",
            Suite::Misalignment => "misalignment",
        }
    }

    pub fn run(&self, seed: u64) -> SuiteReport {
        let checks = match self {
            Suite::Geometry => vec![
                commuting_oracle(100, seed),
                two_point_midpoint(100, seed),
                log_exp_round_trip(100, seed),
                distance_invariance(100, seed),
                common_eigenvalue(200, seed),
                trace_ordering(200, seed),
                loewner_ordering(200, seed),
                streaming_commuting(100, seed),
            ],
            Suite::Lemma1 => vec![
                lemma1_riemannian(50, seed),
                lemma1_euclidean(50, seed),
                mu_ordering(10_000, seed),
            ],
            Suite::Props => vec![
                sir_ordering(1000, seed, ModelFamily::DesiredDominant),
                sir_ordering(1000, seed, ModelFamily::NoCrossCorrelation),
                total_sir_ordering(1000, seed),
                noise_derivative_ordering(500, seed),
                sir_bar_ordering(200, seed),
                vanishing_noise_monotone(),
                strong_interference_limits(),
            ],
            Suite::Example1 => vec![
                example1_closed_form(),
                example1_population(),
                example1_sampled(256, 20, seed),
            ],
            Suite::Misalignment => misalignment_sweep(20, seed),
        };
        SuiteReport {
            suite: self.name().into(),
            passed: checks.iter().all(|c| c.passed),
            checks,
        }
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown suite {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_of_cubic() {
        let d = derivative(|x| x * x * x, 2.0, 1e-4);
        assert!((d - 12.0).abs() < 1e-9);
    }

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn failed_check_carries_error() {
        let c = guarded("x", 3, || -> Result<Check, String> { Err("boom".into()) });
        assert!(!c.passed);
        assert!(c.detail.contains("boom"));
    }

    #[test]
    fn small_runs_pass() {
        for c in [
            commuting_oracle(5, 1),
            two_point_midpoint(5, 1),
            common_eigenvalue(5, 1),
            loewner_ordering(5, 1),
            lemma1_riemannian(3, 1),
            sir_ordering(50, 1, ModelFamily::DesiredDominant),
            noise_derivative_ordering(20, 1),
            example1_population(),
        ] {
            assert!(c.passed, "{c}");
        }
    }
}
