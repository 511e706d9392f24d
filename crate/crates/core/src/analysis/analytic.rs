//! Closed-form means of segment correlation matrices with one constantly
//! active source, intermittent interferences with pairwise orthogonal
//! transfer functions, and white noise.
//!
//! Every segment matrix has the form `σ₀² h₀h₀ᴴ + Σ_j σ_j² 1[j active] h_jh_jᴴ + σ_v² I`.
//! Both the Riemannian and the Euclidean mean keep that form with the
//! interference powers replaced by coefficients `μ_j²`; only the rule giving
//! `μ_j²` differs. Steering vectors enter through two numbers: κ, the
//! normalized correlation between a source's steering vector and its own
//! transfer function, and ρ, the same quantity for different sources.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::hpd::{hermitian_part, HpdMatrix};
use crate::{CMatrix, CVector, Complex64};

/// Relative inner-product bound for transfer functions to count as orthogonal.
pub const ORTHOGONALITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferenceParams {
    /// Emitted power σ_j².
    pub sigma_sq: f64,
    /// Fraction of segments in which the interference is active.
    pub tau: f64,
    /// ‖h_j‖².
    pub h_norm_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticModel {
    pub sigma0_sq: f64,
    pub sigma_v_sq: f64,
    pub interferences: Vec<InterferenceParams>,
    pub kappa: f64,
    pub rho: f64,
    pub h0_norm_sq: f64,
    /// Number of microphones.
    pub m: usize,
}

impl AnalyticModel {
    /// Anechoic, unattenuated setting with two equal-power interferences,
    /// each active in one of two segments.
    pub fn two_alternating(m: usize, sigma_v_sq: f64) -> Self {
        let mf = m as f64;
        let i = InterferenceParams {
            sigma_sq: 1.0,
            tau: 0.5,
            h_norm_sq: mf,
        };
        Self {
            sigma0_sq: 1.0,
            sigma_v_sq,
            interferences: vec![i, i],
            kappa: 1.0,
            rho: 0.0,
            h0_norm_sq: mf,
            m,
        }
    }

    /// A random valid model with `n_i` interferences. Powers are log-uniform
    /// over six decades, τ uniform in (0, 1), κ in (0.3, 1] and ρ below both
    /// κ and the bound needed for [`construct_vectors`].
    pub fn random<R: Rng + ?Sized>(rng: &mut R, m: usize, n_i: usize) -> Self {
        let log_uniform = |rng: &mut R, lo: f64, hi: f64| 10f64.powf(rng.random_range(lo..hi));
        let interferences = (0..n_i)
            .map(|_| InterferenceParams {
                sigma_sq: log_uniform(rng, -3.0, 3.0),
                tau: rng.random_range(0.02..0.98),
                h_norm_sq: log_uniform(rng, -1.0, 1.0),
            })
            .collect();
        let kappa: f64 = rng.random_range(0.3..=1.0);
        let rho_max = (kappa / 2.0).min((1.0 - kappa) / n_i.max(1) as f64);
        let rho = rng.random_range(0.0..=1.0) * rho_max;
        Self {
            sigma0_sq: log_uniform(rng, -2.0, 2.0),
            sigma_v_sq: log_uniform(rng, -3.0, 1.0),
            interferences,
            kappa,
            rho,
            h0_norm_sq: log_uniform(rng, -1.0, 1.0),
            m,
        }
    }

    pub fn validate(&self) -> Result<(), AnalysisError> {
        let bad = |msg: String| Err(AnalysisError::InvalidModel(msg));
        if !(self.sigma0_sq > 0.0 && self.sigma0_sq.is_finite()) {
            return bad(format!("desired power {}", self.sigma0_sq));
        }
        if !(self.sigma_v_sq > 0.0 && self.sigma_v_sq.is_finite()) {
            return bad(format!("noise power {}", self.sigma_v_sq));
        }
        if !(self.h0_norm_sq > 0.0 && self.h0_norm_sq.is_finite()) {
            return bad(format!("desired transfer-function energy {}", self.h0_norm_sq));
        }
        if !(0.0 <= self.rho && self.rho < self.kappa && self.kappa <= 1.0) {
            return bad(format!(
                "need 0 <= rho < kappa <= 1, got rho={} kappa={}",
                self.rho, self.kappa
            ));
        }
        if self.m < 2 {
            return bad(format!("{} microphones", self.m));
        }
        for (j, i) in self.interferences.iter().enumerate() {
            if !(i.sigma_sq > 0.0 && i.sigma_sq.is_finite() && i.h_norm_sq > 0.0 && i.h_norm_sq.is_finite()) {
                return bad(format!("interference {j}: power {} energy {}", i.sigma_sq, i.h_norm_sq));
            }
            if !(0.0..=1.0).contains(&i.tau) {
                return bad(format!("interference {j}: activity fraction {}", i.tau));
            }
        }
        Ok(())
    }

    /// Interference coefficient μ_j² under `rule`.
    pub fn mu_sq(&self, j: usize, rule: MuRule) -> f64 {
        let i = &self.interferences[j];
        match rule {
            MuRule::Riemannian => mu_riemannian(i.sigma_sq, i.h_norm_sq, self.sigma_v_sq, i.tau),
            MuRule::Euclidean => mu_euclidean(i.sigma_sq, i.tau),
            MuRule::Optimal => 0.0,
        }
    }

    /// Desired-source coefficient; the optimal matrix is normalized to 1.
    fn desired_power(&self, rule: MuRule) -> f64 {
        match rule {
            MuRule::Optimal => 1.0,
            _ => self.sigma0_sq,
        }
    }

    /// `dᴴ Γ d / M` for the steering vector of source `r` (0 is the desired
    /// source), with Γ in the parametric form under `rule`.
    fn steered_power(&self, r: usize, rule: MuRule) -> f64 {
        let weight = |s: usize| if s == r { self.kappa } else { self.rho };
        let mut p = self.desired_power(rule) * self.h0_norm_sq * weight(0) + self.sigma_v_sq;
        for j in 0..self.interferences.len() {
            p += self.mu_sq(j, rule) * self.interferences[j].h_norm_sq * weight(j + 1);
        }
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuRule {
    /// Affine-invariant mean: geometric averaging of powers.
    Riemannian,
    /// Arithmetic mean of powers.
    Euclidean,
    /// Interferences removed and the desired power set to 1.
    Optimal,
}

/// `((σ_j²‖h_j‖² + σ_v²)^τ (σ_v²)^{1−τ} − σ_v²) / ‖h_j‖²`, evaluated as
/// `σ_v² expm1(τ ln(1 + σ_j²‖h_j‖²/σ_v²)) / ‖h_j‖²` to avoid cancellation.
pub fn mu_riemannian(sigma_j_sq: f64, h_norm_sq: f64, sigma_v_sq: f64, tau: f64) -> f64 {
    let x = sigma_j_sq * h_norm_sq / sigma_v_sq;
    sigma_v_sq * (tau * x.ln_1p()).exp_m1() / h_norm_sq
}

/// `σ_j² τ`.
pub fn mu_euclidean(sigma_j_sq: f64, tau: f64) -> f64 {
    sigma_j_sq * tau
}

/// Desired and interference transfer functions.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelAtfs {
    pub h0: CVector,
    pub interferences: Vec<CVector>,
}

impl ModelAtfs {
    fn all(&self) -> impl Iterator<Item = &CVector> {
        std::iter::once(&self.h0).chain(self.interferences.iter())
    }

    fn check(&self, model: &AnalyticModel) -> Result<(), AnalysisError> {
        if self.interferences.len() != model.interferences.len() {
            return Err(AnalysisError::WrongInterferenceCount {
                expected: model.interferences.len(),
                found: self.interferences.len(),
            });
        }
        let v: Vec<&CVector> = self.all().collect();
        for h in &v {
            if h.len() != model.m {
                return Err(AnalysisError::DimensionMismatch {
                    expected: model.m,
                    found: h.len(),
                });
            }
        }
        for a in 0..v.len() {
            for b in a + 1..v.len() {
                let inner = v[a].dotc(v[b]).norm();
                if inner > ORTHOGONALITY_TOLERANCE * v[a].norm() * v[b].norm() {
                    return Err(AnalysisError::AtfsNotOrthogonal { a, b, inner });
                }
            }
        }
        Ok(())
    }
}

/// Transfer functions plus steering vectors realizing a model's κ and ρ.
#[derive(Debug, Clone, PartialEq)]
pub struct Construction {
    pub atfs: ModelAtfs,
    /// `d_0` (desired) followed by one per interference, each of norm √M.
    pub steering: Vec<CVector>,
}

/// Builds orthogonal transfer functions with the model's energies and
/// steering vectors with `|⟨d_r, h_s⟩|² / (M ‖h_s‖²)` equal to κ for
/// `r = s` and ρ otherwise:
/// `d_r = √M (√κ ĥ_r + √ρ Σ_{s≠r} ĥ_s + √(1 − κ − Nρ) w_r)`
/// with `ĥ_r`, `w_r` all orthonormal.
pub fn construct_vectors<R: Rng + ?Sized>(model: &AnalyticModel, rng: &mut R) -> Result<Construction, AnalysisError> {
    model.validate()?;
    let n = model.interferences.len() + 1;
    let rest = 1.0 - model.kappa - (n - 1) as f64 * model.rho;
    if rest < -1e-12 {
        return Err(AnalysisError::InvalidModel(format!(
            "kappa + (N_I) rho = {} exceeds 1",
            1.0 - rest
        )));
    }
    let rest = rest.max(0.0);
    let needed = if rest > 0.0 { 2 * n } else { n };
    if needed > model.m {
        return Err(AnalysisError::InvalidModel(format!(
            "{needed} orthonormal vectors needed but only {} microphones",
            model.m
        )));
    }
    let m = model.m;
    let a = CMatrix::from_fn(m, m, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re, im)
    });
    let q = a.qr().q();
    let basis = |k: usize| q.column(k).into_owned();
    let norms: Vec<f64> = std::iter::once(model.h0_norm_sq)
        .chain(model.interferences.iter().map(|i| i.h_norm_sq))
        .collect();
    let h: Vec<CVector> = (0..n).map(|r| basis(r).scale(norms[r].sqrt())).collect();
    let sm = (m as f64).sqrt();
    let steering = (0..n)
        .map(|r| {
            let mut d = basis(r).scale(model.kappa.sqrt());
            for s in (0..n).filter(|&s| s != r) {
                d += basis(s).scale(model.rho.sqrt());
            }
            if rest > 0.0 {
                d += basis(n + r).scale(rest.sqrt());
            }
            d.scale(sm)
        })
        .collect();
    let mut h = h.into_iter();
    Ok(Construction {
        atfs: ModelAtfs {
            h0: h.next().expect("at least the desired source"),
            interferences: h.collect(),
        },
        steering,
    })
}

fn assemble(diag: f64, terms: impl Iterator<Item = (f64, CVector)>, m: usize) -> Result<HpdMatrix, AnalysisError> {
    let mut g = CMatrix::identity(m, m).scale(diag);
    for (w, h) in terms {
        g += (&h * h.adjoint()).scale(w);
    }
    Ok(HpdMatrix::new(hermitian_part(&g))?)
}

/// `σ₀² h₀h₀ᴴ + Σ_j μ_j² h_jh_jᴴ + σ_v² I` with μ from `rule`. The
/// transfer-function energies are taken from the vectors themselves.
pub fn analytic_mean_matrix(model: &AnalyticModel, atfs: &ModelAtfs, rule: MuRule) -> Result<HpdMatrix, AnalysisError> {
    model.validate()?;
    atfs.check(model)?;
    let mut m = model.clone();
    m.h0_norm_sq = atfs.h0.norm_squared();
    for (p, h) in m.interferences.iter_mut().zip(&atfs.interferences) {
        p.h_norm_sq = h.norm_squared();
    }
    let terms = std::iter::once((m.desired_power(rule), atfs.h0.clone())).chain(
        atfs.interferences
            .iter()
            .enumerate()
            .map(|(j, h)| (m.mu_sq(j, rule), h.clone())),
    );
    assemble(model.sigma_v_sq, terms, model.m)
}

/// Population correlation matrix of every segment given the activity of
/// each interference (`activity[j][i]`: interference `j` in segment `i`).
/// The activity fractions must match the model's τ.
pub fn population_segment_matrices(
    model: &AnalyticModel,
    atfs: &ModelAtfs,
    activity: &[Vec<bool>],
) -> Result<Vec<HpdMatrix>, AnalysisError> {
    model.validate()?;
    atfs.check(model)?;
    if activity.len() != model.interferences.len() {
        return Err(AnalysisError::WrongInterferenceCount {
            expected: model.interferences.len(),
            found: activity.len(),
        });
    }
    let segments = activity.first().map_or(1, |a| a.len());
    if segments == 0 || activity.iter().any(|a| a.len() != segments) {
        return Err(AnalysisError::InvalidInput(
            "activity rows must share one nonzero length".into(),
        ));
    }
    for (j, a) in activity.iter().enumerate() {
        let frac = a.iter().filter(|&&x| x).count() as f64 / segments as f64;
        if (frac - model.interferences[j].tau).abs() > 1e-12 {
            return Err(AnalysisError::InvalidModel(format!(
                "interference {j} is active in a fraction {frac} of segments, model says {}",
                model.interferences[j].tau
            )));
        }
    }
    (0..segments)
        .map(|i| {
            let terms = std::iter::once((model.sigma0_sq, atfs.h0.clone())).chain(
                atfs.interferences
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| activity[*j][i])
                    .map(|(j, h)| (model.interferences[j].sigma_sq, h.clone())),
            );
            assemble(model.sigma_v_sq, terms, model.m)
        })
        .collect()
}

/// Per-interference DS output SIR `d₀ᴴΓd₀ / d_jᴴΓd_j` of the parametric
/// matrix under `rule`, expanded through κ and ρ.
pub fn analytic_sir(model: &AnalyticModel, rule: MuRule) -> Result<Vec<f64>, AnalysisError> {
    model.validate()?;
    let num = model.steered_power(0, rule);
    Ok((1..=model.interferences.len())
        .map(|r| num / model.steered_power(r, rule))
        .collect())
}

/// Desired-direction power over the interference-direction power averaged
/// across interferences.
pub fn analytic_total_sir(model: &AnalyticModel, rule: MuRule) -> Result<f64, AnalysisError> {
    model.validate()?;
    let n = model.interferences.len();
    if n == 0 {
        return Err(AnalysisError::WrongInterferenceCount { expected: 1, found: 0 });
    }
    let den = (1..=n).map(|r| model.steered_power(r, rule)).sum::<f64>() / n as f64;
    Ok(model.steered_power(0, rule) / den)
}

/// Segment matrices of two alternating interferences whose activity is
/// offset from the segment boundaries by a fraction `alpha`: interference 1
/// covers `alpha` of segment 1 and `1 − alpha` of segment 2, interference 2
/// the complement. Amplitudes scale with the covered fraction.
pub fn misalignment_matrices(
    model: &AnalyticModel,
    atfs: &ModelAtfs,
    alpha: f64,
) -> Result<(HpdMatrix, HpdMatrix), AnalysisError> {
    if model.interferences.len() != 2 {
        return Err(AnalysisError::WrongInterferenceCount {
            expected: 2,
            found: model.interferences.len(),
        });
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(AnalysisError::InvalidInput(format!("offset {alpha} outside [0, 1]")));
    }
    model.validate()?;
    atfs.check(model)?;
    let (s1, s2) = (model.interferences[0].sigma_sq, model.interferences[1].sigma_sq);
    let (h1, h2) = (&atfs.interferences[0], &atfs.interferences[1]);
    let b = 1.0 - alpha;
    let build = |w1: f64, w2: f64| {
        assemble(
            model.sigma_v_sq,
            [
                (model.sigma0_sq, atfs.h0.clone()),
                (w1 * s1, h1.clone()),
                (w2 * s2, h2.clone()),
            ]
            .into_iter(),
            model.m,
        )
    };
    Ok((build(alpha * alpha, b * b)?, build(b * b, alpha * alpha)?))
}

/// μ_j² of the two-segment means of [`misalignment_matrices`].
pub fn misalignment_mu_sq(model: &AnalyticModel, j: usize, alpha: f64, rule: MuRule) -> f64 {
    let i = &model.interferences[j];
    let (a2, b2) = (alpha * alpha, (1.0 - alpha) * (1.0 - alpha));
    let e = i.sigma_sq * i.h_norm_sq;
    let v = model.sigma_v_sq;
    match rule {
        MuRule::Riemannian => (((a2 * e + v) * (b2 * e + v)).sqrt() - v) / i.h_norm_sq,
        MuRule::Euclidean => 0.5 * i.sigma_sq * (a2 + b2),
        MuRule::Optimal => 0.0,
    }
}

/// `aᴴΓa / bᴴΓb`.
pub fn quadratic_sir(g: &HpdMatrix, a: &CVector, b: &CVector) -> Result<f64, AnalysisError> {
    for v in [a, b] {
        if v.len() != g.dim() {
            return Err(AnalysisError::DimensionMismatch {
                expected: g.dim(),
                found: v.len(),
            });
        }
    }
    Ok(g.quadratic_form(a) / g.quadratic_form(b))
}

/// SIR measured with transfer functions in place of steering vectors:
/// `h₀ᴴΓh₀ / h_jᴴΓh_j`.
pub fn sir_bar(g: &HpdMatrix, h0: &CVector, hj: &CVector) -> Result<f64, AnalysisError> {
    quadratic_sir(g, h0, hj)
}

/// `count` broadside angles whose steering vectors on a half-wavelength ULA
/// of `m` elements are mutually orthogonal: sines on the lattice `2k/m`,
/// alternating around zero.
pub fn orthogonal_ula_directions(m: usize, count: usize) -> Result<Vec<f64>, AnalysisError> {
    if count > m || m < 2 {
        return Err(AnalysisError::InvalidInput(format!(
            "at most {m} orthogonal directions exist for {m} microphones"
        )));
    }
    let step = 2.0 / m as f64;
    Ok((0..count)
        .map(|i| {
            let k = i.div_ceil(2) as f64;
            let s = if i % 2 == 1 { k * step } else { -k * step };
            s.asin()
        })
        .collect())
}
