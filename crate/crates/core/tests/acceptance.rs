//! Acceptance criteria, one PASS/FAIL line each, followed by the individual
//! checks behind it. Exits nonzero if a criterion outside `KNOWN_FAILURES`
//! fails.
//!
//! Known failures:
//! - 5: the per-interference ordering SIR_j(R) > SIR_j(E) does not hold for
//!   every valid model. With x the interference's own term and A the other
//!   interferences' terms, dSIR_j/dA has the sign of ρ(D − N), which is
//!   positive once SIR_j < 1, and the Riemannian mean shrinks A. It holds
//!   when the desired term dominates, when ρ = 0, and with one interference;
//!   the total SIR ordering holds throughout.
//! - 7 (final value): at σ_v² = 1e-10 the distance to Γ_opt is about
//!   (σ²‖h‖²)^τ σ_v^(2(1−τ)), far above 1e-6 for strong interferences
//!   active nearly half the time. The monotone decrease holds.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use riemann_doa::experiment::{run_monte_carlo, summarize, ExperimentSpec, Summary};
use riemann_doa::verify::*;

const SEED: u64 = 1;
const KNOWN_FAILURES: [u32; 2] = [5, 7];

struct Criterion {
    id: u32,
    title: &'static str,
    checks: Vec<Check>,
    elapsed: Duration,
    limit: Option<Duration>,
}

impl Criterion {
    fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed) && self.limit.is_none_or(|l| self.elapsed <= l)
    }
}

fn timed(id: u32, title: &'static str, limit_s: Option<u64>, f: impl FnOnce() -> Vec<Check>) -> Criterion {
    let t = Instant::now();
    let checks = f();
    Criterion {
        id,
        title,
        checks,
        elapsed: t.elapsed(),
        limit: limit_s.map(Duration::from_secs),
    }
}

#[derive(Clone, Copy)]
enum Cmp {
    AtLeast,
    Above,
    AtMost,
}

/// A check on a Monte-Carlo median against a bound.
fn bound(name: &str, trials: usize, value: f64, cmp: Cmp, limit: f64, unit: &str) -> Check {
    let (passed, op) = match cmp {
        Cmp::AtLeast => (value >= limit, ">="),
        Cmp::Above => (value > limit, ">"),
        Cmp::AtMost => (value <= limit, "<="),
    };
    Check {
        name: name.into(),
        passed,
        trials,
        worst: value,
        tolerance: limit,
        detail: format!("{value:.2}{unit} ({op} {limit}{unit} required)"),
    }
}

fn median<'a>(s: &'a [Summary], mean: &str, bf: &str) -> &'a Summary {
    s.iter()
        .find(|r| r.mean_kind == mean && r.beamformer == bf)
        .unwrap_or_else(|| panic!("no {mean}/{bf} rows"))
}

fn monte_carlo(spec: &ExperimentSpec) -> Result<Vec<Summary>, Check> {
    run_monte_carlo(spec).map(|r| summarize(&r)).map_err(|e| Check {
        name: "Monte-Carlo run".into(),
        passed: false,
        trials: spec.monte_carlo,
        worst: f64::NAN,
        tolerance: f64::NAN,
        detail: format!("error: {e}"),
    })
}

fn sir_gap(s: &[Summary], bf: &str, cmp: Cmp, limit: f64) -> Check {
    let (r, e) = (median(s, "riemannian", bf), median(s, "euclidean", bf));
    let name = format!(
        "median {bf} output SIR, Riemannian {:.2} dB minus Euclidean {:.2} dB",
        r.output_sir_db.p50, e.output_sir_db.p50
    );
    bound(
        &name,
        r.trials,
        r.output_sir_db.p50 - e.output_sir_db.p50,
        cmp,
        limit,
        " dB",
    )
}

fn two_interferences() -> Vec<Check> {
    let s = match monte_carlo(&ExperimentSpec::two_interferences()) {
        Ok(s) => s,
        Err(c) => return vec![c],
    };
    let (r, e) = (median(&s, "riemannian", "ds"), median(&s, "euclidean", "ds"));
    vec![
        sir_gap(&s, "ds", Cmp::AtLeast, 3.0),
        sir_gap(&s, "sbsp", Cmp::AtLeast, 6.0),
        bound(
            "median Riemannian ds DoA error",
            r.trials,
            r.doa_error_deg.p50,
            Cmp::AtMost,
            2.0,
            " deg",
        ),
        bound(
            "median Euclidean ds DoA error",
            e.trials,
            e.doa_error_deg.p50,
            Cmp::Above,
            5.0,
            " deg",
        ),
    ]
}

fn many_interferences() -> Vec<Check> {
    match monte_carlo(&ExperimentSpec::many_interferences()) {
        Ok(s) => vec![sir_gap(&s, "ds", Cmp::Above, 0.0)],
        Err(c) => vec![c],
    }
}

fn main() -> ExitCode {
    let criteria = vec![
        timed(
            1,
            "Two alternating interferences, closed form and pipeline",
            Some(10),
            || {
                vec![
                    example1_closed_form(),
                    example1_population(),
                    example1_sampled(256, 20, SEED),
                ]
            },
        ),
        timed(2, "Karcher mean of commuting sets", Some(30), || {
            vec![commuting_oracle(100, SEED)]
        }),
        timed(3, "Two-point geodesic midpoint", None, || {
            vec![two_point_midpoint(100, SEED)]
        }),
        timed(4, "Segment means in closed form", None, || {
            vec![lemma1_riemannian(50, SEED), lemma1_euclidean(50, SEED)]
        }),
        timed(5, "SIR_j(R) > SIR_j(E) on any valid model", None, || {
            vec![sir_ordering(1000, SEED, ModelFamily::Any)]
        }),
        timed(6, "Noise derivative ordering", None, || {
            vec![noise_derivative_ordering(500, SEED)]
        }),
        timed(7, "Riemannian mean tends to the optimal matrix", None, || {
            vec![vanishing_noise_monotone(), vanishing_noise_final()]
        }),
        timed(8, "Common eigenvector, trace and Loewner orderings", None, || {
            vec![
                common_eigenvalue(200, SEED),
                trace_ordering(200, SEED),
                loewner_ordering(200, SEED),
            ]
        }),
        timed(9, "Misaligned segments", None, || misalignment_sweep(20, SEED)),
        timed(10, "Streaming against batch", None, || {
            vec![streaming_matches_batch(10, SEED), streaming_commuting(100, SEED)]
        }),
        timed(11, "Two alternating interferences, MC 20", Some(600), two_interferences),
        timed(12, "Fourteen interferences, MC 10", Some(600), many_interferences),
    ];

    let mut unexpected = Vec::new();
    for c in &criteria {
        let tag = if c.passed() { "PASS" } else { "FAIL" };
        let limit = c.limit.map_or(String::new(), |l| format!(", limit {} s", l.as_secs()));
        println!(
            "{tag} {:>2}. {} ({:.1} s{limit})",
            c.id,
            c.title,
            c.elapsed.as_secs_f64()
        );
        for check in &c.checks {
            println!("       {check}");
        }
        let known = KNOWN_FAILURES.contains(&c.id);
        match (c.passed(), known) {
            (false, false) => unexpected.push(c.id),
            (true, true) => println!("       note: listed as a known failure but passed"),
            _ => {}
        }
    }
    let passed = criteria.iter().filter(|c| c.passed()).count();
    println!(
        "{passed} of {} criteria passed; known failures {KNOWN_FAILURES:?}",
        criteria.len()
    );
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}
