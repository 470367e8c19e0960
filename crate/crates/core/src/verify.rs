//! Seeded ensemble verification.
//!
//! Each case draws one rank-one instance from [`ENSEMBLE_LAW`] and runs a
//! fixed battery of checks on it. Cases are independent (their generators
//! are separate ChaCha streams) and may run in parallel; records are always
//! emitted in case order, so the report is a pure function of the
//! configuration.

use std::time::Instant;

use rand::Rng;
use serde::Serialize;

use crate::convexity::{check_exponential_convexity, dichotomy_check, TGrid, DEFAULT_PSD_TOL};
use crate::ensemble::{case_rng, draw_rank_one_instance, RankOneInstance, ENSEMBLE_LAW};
use crate::hermitian::{conjugate, eigvalsh, lie_product_approx, HermitianMatrix};
use crate::par::{map_range, Execution};
use crate::reduction::{default_rank_tol, reduce};
use crate::transform::{
    commuting_measure, default_t_far, growth_exponents, trace_f, trace_function, TracePair,
    DEFAULT_COMM_TOL,
};

/// Pass thresholds used by the runner.
pub mod thresholds {
    pub const REDUCTION_RESIDUAL: f64 = 1e-10;
    pub const OFFDIAG_FLOOR: f64 = -1e-12;
    pub const STRUCTURAL_ZERO: f64 = 1e-11;
    pub const TRACE_INVARIANCE: f64 = 1e-9;
    pub const LIE_RATIO: f64 = 0.75;
    pub const ROUND_TRIP: f64 = 1e-10;
    pub const GROWTH: f64 = 0.05;
    pub const SANDWICH_SLACK: f64 = 1e-12;
}

pub const GRAM_POINTS: usize = 8;
pub const GRID_LO: f64 = -2.0;
pub const GRID_HI: f64 = 2.0;
pub const INVARIANCE_POINTS: usize = 11;
/// Lie step counts `p = 2^j`, `j = 3..=10`.
pub const LIE_MIN_LOG2: u32 = 3;
pub const LIE_MAX_LOG2: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct VerifyConfig {
    pub cases: usize,
    pub max_n: usize,
    pub seed: u64,
    /// Record per-check wall-clock time. Off by default because timings
    /// make reports differ between runs.
    pub timings: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub seed: u64,
    pub case: u64,
    pub n: usize,
    pub check: &'static str,
    pub passed: bool,
    /// What `worst` measures.
    pub metric: &'static str,
    pub worst: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportHeader {
    pub tool: &'static str,
    pub version: &'static str,
    pub law: &'static str,
    pub config: VerifyConfig,
    pub psd_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub cases: usize,
    pub checks: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub header: ReportHeader,
    pub records: Vec<CheckRecord>,
    pub summary: Summary,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.summary.failures == 0
    }
}

/// Runs every case of the ensemble.
pub fn run_verification(
    config: &VerifyConfig,
    psd_tol: f64,
    exec: Execution,
) -> VerificationReport {
    let per_case = map_range(exec, config.cases, |i| run_case(config, i as u64, psd_tol));
    let records: Vec<CheckRecord> = per_case.into_iter().flatten().collect();
    let failures = records.iter().filter(|r| !r.passed).count();
    VerificationReport {
        header: ReportHeader {
            tool: "expconvex",
            version: env!("CARGO_PKG_VERSION"),
            law: ENSEMBLE_LAW,
            config: *config,
            psd_tol,
        },
        summary: Summary {
            cases: config.cases,
            checks: records.len(),
            failures,
        },
        records,
    }
}

/// Default PSD tolerance for the runner.
pub fn default_psd_tol() -> f64 {
    DEFAULT_PSD_TOL
}

struct Outcome {
    passed: bool,
    metric: &'static str,
    worst: f64,
}

type CheckFn = fn(&CaseContext) -> Result<Outcome, String>;

struct CaseContext {
    inst: RankOneInstance,
    random_grid: TGrid,
    psd_tol: f64,
}

const CHECKS: &[(&str, CheckFn)] = &[
    ("reduction", check_reduction),
    ("trace_invariance", check_trace_invariance),
    ("ec_gram_equispaced", check_gram_equispaced),
    ("ec_gram_random", check_gram_random),
    ("ec_dichotomy", check_dichotomy),
    ("lie_convergence", check_lie),
    ("commuting_round_trip", check_round_trip),
    ("growth_exponents", check_growth),
    ("growth_sandwich", check_sandwich),
];

fn run_case(config: &VerifyConfig, index: u64, psd_tol: f64) -> Vec<CheckRecord> {
    let mut rng = case_rng(config.seed, index);
    let inst = draw_rank_one_instance(&mut rng, index, config.max_n);
    let points: Vec<f64> = (0..GRAM_POINTS)
        .map(|_| rng.random_range(GRID_LO..=GRID_HI))
        .collect();
    let mut sorted = points;
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let random_grid = TGrid::new(sorted).expect("finite sorted draws");
    let ctx = CaseContext {
        inst,
        random_grid,
        psd_tol,
    };

    CHECKS
        .iter()
        .map(|&(name, check)| {
            let start = Instant::now();
            let result = check(&ctx);
            let elapsed_ms = config.timings.then(|| start.elapsed().as_secs_f64() * 1e3);
            let base = CheckRecord {
                seed: config.seed,
                case: index,
                n: ctx.inst.n,
                check: name,
                passed: false,
                metric: "",
                worst: f64::NAN,
                error: None,
                elapsed_ms,
            };
            match result {
                Ok(o) => CheckRecord {
                    passed: o.passed && o.worst.is_finite(),
                    metric: o.metric,
                    worst: o.worst,
                    ..base
                },
                Err(e) => CheckRecord {
                    error: Some(e),
                    ..base
                },
            }
        })
        .collect()
}

fn equispaced(n: usize) -> TGrid {
    TGrid::equispaced(GRID_LO, GRID_HI, n).expect("valid grid")
}

fn pair(inst: &RankOneInstance) -> Result<TracePair, String> {
    TracePair::new(inst.a.clone(), inst.b.clone()).map_err(|e| e.to_string())
}

fn check_reduction(ctx: &CaseContext) -> Result<Outcome, String> {
    let (a, b) = (&ctx.inst.a, &ctx.inst.b);
    let r = reduce(a, b, default_rank_tol(a)).map_err(|e| e.to_string())?;
    let res = r.residuals(a, b).map_err(|e| e.to_string())?;
    let n = r.m.dim();
    let structural = (0..n - 1)
        .flat_map(|j| ((j + 1)..n - 1).map(move |k| (j, k)))
        .map(|(j, k)| r.m.get(j, k).norm())
        .fold(0.0_f64, f64::max);
    let worst = res.a.max(res.b).max(res.unitarity);
    Ok(Outcome {
        passed: worst <= thresholds::REDUCTION_RESIDUAL
            && res.min_offdiag >= thresholds::OFFDIAG_FLOOR
            && structural <= thresholds::STRUCTURAL_ZERO,
        metric: "max(|WAW*-L|, |WBW*-M|, |WW*-I|)",
        worst,
    })
}

fn check_trace_invariance(ctx: &CaseContext) -> Result<Outcome, String> {
    let (a, b) = (&ctx.inst.a, &ctx.inst.b);
    let r = reduce(a, b, default_rank_tol(a)).map_err(|e| e.to_string())?;
    let original = pair(&ctx.inst)?;
    let reduced = TracePair::new(r.l, r.m).map_err(|e| e.to_string())?;
    let mut worst = 0.0_f64;
    for &t in equispaced(INVARIANCE_POINTS).points() {
        let f = trace_f(&original, t).map_err(|e| e.to_string())?;
        let g = trace_f(&reduced, t).map_err(|e| e.to_string())?;
        worst = worst.max((f - g).abs() / f.max(1.0));
    }
    Ok(Outcome {
        passed: worst <= thresholds::TRACE_INVARIANCE,
        metric: "max |f_AB - f_LM| / max(1, f_AB)",
        worst,
    })
}

fn gram_outcome(ctx: &CaseContext, grid: &TGrid) -> Result<Outcome, String> {
    let f = trace_function(pair(&ctx.inst)?);
    let report = check_exponential_convexity(&f, grid, ctx.psd_tol).map_err(|e| e.to_string())?;
    Ok(Outcome {
        passed: report.passed,
        metric: "min eigenvalue / max(1, |G|_max)",
        worst: report.normalized_min_eigenvalue(),
    })
}

fn check_gram_equispaced(ctx: &CaseContext) -> Result<Outcome, String> {
    gram_outcome(ctx, &equispaced(GRAM_POINTS))
}

fn check_gram_random(ctx: &CaseContext) -> Result<Outcome, String> {
    gram_outcome(ctx, &ctx.random_grid)
}

fn check_dichotomy(ctx: &CaseContext) -> Result<Outcome, String> {
    let f = trace_function(pair(&ctx.inst)?);
    let grid = equispaced(INVARIANCE_POINTS);
    let d = dichotomy_check(&f, &grid).map_err(|e| e.to_string())?;
    let min = grid
        .points()
        .iter()
        .map(|&t| f.eval(t))
        .fold(f64::INFINITY, f64::min);
    Ok(Outcome {
        passed: d.all_positive,
        metric: "min f on grid",
        worst: min,
    })
}

/// Worst ratio `error(2k) / error(k)` over `k = 8, 16, …, 512`.
pub fn lie_worst_ratio(x: &HermitianMatrix, y: &HermitianMatrix) -> Result<f64, String> {
    let mut prev: Option<f64> = None;
    let mut worst = 0.0_f64;
    for k in LIE_MIN_LOG2..=LIE_MAX_LOG2 {
        let approx = lie_product_approx(x, y, 1 << k, true).map_err(|e| e.to_string())?;
        let err = approx.reference_error.expect("reference requested");
        if let Some(p) = prev {
            worst = worst.max(err / p);
        }
        prev = Some(err);
    }
    Ok(worst)
}

fn check_lie(ctx: &CaseContext) -> Result<Outcome, String> {
    let worst = lie_worst_ratio(&ctx.inst.a, &ctx.inst.b)?;
    Ok(Outcome {
        passed: worst <= thresholds::LIE_RATIO,
        metric: "max error(2p) / error(p), p >= 8",
        worst,
    })
}

/// `(A, W* diag(M) W)`: a commuting pair built from the instance's own
/// reduction.
pub fn commuting_companion(inst: &RankOneInstance) -> Result<TracePair, String> {
    let (a, b) = (&inst.a, &inst.b);
    let r = reduce(a, b, default_rank_tol(a)).map_err(|e| e.to_string())?;
    let diag = HermitianMatrix::from_real_diagonal(&r.m.diagonal()).map_err(|e| e.to_string())?;
    let b_comm = conjugate(&r.w.adjoint(), &diag).map_err(|e| e.to_string())?;
    TracePair::new(a.clone(), b_comm).map_err(|e| e.to_string())
}

fn check_round_trip(ctx: &CaseContext) -> Result<Outcome, String> {
    let pair = commuting_companion(&ctx.inst)?;
    let measure = commuting_measure(&pair, DEFAULT_COMM_TOL).map_err(|e| e.to_string())?;
    let mut worst = 0.0_f64;
    for &t in equispaced(INVARIANCE_POINTS).points() {
        let f = trace_f(&pair, t).map_err(|e| e.to_string())?;
        let g = measure.laplace_transform(t).map_err(|e| e.to_string())?;
        worst = worst.max((f - g).abs() / f);
    }
    let mass = trace_f(&pair, 0.0).map_err(|e| e.to_string())?;
    worst = worst.max((measure.total_mass() - mass).abs() / mass);
    Ok(Outcome {
        passed: worst <= thresholds::ROUND_TRIP,
        metric: "max relative |L[sigma] - f| and mass defect",
        worst,
    })
}

fn check_growth(ctx: &CaseContext) -> Result<Outcome, String> {
    let pair = pair(&ctx.inst)?;
    let est = growth_exponents(&pair, default_t_far(&pair)).map_err(|e| e.to_string())?;
    let worst = est.max_error();
    Ok(Outcome {
        passed: worst <= thresholds::GROWTH,
        metric: "max |estimate - eigenvalue extreme|",
        worst,
    })
}

/// `e^{tλ_max} e^{−‖B‖} ≤ f(t) ≤ n e^{tλ_max} e^{‖B‖}` for `t > 0`, in logs.
fn check_sandwich(ctx: &CaseContext) -> Result<Outcome, String> {
    let pair = pair(&ctx.inst)?;
    let spec_a = eigvalsh(&ctx.inst.a).map_err(|e| e.to_string())?;
    let spec_b = eigvalsh(&ctx.inst.b).map_err(|e| e.to_string())?;
    let lmax = spec_a[spec_a.len() - 1];
    let bnorm = spec_b[0].abs().max(spec_b[spec_b.len() - 1].abs());
    let n = ctx.inst.n as f64;
    let mut margin = f64::INFINITY;
    for k in 1..=10 {
        let t = 0.2 * k as f64;
        let log_ratio = trace_f(&pair, t).map_err(|e| e.to_string())?.ln() - t * lmax;
        margin = margin
            .min(log_ratio + bnorm)
            .min(n.ln() + bnorm - log_ratio);
    }
    Ok(Outcome {
        passed: margin >= -thresholds::SANDWICH_SLACK,
        metric: "min log-margin inside the growth envelope",
        worst: margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(cases: usize) -> VerifyConfig {
        VerifyConfig {
            cases,
            max_n: 6,
            seed: 42,
            timings: false,
        }
    }

    #[test]
    fn small_run_passes_and_tallies() {
        let report = run_verification(&config(6), DEFAULT_PSD_TOL, Execution::Parallel);
        assert_eq!(report.summary.cases, 6);
        assert_eq!(report.summary.checks, 6 * CHECKS.len());
        assert_eq!(
            report.summary.failures,
            report.records.iter().filter(|r| !r.passed).count()
        );
        assert!(
            report.passed(),
            "{:#?}",
            report
                .records
                .iter()
                .filter(|r| !r.passed)
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn execution_mode_does_not_change_the_report() {
        let a = run_verification(&config(5), DEFAULT_PSD_TOL, Execution::Sequential);
        let b = run_verification(&config(5), DEFAULT_PSD_TOL, Execution::Parallel);
        assert_eq!(a, b);
    }

    #[test]
    fn timings_are_opt_in() {
        let report = run_verification(&config(1), DEFAULT_PSD_TOL, Execution::Sequential);
        assert!(report.records.iter().all(|r| r.elapsed_ms.is_none()));
        let cfg = VerifyConfig {
            timings: true,
            ..config(1)
        };
        let report = run_verification(&cfg, DEFAULT_PSD_TOL, Execution::Sequential);
        assert!(report.records.iter().all(|r| r.elapsed_ms.is_some()));
    }

    #[test]
    fn impossible_tolerance_is_reported_not_panicked() {
        // A negative tolerance demands a strictly positive definite kernel,
        // which a rank-deficient Gram matrix cannot satisfy.
        let report = run_verification(&config(2), -1.0, Execution::Sequential);
        assert!(report.summary.failures > 0);
        assert!(report
            .records
            .iter()
            .filter(|r| !r.passed)
            .all(|r| r.check.starts_with("ec_gram")));
    }
}
