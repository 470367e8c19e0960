//! Subcommand implementations. Each returns the process exit code or a
//! [`CliError`] carrying one.

use std::io::Write;
use std::path::Path;

use expconvex::convexity::{check_exponential_convexity, TGrid};
use expconvex::hermitian::{eigvalsh, HermitianMatrix};
use expconvex::par::Execution;
use expconvex::reduction::{default_rank_tol, reduce, ReductionError};
use expconvex::transform::{
    commuting_measure, default_t_far, fit_measure, growth_exponents, sample_trace_f,
    trace_function, AtomicMeasure, TracePair, TransformError, DEFAULT_COMM_TOL,
};
use expconvex::verify::{run_verification, VerifyConfig};
use serde::Serialize;
use serde_json::json;

use crate::matrix_file::{complex_list, read_pair, MatrixDoc};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_RANK: u8 = 2;
pub const EXIT_CHECK_FAILED: u8 = 3;
pub const EXIT_ILL_CONDITIONED: u8 = 4;

/// Holdout error accepted by `fit-measure`.
pub const FIT_HOLDOUT_TOL: f64 = 1e-3;
/// Padding applied to a degenerate spectral interval before fitting.
pub const DEGENERATE_SUPPORT_PAD: f64 = 0.5;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn write_json(value: &impl Serialize, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::usage(format!("cannot serialize output: {e}")))?;
    text.push('\n');
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::usage(format!("cannot write to stdout: {e}"))),
    }
}

fn load(input: &Path) -> Result<(HermitianMatrix, HermitianMatrix)> {
    read_pair(input).map_err(CliError::usage)
}

pub fn cmd_reduce(input: &Path, out: Option<&Path>) -> Result<u8> {
    let (a, b) = load(input)?;
    let r = reduce(&a, &b, default_rank_tol(&a)).map_err(|e| match e {
        ReductionError::RankNotOne { .. } => CliError {
            code: EXIT_RANK,
            message: format!("A is not rank one: {e}"),
        },
        other => CliError::usage(other.to_string()),
    })?;
    let res = r
        .residuals(&a, &b)
        .map_err(|e| CliError::usage(e.to_string()))?;
    let t = &r.trace;
    let doc = json!({
        "W": MatrixDoc::from_unitary(&r.w),
        "L": MatrixDoc::from_hermitian(&r.l),
        "M": MatrixDoc::from_hermitian(&r.m),
        "lambda_n": r.l.get(r.l.dim() - 1, r.l.dim() - 1).re,
        "trace": {
            "U": MatrixDoc::from_unitary(&t.u),
            "B_block": MatrixDoc::from_hermitian(&t.b_block),
            "b_col": complex_list(&t.b_col),
            "mu_n": t.mu_n,
            "V_block": MatrixDoc::from_unitary(&t.v_block),
            "M_block": t.m_block,
            "g": complex_list(&t.g),
            "omegas": complex_list(&t.omegas),
            "Omega": MatrixDoc::from_unitary(&t.omega),
            "W_block": MatrixDoc::from_unitary(&t.w_block),
            "g_abs": t.g_abs,
        },
        "residuals": {
            "WAW_minus_L": res.a,
            "WBW_minus_M": res.b,
            "WW_minus_I": res.unitarity,
            "min_offdiag_M": res.min_offdiag,
        },
    });
    write_json(&doc, out)?;
    Ok(EXIT_OK)
}

pub struct CheckEcArgs<'a> {
    pub input: &'a Path,
    pub grid_n: usize,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub tol: f64,
    pub out: Option<&'a Path>,
}

pub fn cmd_check_ec(args: &CheckEcArgs<'_>) -> Result<u8> {
    if !(args.tol.is_finite() && args.tol >= 0.0) {
        return Err(CliError::usage(format!(
            "--tol must be nonnegative, got {}",
            args.tol
        )));
    }
    let grid = TGrid::equispaced(args.grid_lo, args.grid_hi, args.grid_n)
        .map_err(|e| CliError::usage(format!("invalid grid: {e}")))?;
    let (a, b) = load(args.input)?;
    let pair = TracePair::new(a, b).map_err(|e| CliError::usage(e.to_string()))?;
    let f = trace_function(pair);
    let report = check_exponential_convexity(&f, &grid, args.tol)
        .map_err(|e| CliError::usage(e.to_string()))?;
    let mut doc = json!({
        "function": f.label(),
        "grid": grid.points(),
        "passed": report.passed,
        "min_eigenvalue": report.min_eigenvalue,
        "normalized_min_eigenvalue": report.normalized_min_eigenvalue(),
        "gram_max_abs": report.scale,
        "tolerance": report.tolerance,
        "threshold": report.threshold,
    });
    if !report.passed {
        doc["witness"] = json!(complex_list(&report.witness));
        doc["witness_form"] = json!(report.witness_form);
    }
    write_json(&doc, args.out)?;
    Ok(if report.passed {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    })
}

pub struct FitArgs<'a> {
    pub input: &'a Path,
    pub resolution: usize,
    pub reg: f64,
    pub t_points: usize,
    pub t_lo: f64,
    pub t_hi: f64,
    pub out: Option<&'a Path>,
}

fn atoms_json(m: &AtomicMeasure) -> serde_json::Value {
    json!(m
        .atoms()
        .iter()
        .map(|a| json!({"location": a.location, "weight": a.weight}))
        .collect::<Vec<_>>())
}

pub fn cmd_fit_measure(args: &FitArgs<'_>) -> Result<u8> {
    let grid = TGrid::equispaced(args.t_lo, args.t_hi, args.t_points)
        .map_err(|e| CliError::usage(format!("invalid sample grid: {e}")))?;
    let (a, b) = load(args.input)?;
    let pair = TracePair::new(a, b).map_err(|e| CliError::usage(e.to_string()))?;
    let spectrum = eigvalsh(pair.a()).map_err(|e| CliError::usage(e.to_string()))?;
    let (mut lo, mut hi) = (spectrum[0], spectrum[spectrum.len() - 1]);
    if hi - lo < 1e-9 * lo.abs().max(1.0) {
        lo -= DEGENERATE_SUPPORT_PAD;
        hi += DEGENERATE_SUPPORT_PAD;
    }
    let samples = sample_trace_f(&pair, &grid).map_err(|e| CliError::usage(e.to_string()))?;
    let fit = fit_measure(&samples, (lo, hi), args.resolution, args.reg).map_err(|e| match e {
        TransformError::IllConditioned(_) => CliError {
            code: EXIT_ILL_CONDITIONED,
            message: e.to_string(),
        },
        other => CliError::usage(other.to_string()),
    })?;
    let estimate = growth_exponents(&pair, default_t_far(&pair)).ok();
    let exact = commuting_measure(&pair, DEFAULT_COMM_TOL).ok();
    let passed = fit.holdout_error <= FIT_HOLDOUT_TOL;

    let doc = json!({
        "passed": passed,
        "holdout_tolerance": FIT_HOLDOUT_TOL,
        "support": [lo, hi],
        "grid_resolution": fit.grid_resolution,
        "cell_width": fit.cell_width,
        "reg": args.reg,
        "atoms": atoms_json(&fit.measure),
        "total_mass": fit.measure.total_mass(),
        "training_residual": fit.training_residual,
        "holdout_error": fit.holdout_error,
        "training_samples": fit.training_samples,
        "holdout_samples": fit.holdout_samples,
        "growth_estimate": estimate.map(|e| json!({
            "lambda_min_est": e.lambda_min_est,
            "lambda_max_est": e.lambda_max_est,
            "lambda_min_true": e.lambda_min_true,
            "lambda_max_true": e.lambda_max_true,
        })),
        "commuting_measure": exact.as_ref().map(atoms_json),
    });
    write_json(&doc, args.out)?;
    Ok(if passed { EXIT_OK } else { EXIT_CHECK_FAILED })
}

pub const MAX_VERIFY_N: usize = 12;

pub fn cmd_verify(
    config: &VerifyConfig,
    psd_tol: f64,
    exec: Execution,
    out: Option<&Path>,
) -> Result<u8> {
    if !(psd_tol.is_finite() && psd_tol >= 0.0) {
        return Err(CliError::usage(format!(
            "--tol must be nonnegative, got {psd_tol}"
        )));
    }
    if config.cases == 0 {
        return Err(CliError::usage("--cases must be at least 1"));
    }
    if !(2..=MAX_VERIFY_N).contains(&config.max_n) {
        return Err(CliError::usage(format!(
            "--max-n must lie in [2, {MAX_VERIFY_N}], got {}",
            config.max_n
        )));
    }
    let report = run_verification(config, psd_tol, exec);
    write_json(&report, out)?;
    eprintln!(
        "verify: {} cases, {} checks, {} failures",
        report.summary.cases, report.summary.checks, report.summary.failures
    );
    Ok(if report.passed() {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    })
}
