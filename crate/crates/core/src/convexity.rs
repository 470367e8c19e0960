//! Exponential convexity on sampled grids.
//!
//! A function `f ≥ 0` is exponentially convex when every kernel
//! `G[r][s] = f(t_r + t_s)` is positive semidefinite. Here that is tested on
//! finite grids by a full symmetric eigendecomposition, which also yields a
//! witness vector `ξ` whenever the test fails.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

use crate::hermitian::{
    check_nonneg_offdiagonal, eigh, exp_from_decomposition, ComplexMatrix, HermitianMatrix,
    LinalgError,
};
use crate::par::{map_range, Execution};

/// Default relative PSD tolerance.
pub const DEFAULT_PSD_TOL: f64 = 1e-8;
/// Values at or below this magnitude count as zero in [`dichotomy_check`].
pub const DICHOTOMY_ZERO_TOL: f64 = 1e-14;
/// Slack factor in [`midpoint_inequality_check`].
pub const MIDPOINT_SLACK: f64 = 1e-12;
/// Relative tolerance for "L is diagonal" in [`entrywise_ec_check`].
pub const DIAGONAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConvexityError {
    #[error("grid must be non-empty, finite and strictly increasing")]
    InvalidGrid,
    #[error("{label}: non-finite value {value} at t = {t}")]
    EvaluationFailure { label: String, t: f64, value: f64 },
    #[error("symmetric eigensolver failed on a {0}x{0} Gram matrix")]
    EigenFailure(usize),
    #[error("{label}: f({t_zero}) = {zero_value:e} but f({t_positive}) = {positive_value:e}")]
    DichotomyViolated {
        label: String,
        t_zero: f64,
        zero_value: f64,
        t_positive: f64,
        positive_value: f64,
    },
    #[error("scale factor must be nonnegative, got {0}")]
    NegativeScale(f64),
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

type Result<T, E = ConvexityError> = std::result::Result<T, E>;

/// Labelled real function of a real variable, safe to evaluate concurrently.
#[derive(Clone)]
pub struct ScalarFunction {
    label: String,
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for ScalarFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarFunction")
            .field("label", &self.label)
            .finish_non_exhaustive()
    }
}

impl ScalarFunction {
    pub fn new(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            eval: Arc::new(f),
        }
    }

    /// `t ↦ e^{μ t}`.
    pub fn exponential(mu: f64) -> Self {
        Self::new(format!("exp({mu} t)"), move |t| (mu * t).exp())
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("{c}"), move |_| c)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.eval)(t)
    }

    fn eval_checked(&self, t: f64) -> Result<f64> {
        let value = self.eval(t);
        if value.is_finite() {
            Ok(value)
        } else {
            Err(ConvexityError::EvaluationFailure {
                label: self.label.clone(),
                t,
                value,
            })
        }
    }
}

/// `c · f` for `c ≥ 0`.
pub fn ec_scale(f: &ScalarFunction, c: f64) -> Result<ScalarFunction> {
    if !(c.is_finite() && c >= 0.0) {
        return Err(ConvexityError::NegativeScale(c));
    }
    let g = f.clone();
    Ok(ScalarFunction::new(
        format!("scale({c}, {})", f.label),
        move |t| c * g.eval(t),
    ))
}

/// `f1 + f2`.
pub fn ec_sum(f1: &ScalarFunction, f2: &ScalarFunction) -> ScalarFunction {
    let (a, b) = (f1.clone(), f2.clone());
    ScalarFunction::new(format!("sum({}, {})", f1.label, f2.label), move |t| {
        a.eval(t) + b.eval(t)
    })
}

/// `f1 · f2`.
pub fn ec_product(f1: &ScalarFunction, f2: &ScalarFunction) -> ScalarFunction {
    let (a, b) = (f1.clone(), f2.clone());
    ScalarFunction::new(format!("product({}, {})", f1.label, f2.label), move |t| {
        a.eval(t) * b.eval(t)
    })
}

/// Strictly increasing finite sample points `t_1 < … < t_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct TGrid {
    points: Vec<f64>,
}

impl TGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        let ok = !points.is_empty()
            && points.iter().all(|t| t.is_finite())
            && points.windows(2).all(|w| w[0] < w[1]);
        if ok {
            Ok(Self { points })
        } else {
            Err(ConvexityError::InvalidGrid)
        }
    }

    /// `n` equispaced points from `lo` to `hi` inclusive; a single point
    /// sits at `lo`.
    pub fn equispaced(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n == 0 || !(lo.is_finite() && hi.is_finite()) || (n > 1 && lo >= hi) {
            return Err(ConvexityError::InvalidGrid);
        }
        if n == 1 {
            return Self::new(vec![lo]);
        }
        let h = (hi - lo) / (n - 1) as f64;
        Self::new(
            (0..n)
                .map(|k| if k + 1 == n { hi } else { lo + h * k as f64 })
                .collect(),
        )
    }

    /// `n` sorted uniform draws from `[lo, hi]`, redrawn until distinct.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n == 0 || !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(ConvexityError::InvalidGrid);
        }
        loop {
            let mut pts: Vec<f64> = (0..n).map(|_| rng.random_range(lo..=hi)).collect();
            pts.sort_by(f64::total_cmp);
            if let Ok(grid) = Self::new(pts) {
                return Ok(grid);
            }
        }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Unordered index pairs `(r, s)` with `r ≤ s`.
    fn pairs(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        (0..n).flat_map(|r| (r..n).map(move |s| (r, s))).collect()
    }
}

/// The kernel `G[r][s] = f(t_r + t_s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    entries: DMatrix<f64>,
    grid: TGrid,
    label: String,
}

impl GramMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, r: usize, s: usize) -> f64 {
        self.entries[(r, s)]
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn grid(&self) -> &TGrid {
        &self.grid
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.amax()
    }

    /// `Σ_{r,s} G[r][s] ξ_r conj(ξ_s)`.
    pub fn quadratic_form(&self, xi: &[Complex64]) -> f64 {
        let n = self.dim();
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..n {
            for s in 0..n {
                acc += xi[r] * xi[s].conj() * self.entries[(r, s)];
            }
        }
        acc.re
    }

    /// Builds the kernel from a symmetric value table; `value(r, s)` is
    /// only called with `r ≤ s`.
    fn from_upper(grid: &TGrid, label: String, value: impl Fn(usize, usize) -> f64) -> Self {
        let n = grid.len();
        let mut entries = DMatrix::<f64>::zeros(n, n);
        for r in 0..n {
            for s in r..n {
                let v = value(r, s);
                entries[(r, s)] = v;
                entries[(s, r)] = v;
            }
        }
        Self {
            entries,
            grid: grid.clone(),
            label,
        }
    }
}

/// PSD verdict for one Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ECReport {
    pub passed: bool,
    pub min_eigenvalue: f64,
    /// Unit eigenvector of the smallest eigenvalue.
    pub witness: Vec<Complex64>,
    /// Quadratic form of the witness, equal to `min_eigenvalue` up to rounding.
    pub witness_form: f64,
    /// Relative tolerance requested.
    pub tolerance: f64,
    /// Absolute threshold `tolerance · max(1, ‖G‖_max)`.
    pub threshold: f64,
    /// `‖G‖_max`.
    pub scale: f64,
}

impl ECReport {
    /// `min_eigenvalue / max(1, ‖G‖_max)`.
    pub fn normalized_min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue / self.scale.max(1.0)
    }
}

/// Evaluates `f` once per unordered pair of grid points.
pub fn gram(f: &ScalarFunction, grid: &TGrid) -> Result<GramMatrix> {
    gram_with(f, grid, Execution::default())
}

pub fn gram_with(f: &ScalarFunction, grid: &TGrid, exec: Execution) -> Result<GramMatrix> {
    let pairs = grid.pairs();
    let pts = grid.points();
    let values = map_range(exec, pairs.len(), |i| {
        let (r, s) = pairs[i];
        f.eval_checked(pts[r] + pts[s])
    });
    let values = values.into_iter().collect::<Result<Vec<f64>>>()?;
    let n = grid.len();
    let index = |r: usize, s: usize| r * n - r * (r + 1) / 2 + s;
    Ok(GramMatrix::from_upper(grid, f.label.clone(), |r, s| {
        values[index(r, s)]
    }))
}

/// Passes iff the smallest eigenvalue is at least `−tol · max(1, ‖G‖_max)`.
pub fn psd_check(g: &GramMatrix, tol: f64) -> Result<ECReport> {
    let n = g.dim();
    let eig = SymmetricEigen::try_new(g.entries.clone(), f64::EPSILON, 10_000)
        .ok_or(ConvexityError::EigenFailure(n))?;
    let (idx, &min_eigenvalue) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or(ConvexityError::EigenFailure(n))?;
    if !min_eigenvalue.is_finite() {
        return Err(ConvexityError::EigenFailure(n));
    }
    let col = eig.eigenvectors.column(idx);
    let sign = col
        .iter()
        .find(|v| v.abs() > 1e-10)
        .map_or(1.0, |v| v.signum());
    let norm = col.norm();
    let witness: Vec<Complex64> = col
        .iter()
        .map(|&v| Complex64::new(sign * v / norm, 0.0))
        .collect();
    let witness_form = g.quadratic_form(&witness);
    let scale = g.max_abs();
    let threshold = tol * scale.max(1.0);
    Ok(ECReport {
        passed: min_eigenvalue >= -threshold,
        min_eigenvalue,
        witness,
        witness_form,
        tolerance: tol,
        threshold,
        scale,
    })
}

/// [`gram`] followed by [`psd_check`].
pub fn check_exponential_convexity(f: &ScalarFunction, grid: &TGrid, tol: f64) -> Result<ECReport> {
    psd_check(&gram(f, grid)?, tol)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MidpointReport {
    pub holds: bool,
    /// `f(t1 + t2)`
    pub lhs: f64,
    /// `√(f(2 t1) f(2 t2))`
    pub rhs: f64,
}

/// The 2×2-minor consequence `f(t1 + t2) ≤ √(f(2t1) f(2t2))`.
pub fn midpoint_inequality_check(f: &ScalarFunction, t1: f64, t2: f64) -> Result<MidpointReport> {
    let lhs = f.eval_checked(t1 + t2)?;
    let a = f.eval_checked(2.0 * t1)?;
    let b = f.eval_checked(2.0 * t2)?;
    let rhs = (a * b).sqrt();
    Ok(MidpointReport {
        holds: lhs <= rhs * (1.0 + MIDPOINT_SLACK),
        lhs,
        rhs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dichotomy {
    pub all_zero: bool,
    pub all_positive: bool,
}

/// On the grid, `f` must be identically zero (`|f| ≤ 1e-14`) or strictly
/// positive everywhere.
pub fn dichotomy_check(f: &ScalarFunction, grid: &TGrid) -> Result<Dichotomy> {
    let values = grid
        .points()
        .iter()
        .map(|&t| f.eval_checked(t).map(|v| (t, v)))
        .collect::<Result<Vec<_>>>()?;
    if values.iter().all(|(_, v)| v.abs() <= DICHOTOMY_ZERO_TOL) {
        return Ok(Dichotomy {
            all_zero: true,
            all_positive: false,
        });
    }
    if let Some(&(t_zero, zero_value)) = values.iter().find(|(_, v)| *v <= 0.0) {
        let &(t_positive, positive_value) = values
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty grid");
        return Err(ConvexityError::DichotomyViolated {
            label: f.label.clone(),
            t_zero,
            zero_value,
            t_positive,
            positive_value,
        });
    }
    Ok(Dichotomy {
        all_zero: false,
        all_positive: true,
    })
}

/// Per-entry verdicts for `t ↦ Re (e^{Lt + M})_{jk}`.
#[derive(Debug, Clone, PartialEq)]
pub struct EntrywiseReport {
    /// `reports[j][k]` for entry `(j, k)`.
    pub reports: Vec<Vec<ECReport>>,
    /// Largest `|Im (e^{Lt+M})_{jk}|` over the sums `t_r + t_s`.
    pub max_imag: f64,
    /// Every entry passed and `max_imag ≤ tol`.
    pub passed: bool,
}

impl EntrywiseReport {
    /// Entries whose Gram check failed.
    pub fn failures(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (j, row) in self.reports.iter().enumerate() {
            for (k, r) in row.iter().enumerate() {
                if !r.passed {
                    out.push((j, k));
                }
            }
        }
        out
    }
}

/// Gram test of every entry of `e^{Lt + M}` for diagonal `L` and `M` with
/// nonnegative off-diagonal entries.
pub fn entrywise_ec_check(
    l: &HermitianMatrix,
    m: &HermitianMatrix,
    grid: &TGrid,
    tol: f64,
) -> Result<EntrywiseReport> {
    entrywise_ec_check_with(l, m, grid, tol, Execution::default())
}

pub fn entrywise_ec_check_with(
    l: &HermitianMatrix,
    m: &HermitianMatrix,
    grid: &TGrid,
    tol: f64,
    exec: Execution,
) -> Result<EntrywiseReport> {
    if l.dim() != m.dim() {
        return Err(LinalgError::DimensionMismatch {
            left: l.dim(),
            right: m.dim(),
        }
        .into());
    }
    if !l.is_diagonal(DIAGONAL_TOL * l.max_abs().max(1.0)) {
        return Err(ConvexityError::HypothesisViolated(
            "L is not diagonal".into(),
        ));
    }
    check_nonneg_offdiagonal(m).map_err(|e| ConvexityError::HypothesisViolated(e.to_string()))?;

    let pairs = grid.pairs();
    let pts = grid.points();
    let exps = map_range(exec, pairs.len(), |i| {
        let (r, s) = pairs[i];
        let t = pts[r] + pts[s];
        let h = l.affine(t, m)?;
        let e = exp_from_decomposition(&eigh(&h)?)?;
        Ok::<ComplexMatrix, LinalgError>(e)
    });
    let exps = exps.into_iter().collect::<Result<Vec<_>, _>>()?;

    let n = l.dim();
    let g = grid.len();
    let index = |r: usize, s: usize| r * g - r * (r + 1) / 2 + s;
    let max_imag = exps
        .iter()
        .flat_map(|e| {
            e.as_dmatrix()
                .iter()
                .map(|z| z.im.abs())
                .collect::<Vec<_>>()
        })
        .fold(0.0_f64, f64::max);

    let mut reports = Vec::with_capacity(n);
    for j in 0..n {
        let mut row = Vec::with_capacity(n);
        for k in 0..n {
            let gm = GramMatrix::from_upper(grid, format!("Re exp(Lt + M)[{j}][{k}]"), |r, s| {
                exps[index(r, s)].get(j, k).re
            });
            row.push(psd_check(&gm, tol)?);
        }
        reports.push(row);
    }
    let passed = max_imag <= tol && reports.iter().flatten().all(|r| r.passed);
    Ok(EntrywiseReport {
        reports,
        max_imag,
        passed,
    })
}
