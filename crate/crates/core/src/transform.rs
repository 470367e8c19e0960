//! The trace function `f(t) = tr e^{tA + B}`, atomic measures and their
//! bilateral Laplace transforms, growth exponents, and nonnegative measure
//! fitting.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::convexity::{ScalarFunction, TGrid};
use crate::hermitian::{eigh, eigvalsh, HermitianMatrix, LinalgError, MAX_EXPONENT};
use crate::nnls::{nnls, NnlsFailure};

/// Default relative tolerance on `‖AB − BA‖_max`.
pub const DEFAULT_COMM_TOL: f64 = 1e-10;
/// Default ridge weight for [`fit_measure`].
pub const DEFAULT_FIT_REG: f64 = 1e-10;
/// Atoms closer than this are merged.
pub const ATOM_MERGE_TOL: f64 = 1e-9;
/// Every `HOLDOUT_STRIDE`-th sample is withheld from the fit.
pub const HOLDOUT_STRIDE: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransformError {
    #[error("A and B must have the same dimension: {a} vs {b}")]
    DimensionMismatch { a: usize, b: usize },
    #[error("value overflows the double range at t = {t}")]
    Overflow { t: f64 },
    #[error("A and B do not commute: ‖AB − BA‖_max = {commutator:e} > {allowed:e}")]
    NotCommuting { commutator: f64, allowed: f64 },
    #[error("invalid atom ({location}, {weight}): weights must be finite and nonnegative")]
    InvalidAtom { location: f64, weight: f64 },
    #[error("invalid support [{lo}, {hi}]")]
    InvalidSupport { lo: f64, hi: f64 },
    #[error("need at least {needed} samples for resolution {resolution}, got {got}")]
    InsufficientSamples {
        needed: usize,
        got: usize,
        resolution: usize,
    },
    #[error("invalid sample ({t}, {value})")]
    InvalidSample { t: f64, value: f64 },
    #[error("measure fit is ill-conditioned: {0}")]
    IllConditioned(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

type Result<T, E = TransformError> = std::result::Result<T, E>;

/// The pair `(A, B)` defining `f(t) = tr e^{tA + B}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TracePair {
    a: HermitianMatrix,
    b: HermitianMatrix,
}

impl TracePair {
    pub fn new(a: HermitianMatrix, b: HermitianMatrix) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(TransformError::DimensionMismatch {
                a: a.dim(),
                b: b.dim(),
            });
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> &HermitianMatrix {
        &self.a
    }

    pub fn b(&self) -> &HermitianMatrix {
        &self.b
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    /// Eigenvalues of `tA + B`, ascending.
    pub fn exponent_spectrum(&self, t: f64) -> Result<Vec<f64>> {
        Ok(eigvalsh(&self.a.affine(t, &self.b)?)?)
    }
}

/// `tr e^{tA + B} = Σ_j e^{ν_j(t)}` over the eigenvalues `ν_j(t)` of `tA + B`.
pub fn trace_f(pair: &TracePair, t: f64) -> Result<f64> {
    let nu = pair.exponent_spectrum(t)?;
    if nu[nu.len() - 1] > MAX_EXPONENT {
        return Err(TransformError::Overflow { t });
    }
    Ok(nu.iter().map(|x| x.exp()).sum())
}

/// `log tr e^{tA + B}`, evaluated without overflow.
pub fn log_trace_f(pair: &TracePair, t: f64) -> Result<f64> {
    let nu = pair.exponent_spectrum(t)?;
    let top = nu[nu.len() - 1];
    if !top.is_finite() {
        return Err(TransformError::Overflow { t });
    }
    Ok(top + nu.iter().map(|x| (x - top).exp()).sum::<f64>().ln())
}

/// `(t, f(t))` for every grid point.
pub fn sample_trace_f(pair: &TracePair, grid: &TGrid) -> Result<Vec<(f64, f64)>> {
    grid.points()
        .iter()
        .map(|&t| trace_f(pair, t).map(|f| (t, f)))
        .collect()
}

/// The trace function as a [`ScalarFunction`]; evaluation failures surface
/// as non-finite values.
pub fn trace_function(pair: TracePair) -> ScalarFunction {
    let label = format!("tr exp(tA + B), n = {}", pair.dim());
    ScalarFunction::new(label, move |t| trace_f(&pair, t).unwrap_or(f64::NAN))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub location: f64,
    pub weight: f64,
}

/// Finite nonnegative combination of point masses, sorted by location.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AtomicMeasure {
    atoms: Vec<Atom>,
}

impl AtomicMeasure {
    /// Sorts the atoms and merges locations within [`ATOM_MERGE_TOL`] of
    /// the first location of their cluster.
    pub fn new(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut raw: Vec<Atom> = Vec::new();
        for (location, weight) in atoms {
            if !location.is_finite() || !weight.is_finite() || weight < 0.0 {
                return Err(TransformError::InvalidAtom { location, weight });
            }
            raw.push(Atom { location, weight });
        }
        raw.sort_by(|x, y| x.location.total_cmp(&y.location));
        let mut merged: Vec<Atom> = Vec::with_capacity(raw.len());
        let mut anchor = f64::NEG_INFINITY;
        for atom in raw {
            match merged.last_mut() {
                Some(last) if atom.location - anchor <= ATOM_MERGE_TOL => {
                    last.weight += atom.weight;
                }
                _ => {
                    anchor = atom.location;
                    merged.push(atom);
                }
            }
        }
        Ok(Self { atoms: merged })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    /// Smallest and largest location, if any.
    pub fn support(&self) -> Option<(f64, f64)> {
        Some((self.atoms.first()?.location, self.atoms.last()?.location))
    }

    pub fn laplace_transform(&self, t: f64) -> Result<f64> {
        laplace_transform(self, t)
    }
}

/// `Σ_j w_j e^{t λ_j}`.
pub fn laplace_transform(measure: &AtomicMeasure, t: f64) -> Result<f64> {
    let v: f64 = measure
        .atoms
        .iter()
        .map(|a| a.weight * (t * a.location).exp())
        .sum();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(TransformError::Overflow { t })
    }
}

/// Exact representing measure of a commuting pair: atoms at the eigenvalues
/// of `A`, each weighted by `tr e^B` restricted to that eigenspace.
pub fn commuting_measure(pair: &TracePair, comm_tol: f64) -> Result<AtomicMeasure> {
    let (a, b) = (pair.a(), pair.b());
    let commutator = a.commutator_norm(b)?;
    let allowed = comm_tol * (a.max_abs() * b.max_abs()).max(1.0);
    if commutator > allowed {
        return Err(TransformError::NotCommuting {
            commutator,
            allowed,
        });
    }

    let d = eigh(a)?;
    let n = pair.dim();
    let cluster_tol = ATOM_MERGE_TOL * a.max_abs().max(1.0);
    let v = d.eigenvectors.as_matrix().as_dmatrix();
    let bm = b.as_matrix().as_dmatrix();

    let mut atoms = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && d.eigenvalues[end] - d.eigenvalues[start] <= cluster_tol {
            end += 1;
        }
        let location = d.eigenvalues[start..end].iter().sum::<f64>() / (end - start) as f64;
        let basis = v.columns(start, end - start);
        let restricted = basis.adjoint() * bm * basis;
        let restricted = HermitianMatrix::symmetrized(restricted);
        for mu in eigvalsh(&restricted)? {
            if mu > MAX_EXPONENT {
                return Err(TransformError::Overflow { t: 0.0 });
            }
            atoms.push((location, mu.exp()));
        }
        start = end;
    }
    AtomicMeasure::new(atoms)
}

/// Two-point log-slope estimates of the extreme exponents of `f`, next to
/// the extreme eigenvalues of `A`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportEstimate {
    pub lambda_min_est: f64,
    pub lambda_max_est: f64,
    pub lambda_min_true: f64,
    pub lambda_max_true: f64,
}

impl SupportEstimate {
    pub fn max_error(&self) -> f64 {
        (self.lambda_min_est - self.lambda_min_true)
            .abs()
            .max((self.lambda_max_est - self.lambda_max_true).abs())
    }
}

/// `40 / ‖A‖_max`, or 40 for `A = 0`.
pub fn default_t_far(pair: &TracePair) -> f64 {
    let scale = pair.a().max_abs();
    if scale > 0.0 {
        40.0 / scale
    } else {
        40.0
    }
}

/// `λ_max ≈ [log f(2T) − log f(T)] / T` and the mirror image at `−T`.
pub fn growth_exponents(pair: &TracePair, t_far: f64) -> Result<SupportEstimate> {
    if !(t_far.is_finite() && t_far > 0.0) {
        return Err(TransformError::InvalidArgument(format!(
            "t_far must be positive, got {t_far}"
        )));
    }
    let hi = (log_trace_f(pair, 2.0 * t_far)? - log_trace_f(pair, t_far)?) / t_far;
    let lo = -(log_trace_f(pair, -2.0 * t_far)? - log_trace_f(pair, -t_far)?) / t_far;
    let spectrum = eigvalsh(pair.a())?;
    Ok(SupportEstimate {
        lambda_min_est: lo.min(hi),
        lambda_max_est: hi.max(lo),
        lambda_min_true: spectrum[0],
        lambda_max_true: spectrum[spectrum.len() - 1],
    })
}

/// Result of [`fit_measure`].
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureFit {
    pub measure: AtomicMeasure,
    pub grid_resolution: usize,
    /// Candidate atom spacing; zero for a single candidate.
    pub cell_width: f64,
    /// `‖E w − f‖₂ / ‖f‖₂` on the training samples (absolute when `f = 0`).
    pub training_residual: f64,
    /// Largest relative error on the withheld samples.
    pub holdout_error: f64,
    pub training_samples: usize,
    pub holdout_samples: usize,
}

/// Candidate atom locations: `resolution` equispaced points on `[lo, hi]`,
/// or the midpoint when `resolution = 1`.
pub fn candidate_locations(lo: f64, hi: f64, resolution: usize) -> Vec<f64> {
    if resolution == 1 {
        return vec![0.5 * (lo + hi)];
    }
    let h = (hi - lo) / (resolution - 1) as f64;
    (0..resolution)
        .map(|j| {
            if j + 1 == resolution {
                hi
            } else {
                lo + h * j as f64
            }
        })
        .collect()
}

/// Fits a nonnegative atomic measure to samples of a Laplace transform.
///
/// Candidate atoms sit on an equispaced grid over `support`; the weights
/// solve `min ‖E w − f‖² + reg ‖w‖²` over `w ≥ 0` with `E[k][j] = e^{t_k λ_j}`,
/// using the active-set method on the stacked system `[E; √reg I]`. Every
/// third sample (indices 2, 5, 8, …) is withheld and used only to score the
/// fit.
pub fn fit_measure(
    samples: &[(f64, f64)],
    support: (f64, f64),
    resolution: usize,
    reg: f64,
) -> Result<MeasureFit> {
    let (lo, hi) = support;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(TransformError::InvalidSupport { lo, hi });
    }
    if resolution == 0 {
        return Err(TransformError::InvalidArgument(
            "resolution must be positive".into(),
        ));
    }
    if !(reg.is_finite() && reg >= 0.0) {
        return Err(TransformError::InvalidArgument(format!(
            "reg must be nonnegative, got {reg}"
        )));
    }
    let needed = resolution.div_ceil(4).max(2);
    if samples.len() < needed {
        return Err(TransformError::InsufficientSamples {
            needed,
            got: samples.len(),
            resolution,
        });
    }
    if let Some(&(t, value)) = samples
        .iter()
        .find(|(t, v)| !t.is_finite() || !v.is_finite())
    {
        return Err(TransformError::InvalidSample { t, value });
    }

    let is_holdout = |k: usize| k % HOLDOUT_STRIDE == HOLDOUT_STRIDE - 1;
    let split = |keep: bool| -> Vec<(f64, f64)> {
        samples
            .iter()
            .enumerate()
            .filter(|&(k, _)| is_holdout(k) == keep)
            .map(|(_, &s)| s)
            .collect()
    };
    let (train, holdout) = (split(false), split(true));

    let locations = candidate_locations(lo, hi, resolution);
    let m = train.len();
    let mut c = DMatrix::<f64>::zeros(m + resolution, resolution);
    let mut d = DVector::<f64>::zeros(m + resolution);
    for (k, &(t, f)) in train.iter().enumerate() {
        d[k] = f;
        for (j, &lam) in locations.iter().enumerate() {
            c[(k, j)] = (t * lam).exp();
        }
    }
    let ridge = reg.sqrt();
    for j in 0..resolution {
        c[(m + j, j)] = ridge;
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(TransformError::IllConditioned(
            "design matrix overflows".into(),
        ));
    }

    let solution = nnls(&c, &d).map_err(|e| {
        TransformError::IllConditioned(match e {
            NnlsFailure::IterationLimit(k) => format!("no convergence after {k} iterations"),
            NnlsFailure::NonFinite => "least-squares subproblem produced non-finite values".into(),
        })
    })?;
    let w = solution.x;
    let objective = (&d - &c * &w).norm();
    if objective > d.norm() * (1.0 + 1e-12) {
        return Err(TransformError::IllConditioned(format!(
            "objective {objective:e} not reduced below the zero-measure value {:e}",
            d.norm()
        )));
    }

    let measure = AtomicMeasure::new(
        locations
            .iter()
            .zip(w.iter())
            .filter(|(_, &wj)| wj > 0.0)
            .map(|(&l, &wj)| (l, wj)),
    )?;

    let fnorm = train.iter().map(|(_, f)| f * f).sum::<f64>().sqrt();
    let rnorm = train
        .iter()
        .map(|&(t, f)| {
            let r = laplace_transform(&measure, t).unwrap_or(f64::INFINITY) - f;
            r * r
        })
        .sum::<f64>()
        .sqrt();
    let training_residual = if fnorm > 0.0 { rnorm / fnorm } else { rnorm };

    let mut holdout_error = 0.0_f64;
    for &(t, f) in &holdout {
        let err = (laplace_transform(&measure, t)? - f).abs();
        let rel = if f != 0.0 { err / f.abs() } else { err };
        holdout_error = holdout_error.max(rel);
    }

    Ok(MeasureFit {
        measure,
        grid_resolution: resolution,
        cell_width: if resolution > 1 {
            (hi - lo) / (resolution - 1) as f64
        } else {
            0.0
        },
        training_residual,
        holdout_error,
        training_samples: train.len(),
        holdout_samples: holdout.len(),
    })
}
