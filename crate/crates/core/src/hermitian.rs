//! Validated complex matrices, Hermitian eigendecomposition, matrix
//! exponentials, unitary conjugation, Lie products and the Perron shift.
//!
//! Every matrix exponential in this crate is taken of a Hermitian matrix, so
//! the exponential is computed from the eigendecomposition
//! `e^H = V diag(e^λ) V*` rather than by Padé scaling and squaring.
//!
//! Tolerances are relative to `max(1, ‖·‖_max)` unless stated otherwise.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use thiserror::Error;

/// Relative tolerance for accepting a matrix as Hermitian.
pub const DEFAULT_HERMITIAN_TOL: f64 = 1e-12;
/// Absolute tolerance on `‖U U* − I‖_max`.
pub const UNITARY_TOL: f64 = 1e-10;
/// Relative bound on the eigendecomposition residual `‖H V − V Λ‖_max`.
pub const RECONSTRUCTION_TOL: f64 = 1e-10;
/// Relative tolerance used when checking the Perron-shift hypothesis.
pub const OFFDIAG_TOL: f64 = 1e-12;
/// Largest exponent accepted before `exp` leaves the double range.
pub const MAX_EXPONENT: f64 = 700.0;

const EIGEN_MAX_ITER: usize = 10_000;
const PHASE_PIVOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix must have at least one row and column")]
    Empty,
    #[error("expected {expected} entries, found {found}")]
    InvalidLength { expected: usize, found: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix is not Hermitian: max deviation {deviation:e} exceeds {allowed:e}")]
    NotHermitian { deviation: f64, allowed: f64 },
    #[error("matrix is not unitary: ‖UU* − I‖_max = {deviation:e}")]
    NotUnitary { deviation: f64 },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("Hermitian eigensolver failed for a {n}x{n} matrix (residual {residual:e})")]
    ConvergenceFailure { n: usize, residual: f64 },
    #[error("exponent {exponent} exceeds the double range (limit {MAX_EXPONENT})")]
    Overflow { exponent: f64 },
    #[error("off-diagonal entry ({row}, {col}) = {re}{im:+}i is not real nonnegative")]
    HypothesisViolated {
        row: usize,
        col: usize,
        re: f64,
        im: f64,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = LinalgError> = std::result::Result<T, E>;

/// Dense complex matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    inner: DMatrix<Complex64>,
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, entries: &[Complex64]) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(LinalgError::Empty);
        }
        if entries.len() != rows * cols {
            return Err(LinalgError::InvalidLength {
                expected: rows * cols,
                found: entries.len(),
            });
        }
        Self::from_dmatrix(DMatrix::from_row_slice(rows, cols, entries))
    }

    /// Builds a matrix from real row-major entries.
    pub fn from_real_row_major(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        let c: Vec<Complex64> = entries.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::from_row_major(rows, cols, &c)
    }

    pub fn from_dmatrix(inner: DMatrix<Complex64>) -> Result<Self> {
        if inner.nrows() == 0 || inner.ncols() == 0 {
            return Err(LinalgError::Empty);
        }
        for c in 0..inner.ncols() {
            for r in 0..inner.nrows() {
                let z = inner[(r, c)];
                if !(z.re.is_finite() && z.im.is_finite()) {
                    return Err(LinalgError::NonFinite { row: r, col: c });
                }
            }
        }
        Ok(Self { inner })
    }

    pub(crate) fn from_dmatrix_unchecked(inner: DMatrix<Complex64>) -> Self {
        Self { inner }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            inner: DMatrix::identity(n, n),
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            inner: DMatrix::zeros(rows, cols),
        }
    }

    pub fn nrows(&self) -> usize {
        self.inner.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.inner.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.nrows() == self.ncols()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.inner[(row, col)]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<Complex64> {
        &self.inner
    }

    pub fn into_dmatrix(self) -> DMatrix<Complex64> {
        self.inner
    }

    /// Entries in row-major order.
    pub fn row_major(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.nrows() * self.ncols());
        for r in 0..self.nrows() {
            for c in 0..self.ncols() {
                out.push(self.inner[(r, c)]);
            }
        }
        out
    }

    /// `max |a_ij|`.
    pub fn max_abs(&self) -> f64 {
        self.inner.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
    }

    /// `‖self − other‖_max`; panics on shape mismatch.
    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!(self.inner.shape(), other.inner.shape());
        self.inner
            .iter()
            .zip(other.inner.iter())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).norm()))
    }

    pub fn trace(&self) -> Complex64 {
        self.inner.trace()
    }

    pub fn adjoint(&self) -> ComplexMatrix {
        Self {
            inner: self.inner.adjoint(),
        }
    }

    pub fn scale(&self, s: f64) -> ComplexMatrix {
        Self {
            inner: &self.inner * Complex64::new(s, 0.0),
        }
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.ncols() != other.nrows() {
            return Err(LinalgError::DimensionMismatch {
                left: self.ncols(),
                right: other.nrows(),
            });
        }
        Ok(Self {
            inner: &self.inner * &other.inner,
        })
    }

    /// `‖A A* − I‖_max`, a unitarity defect.
    pub fn unitarity_defect(&self) -> f64 {
        let prod = &self.inner * self.inner.adjoint();
        let id = DMatrix::<Complex64>::identity(self.nrows(), self.nrows());
        prod.iter()
            .zip(id.iter())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).norm()))
    }
}

/// Square complex matrix equal to its conjugate transpose.
///
/// The stored form is exactly symmetrized, so diagonal entries are real and
/// `h[j][k] == conj(h[k][j])` bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    inner: ComplexMatrix,
}

/// Accepts `m` as Hermitian when `‖m − m*‖_max ≤ tol · max(1, ‖m‖_max)`.
pub fn validate_hermitian(m: ComplexMatrix, tol: f64) -> Result<HermitianMatrix> {
    if !m.is_square() {
        return Err(LinalgError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let deviation = m.max_abs_diff(&m.adjoint());
    let allowed = tol * m.max_abs().max(1.0);
    if deviation > allowed {
        return Err(LinalgError::NotHermitian { deviation, allowed });
    }
    Ok(HermitianMatrix::symmetrized(m.into_dmatrix()))
}

impl HermitianMatrix {
    /// Validates with [`DEFAULT_HERMITIAN_TOL`].
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        validate_hermitian(m, DEFAULT_HERMITIAN_TOL)
    }

    pub fn from_real_row_major(n: usize, entries: &[f64]) -> Result<Self> {
        Self::new(ComplexMatrix::from_real_row_major(n, n, entries)?)
    }

    pub fn from_row_major(n: usize, entries: &[Complex64]) -> Result<Self> {
        Self::new(ComplexMatrix::from_row_major(n, n, entries)?)
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        if diag.is_empty() {
            return Err(LinalgError::Empty);
        }
        let d: Vec<Complex64> = diag.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d));
        Ok(Self {
            inner: ComplexMatrix::from_dmatrix(m)?,
        })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            inner: ComplexMatrix::zeros(n, n),
        }
    }

    /// `(m + m*) / 2`, with the diagonal made exactly real.
    pub(crate) fn symmetrized(m: DMatrix<Complex64>) -> Self {
        let n = m.nrows();
        let mut h = m.clone();
        for r in 0..n {
            h[(r, r)] = Complex64::new(m[(r, r)].re, 0.0);
            for c in (r + 1)..n {
                let z = (m[(r, c)] + m[(c, r)].conj()) * 0.5;
                h[(r, c)] = z;
                h[(c, r)] = z.conj();
            }
        }
        Self {
            inner: ComplexMatrix::from_dmatrix_unchecked(h),
        }
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.inner.get(row, col)
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.inner
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.inner
    }

    pub fn max_abs(&self) -> f64 {
        self.inner.max_abs()
    }

    /// Real trace.
    pub fn trace(&self) -> f64 {
        self.inner.trace().re
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|j| self.get(j, j).re).collect()
    }

    /// `s · H` for real `s`.
    pub fn scale(&self, s: f64) -> HermitianMatrix {
        Self::symmetrized(self.inner.scale(s).into_dmatrix())
    }

    /// `self + other`.
    pub fn add(&self, other: &HermitianMatrix) -> Result<HermitianMatrix> {
        check_dims(self.dim(), other.dim())?;
        Ok(Self::symmetrized(
            self.inner.as_dmatrix() + other.inner.as_dmatrix(),
        ))
    }

    /// `t · self + other`, the exponent of the trace function.
    pub fn affine(&self, t: f64, other: &HermitianMatrix) -> Result<HermitianMatrix> {
        check_dims(self.dim(), other.dim())?;
        let m = self.inner.as_dmatrix() * Complex64::new(t, 0.0) + other.inner.as_dmatrix();
        Ok(Self::symmetrized(m))
    }

    /// `self + s I`.
    pub fn shift(&self, s: f64) -> HermitianMatrix {
        let mut m = self.inner.as_dmatrix().clone();
        for j in 0..self.dim() {
            m[(j, j)] += Complex64::new(s, 0.0);
        }
        Self::symmetrized(m)
    }

    /// True when every off-diagonal entry has modulus at most `tol`.
    pub fn is_diagonal(&self, tol: f64) -> bool {
        let n = self.dim();
        (0..n).all(|r| (0..n).all(|c| r == c || self.get(r, c).norm() <= tol))
    }

    /// `[A, B]_max = ‖AB − BA‖_max`.
    pub fn commutator_norm(&self, other: &HermitianMatrix) -> Result<f64> {
        check_dims(self.dim(), other.dim())?;
        let a = self.inner.as_dmatrix();
        let b = other.inner.as_dmatrix();
        let c = a * b - b * a;
        Ok(c.iter().fold(0.0_f64, |m, z| m.max(z.norm())))
    }

    /// Principal leading block of size `k`.
    pub(crate) fn leading_block(&self, k: usize) -> HermitianMatrix {
        let view = self.inner.as_dmatrix().view((0, 0), (k, k)).into_owned();
        Self::symmetrized(view)
    }
}

/// Square matrix with `‖U U* − I‖_max ≤ UNITARY_TOL`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix {
    inner: ComplexMatrix,
}

impl UnitaryMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(LinalgError::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        let deviation = m.unitarity_defect();
        if deviation > UNITARY_TOL {
            return Err(LinalgError::NotUnitary { deviation });
        }
        Ok(Self { inner: m })
    }

    pub(crate) fn new_unchecked(m: ComplexMatrix) -> Self {
        Self { inner: m }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            inner: ComplexMatrix::identity(n),
        }
    }

    /// Diagonal unitary from unit-modulus phases.
    pub fn from_phases(phases: &[Complex64]) -> Result<Self> {
        if phases.is_empty() {
            return Err(LinalgError::Empty);
        }
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(phases));
        Self::new(ComplexMatrix::from_dmatrix(m)?)
    }

    /// Real permutation matrix `P` with `P e_j = e_{perm[j]}`.
    pub fn permutation(perm: &[usize]) -> Result<Self> {
        let n = perm.len();
        let mut m = DMatrix::<Complex64>::zeros(n, n);
        for (j, &p) in perm.iter().enumerate() {
            if p >= n {
                return Err(LinalgError::InvalidArgument(format!(
                    "permutation index {p} out of range for n = {n}"
                )));
            }
            m[(p, j)] = Complex64::new(1.0, 0.0);
        }
        Self::new(ComplexMatrix::from_dmatrix(m)?)
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.inner.get(row, col)
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.inner
    }

    pub fn adjoint(&self) -> UnitaryMatrix {
        Self {
            inner: self.inner.adjoint(),
        }
    }

    pub fn compose(&self, other: &UnitaryMatrix) -> Result<UnitaryMatrix> {
        Ok(Self {
            inner: self.inner.matmul(&other.inner)?,
        })
    }

    /// `blockdiag(self, 1)`.
    pub fn extend_with_one(&self) -> UnitaryMatrix {
        let n = self.dim();
        let mut m = DMatrix::<Complex64>::zeros(n + 1, n + 1);
        m.view_mut((0, 0), (n, n))
            .copy_from(self.inner.as_dmatrix());
        m[(n, n)] = Complex64::new(1.0, 0.0);
        Self {
            inner: ComplexMatrix::from_dmatrix_unchecked(m),
        }
    }

    pub fn unitarity_defect(&self) -> f64 {
        self.inner.unitarity_defect()
    }
}

/// Ascending eigenvalues with the matching unitary eigenvector matrix
/// (eigenvectors are columns).
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: UnitaryMatrix,
}

impl EigenDecomposition {
    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    /// Column `j` of the eigenvector matrix.
    pub fn eigenvector(&self, j: usize) -> Vec<Complex64> {
        let n = self.eigenvectors.dim();
        (0..n).map(|r| self.eigenvectors.get(r, j)).collect()
    }

    /// `V diag(f(λ)) V*`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let v = self.eigenvectors.as_matrix().as_dmatrix();
        let mut scaled = v.clone();
        for (j, &lam) in self.eigenvalues.iter().enumerate() {
            let s = Complex64::new(f(lam), 0.0);
            scaled.column_mut(j).iter_mut().for_each(|z| *z *= s);
        }
        ComplexMatrix::from_dmatrix_unchecked(scaled * v.adjoint())
    }

    /// `‖H V − V diag(λ)‖_max`.
    pub fn residual(&self, h: &HermitianMatrix) -> f64 {
        let v = self.eigenvectors.as_matrix().as_dmatrix();
        let hv = h.as_matrix().as_dmatrix() * v;
        let mut worst = 0.0_f64;
        for (j, &lam) in self.eigenvalues.iter().enumerate() {
            for r in 0..v.nrows() {
                worst = worst.max((hv[(r, j)] - v[(r, j)] * lam).norm());
            }
        }
        worst
    }
}

/// Hermitian eigendecomposition.
///
/// Eigenvalues come back ascending, ties kept in solver order. Each
/// eigenvector is rotated so that its first component with modulus above
/// `1e-10` is real positive, which makes the output reproducible.
pub fn eigh(h: &HermitianMatrix) -> Result<EigenDecomposition> {
    let n = h.dim();
    let solved = SymmetricEigen::try_new(
        h.as_matrix().as_dmatrix().clone(),
        f64::EPSILON,
        EIGEN_MAX_ITER,
    )
    .ok_or(LinalgError::ConvergenceFailure {
        n,
        residual: f64::NAN,
    })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        solved.eigenvalues[i]
            .partial_cmp(&solved.eigenvalues[j])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });

    let mut vectors = DMatrix::<Complex64>::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        values.push(solved.eigenvalues[src]);
        let col = solved.eigenvectors.column(src);
        let pivot = col
            .iter()
            .find(|z| z.norm() > PHASE_PIVOT_TOL)
            .copied()
            .unwrap_or(Complex64::new(1.0, 0.0));
        let phase = pivot.conj() / pivot.norm();
        for r in 0..n {
            vectors[(r, dst)] = col[r] * phase;
        }
    }

    let eigenvectors =
        ComplexMatrix::from_dmatrix(vectors).map_err(|_| LinalgError::ConvergenceFailure {
            n,
            residual: f64::NAN,
        })?;
    let decomposition = EigenDecomposition {
        eigenvalues: values,
        eigenvectors: UnitaryMatrix::new_unchecked(eigenvectors),
    };
    let residual = decomposition.residual(h);
    let defect = decomposition.eigenvectors.unitarity_defect();
    let accurate = residual <= RECONSTRUCTION_TOL * h.max_abs().max(1.0) && defect <= UNITARY_TOL;
    if !accurate {
        return Err(LinalgError::ConvergenceFailure { n, residual });
    }
    Ok(decomposition)
}

/// Ascending eigenvalues only.
pub fn eigvalsh(h: &HermitianMatrix) -> Result<Vec<f64>> {
    Ok(eigh(h)?.eigenvalues)
}

/// `e^H` via `V diag(e^λ) V*`.
pub fn matrix_exp_hermitian(h: &HermitianMatrix) -> Result<ComplexMatrix> {
    let decomposition = eigh(h)?;
    exp_from_decomposition(&decomposition)
}

pub(crate) fn exp_from_decomposition(d: &EigenDecomposition) -> Result<ComplexMatrix> {
    let top = d.max();
    if top > MAX_EXPONENT {
        return Err(LinalgError::Overflow { exponent: top });
    }
    Ok(d.apply(f64::exp))
}

/// `U H U*`.
pub fn conjugate(u: &UnitaryMatrix, h: &HermitianMatrix) -> Result<HermitianMatrix> {
    check_dims(u.dim(), h.dim())?;
    let uu = u.as_matrix().as_dmatrix();
    let m = uu * h.as_matrix().as_dmatrix() * uu.adjoint();
    Ok(HermitianMatrix::symmetrized(m))
}

/// `(e^{X/p} e^{Y/p})^p` with an optional error against `e^{X+Y}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LieApproximation {
    pub p: u32,
    pub value: ComplexMatrix,
    pub reference_error: Option<f64>,
}

/// Lie product approximation of `e^{x+y}` with `p` steps.
///
/// Powers of two are formed by repeated squaring, other step counts by
/// plain iteration.
pub fn lie_product_approx(
    x: &HermitianMatrix,
    y: &HermitianMatrix,
    p: u32,
    with_reference: bool,
) -> Result<LieApproximation> {
    check_dims(x.dim(), y.dim())?;
    if p == 0 {
        return Err(LinalgError::InvalidArgument(
            "Lie step count must be positive".into(),
        ));
    }
    let inv = 1.0 / f64::from(p);
    let ex = matrix_exp_hermitian(&x.scale(inv))?;
    let ey = matrix_exp_hermitian(&y.scale(inv))?;
    let step = ex.as_dmatrix() * ey.as_dmatrix();

    let value = if p.is_power_of_two() {
        let mut acc = step;
        for _ in 0..p.trailing_zeros() {
            acc = &acc * &acc;
        }
        acc
    } else {
        let mut acc = step.clone();
        for _ in 1..p {
            acc = &acc * &step;
        }
        acc
    };
    let value = ComplexMatrix::from_dmatrix(value).map_err(|_| LinalgError::Overflow {
        exponent: f64::INFINITY,
    })?;

    let reference_error = if with_reference {
        let exact = matrix_exp_hermitian(&x.add(y)?)?;
        Some(value.max_abs_diff(&exact))
    } else {
        None
    };
    Ok(LieApproximation {
        p,
        value,
        reference_error,
    })
}

/// `M + ρI` with every entry real nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct PerronShift {
    pub rho: f64,
    pub shifted: ComplexMatrix,
}

impl PerronShift {
    /// `e^{−ρ} · e^{M + ρI}`, which equals `e^M`.
    pub fn reconstruct_exp(&self) -> Result<ComplexMatrix> {
        let h = HermitianMatrix::symmetrized(self.shifted.as_dmatrix().clone());
        Ok(matrix_exp_hermitian(&h)?.scale((-self.rho).exp()))
    }
}

/// Rejects `m` unless every off-diagonal entry is real nonnegative up to
/// `OFFDIAG_TOL · max(1, ‖m‖_max)`.
pub fn check_nonneg_offdiagonal(m: &HermitianMatrix) -> Result<()> {
    let tol = OFFDIAG_TOL * m.max_abs().max(1.0);
    let n = m.dim();
    for r in 0..n {
        for c in 0..n {
            if r == c {
                continue;
            }
            let z = m.get(r, c);
            if z.re < -tol || z.im.abs() > tol {
                return Err(LinalgError::HypothesisViolated {
                    row: r,
                    col: c,
                    re: z.re,
                    im: z.im,
                });
            }
        }
    }
    Ok(())
}

/// Smallest shift `ρ = max(0, −min_j Re m_jj)` making `M + ρI` entrywise
/// nonnegative.
pub fn perron_shift(m: &HermitianMatrix) -> Result<PerronShift> {
    check_nonneg_offdiagonal(m)?;
    let min_diag = m.diagonal().into_iter().fold(f64::INFINITY, f64::min);
    let rho = (-min_diag).max(0.0);
    Ok(PerronShift {
        rho,
        shifted: m.shift(rho).into_matrix(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonnegReport {
    pub holds: bool,
    pub min_entry: f64,
    pub location: (usize, usize),
    pub max_imag: f64,
}

/// Computes `e^m` and reports its smallest real part and largest imaginary
/// part; holds iff `Re ≥ −tol` and `|Im| ≤ tol` everywhere.
pub fn exp_entrywise_nonneg_check(m: &HermitianMatrix, tol: f64) -> Result<NonnegReport> {
    let e = matrix_exp_hermitian(m)?;
    let n = m.dim();
    let mut min_entry = f64::INFINITY;
    let mut location = (0, 0);
    let mut max_imag = 0.0_f64;
    for r in 0..n {
        for c in 0..n {
            let z = e.get(r, c);
            if z.re < min_entry {
                min_entry = z.re;
                location = (r, c);
            }
            max_imag = max_imag.max(z.im.abs());
        }
    }
    Ok(NonnegReport {
        holds: min_entry >= -tol && max_imag <= tol,
        min_entry,
        location,
        max_imag,
    })
}

fn check_dims(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(LinalgError::DimensionMismatch { left, right });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pauli_x() -> HermitianMatrix {
        HermitianMatrix::from_real_row_major(2, &[0.0, 1.0, 1.0, 0.0]).unwrap()
    }

    #[test]
    fn validate_accepts_hermitian_unchanged() {
        let m = ComplexMatrix::from_row_major(2, 2, &[c(1., 0.), c(0., 1.), c(0., -1.), c(3., 0.)])
            .unwrap();
        let h = validate_hermitian(m.clone(), 1e-12).unwrap();
        assert_eq!(h.as_matrix(), &m);
    }

    #[test]
    fn validate_rejects_asymmetric() {
        let m = ComplexMatrix::from_real_row_major(2, 2, &[0., 1., 0., 0.]).unwrap();
        assert!(matches!(
            validate_hermitian(m, 1e-12),
            Err(LinalgError::NotHermitian { .. })
        ));
    }

    #[test]
    fn validate_symmetrizes_small_deviation() {
        let m =
            ComplexMatrix::from_row_major(2, 2, &[c(1., 0.), c(1e-15, 1.), c(0., -1.), c(2., 0.)])
                .unwrap();
        let h = validate_hermitian(m, 1e-12).unwrap();
        assert_eq!(h.get(0, 1), h.get(1, 0).conj());
        assert_abs_diff_eq!(h.get(0, 1).re, 5e-16, epsilon = 1e-20);
    }

    #[test]
    fn validate_rejects_non_square_and_non_finite() {
        let m = ComplexMatrix::from_real_row_major(1, 2, &[0., 1.]).unwrap();
        assert!(matches!(
            validate_hermitian(m, 1e-12),
            Err(LinalgError::NotSquare { rows: 1, cols: 2 })
        ));
        assert!(matches!(
            ComplexMatrix::from_real_row_major(1, 1, &[f64::NAN]),
            Err(LinalgError::NonFinite { row: 0, col: 0 })
        ));
        assert!(matches!(
            ComplexMatrix::from_real_row_major(2, 2, &[1.0]),
            Err(LinalgError::InvalidLength {
                expected: 4,
                found: 1
            })
        ));
    }

    #[test]
    fn eigh_diagonal_is_permutation() {
        let h = HermitianMatrix::from_real_diagonal(&[3.0, 1.0]).unwrap();
        let d = eigh(&h).unwrap();
        assert_eq!(d.eigenvalues, vec![1.0, 3.0]);
        let expected = UnitaryMatrix::permutation(&[1, 0]).unwrap();
        assert!(
            d.eigenvectors
                .as_matrix()
                .max_abs_diff(expected.as_matrix())
                < 1e-15
        );
    }

    #[test]
    fn eigh_pauli_x() {
        let d = eigh(&pauli_x()).unwrap();
        assert_abs_diff_eq!(d.eigenvalues[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(d.eigenvalues[1], 1.0, epsilon = 1e-14);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v0 = d.eigenvector(0);
        let v1 = d.eigenvector(1);
        assert!((v0[0] - c(s, 0.)).norm() < 1e-14 && (v0[1] - c(-s, 0.)).norm() < 1e-14);
        assert!((v1[0] - c(s, 0.)).norm() < 1e-14 && (v1[1] - c(s, 0.)).norm() < 1e-14);
    }

    #[test]
    fn exp_closed_forms() {
        let h = HermitianMatrix::from_real_diagonal(&[0.0, 2f64.ln()]).unwrap();
        let e = matrix_exp_hermitian(&h).unwrap();
        let expected = ComplexMatrix::from_real_row_major(2, 2, &[1., 0., 0., 2.]).unwrap();
        assert!(e.max_abs_diff(&expected) < 1e-14);

        let e = matrix_exp_hermitian(&pauli_x()).unwrap();
        let (ch, sh) = (1f64.cosh(), 1f64.sinh());
        let expected = ComplexMatrix::from_real_row_major(2, 2, &[ch, sh, sh, ch]).unwrap();
        assert!(e.max_abs_diff(&expected) < 1e-14);

        let e = matrix_exp_hermitian(&HermitianMatrix::zeros(3)).unwrap();
        assert!(e.max_abs_diff(&ComplexMatrix::identity(3)) < 1e-15);
    }

    #[test]
    fn exp_overflow_is_reported() {
        let h = HermitianMatrix::from_real_diagonal(&[0.0, 701.0]).unwrap();
        assert!(matches!(
            matrix_exp_hermitian(&h),
            Err(LinalgError::Overflow { .. })
        ));
    }

    #[test]
    fn conjugate_examples() {
        let h = HermitianMatrix::from_row_major(2, &[c(1., 0.), c(0., 1.), c(0., -1.), c(3., 0.)])
            .unwrap();
        let same = conjugate(&UnitaryMatrix::identity(2), &h).unwrap();
        assert_eq!(same, h);

        let u = UnitaryMatrix::from_phases(&[c(0., -1.), c(1., 0.)]).unwrap();
        let got = conjugate(&u, &h).unwrap();
        let expected = HermitianMatrix::from_real_row_major(2, &[1., 1., 1., 3.]).unwrap();
        assert!(got.as_matrix().max_abs_diff(expected.as_matrix()) < 1e-15);

        let swap = UnitaryMatrix::permutation(&[1, 0]).unwrap();
        let got = conjugate(
            &swap,
            &HermitianMatrix::from_real_diagonal(&[2., 0.]).unwrap(),
        )
        .unwrap();
        assert_eq!(got, HermitianMatrix::from_real_diagonal(&[0., 2.]).unwrap());
    }

    #[test]
    fn conjugate_dimension_mismatch() {
        assert!(matches!(
            conjugate(&UnitaryMatrix::identity(3), &pauli_x()),
            Err(LinalgError::DimensionMismatch { left: 3, right: 2 })
        ));
    }

    #[test]
    fn lie_commuting_is_exact() {
        let x = HermitianMatrix::from_real_diagonal(&[0.3, -1.2, 2.0]).unwrap();
        let y = HermitianMatrix::from_real_diagonal(&[1.0, 0.5, -0.25]).unwrap();
        for p in [1, 3, 16, 100] {
            let approx = lie_product_approx(&x, &y, p, true).unwrap();
            assert!(approx.reference_error.unwrap() <= 1e-13, "p = {p}");
        }
    }

    #[test]
    fn lie_single_step_is_plain_product() {
        let x = HermitianMatrix::from_real_diagonal(&[0.0, 1.0]).unwrap();
        let y = pauli_x();
        let approx = lie_product_approx(&x, &y, 1, false).unwrap();
        assert!(approx.reference_error.is_none());
        let expected = matrix_exp_hermitian(&x)
            .unwrap()
            .matmul(&matrix_exp_hermitian(&y).unwrap())
            .unwrap();
        assert!(approx.value.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn lie_first_order_rate() {
        let x = HermitianMatrix::from_real_diagonal(&[0.0, 1.0]).unwrap();
        let y = pauli_x();
        let e64 = lie_product_approx(&x, &y, 64, true)
            .unwrap()
            .reference_error
            .unwrap();
        let e128 = lie_product_approx(&x, &y, 128, true)
            .unwrap()
            .reference_error
            .unwrap();
        let ratio = e128 / e64;
        assert!((0.4..=0.6).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn lie_iteration_and_squaring_agree() {
        let x = HermitianMatrix::from_real_diagonal(&[0.0, 1.0]).unwrap();
        let y = pauli_x();
        let a = lie_product_approx(&x, &y, 12, true).unwrap();
        let b = lie_product_approx(&x, &y, 16, true).unwrap();
        assert!(b.reference_error.unwrap() < a.reference_error.unwrap());
        assert!(matches!(
            lie_product_approx(&x, &y, 0, false),
            Err(LinalgError::InvalidArgument(_))
        ));
    }

    #[test]
    fn perron_shift_examples() {
        let m = HermitianMatrix::from_real_row_major(2, &[-5., 1., 1., 2.]).unwrap();
        let s = perron_shift(&m).unwrap();
        assert_eq!(s.rho, 5.0);
        let expected = ComplexMatrix::from_real_row_major(2, 2, &[0., 1., 1., 7.]).unwrap();
        assert_eq!(s.shifted, expected);

        let m = HermitianMatrix::from_real_diagonal(&[1., 2.]).unwrap();
        let s = perron_shift(&m).unwrap();
        assert_eq!(s.rho, 0.0);
        assert_eq!(&s.shifted, m.as_matrix());

        let m = HermitianMatrix::from_real_row_major(2, &[0., -1., -1., 0.]).unwrap();
        assert!(matches!(
            perron_shift(&m),
            Err(LinalgError::HypothesisViolated { .. })
        ));
    }

    #[test]
    fn perron_shift_rejects_complex_offdiagonal() {
        let m = HermitianMatrix::from_row_major(2, &[c(0., 0.), c(1., 1.), c(1., -1.), c(0., 0.)])
            .unwrap();
        assert!(perron_shift(&m).is_err());
    }

    #[test]
    fn entrywise_nonneg_examples() {
        let r = exp_entrywise_nonneg_check(&pauli_x(), 1e-12).unwrap();
        assert!(r.holds);
        assert_abs_diff_eq!(r.min_entry, 1f64.sinh(), epsilon = 1e-14);

        let m = HermitianMatrix::from_real_row_major(2, &[0., -1., -1., 0.]).unwrap();
        let r = exp_entrywise_nonneg_check(&m, 1e-12).unwrap();
        assert!(!r.holds);
        assert_abs_diff_eq!(r.min_entry, (-1f64).sinh(), epsilon = 1e-14);
        assert_ne!(r.location.0, r.location.1);

        let m = HermitianMatrix::from_real_diagonal(&[-0.5, 1.5]).unwrap();
        let r = exp_entrywise_nonneg_check(&m, 1e-12).unwrap();
        assert!(r.holds);
        assert!(r.min_entry.abs() <= 1e-15);
    }
}
