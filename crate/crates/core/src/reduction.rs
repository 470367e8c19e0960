//! Unitary reduction of a rank-one pair.
//!
//! Given Hermitian `A` of rank one and Hermitian `B`, [`reduce`] produces a
//! unitary `W` such that `W A W* = L = diag(0, …, 0, λ)` and `W B W* = M`,
//! where `M` is zero off the diagonal except for its last row and column,
//! which hold the nonnegative numbers `|γ_j|`:
//!
//! ```text
//!     M = [ diag(μ_1 … μ_{n-1})   |g| ]
//!         [ |g|*                  μ_n ]
//! ```
//!
//! The construction has three stages:
//! 1. a Householder reflection `U` moves the eigenvector of `A` onto `e_n`;
//! 2. the leading `(n-1)`-block of `U B U*` is diagonalized by `V`, the
//!    coupling column becomes `g = V b`, and a diagonal phase matrix `Ω`
//!    rotates every `γ_j` onto the nonnegative real axis;
//! 3. `W = blockdiag(Ω V, 1) · U`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::hermitian::{
    conjugate, eigh, ComplexMatrix, HermitianMatrix, LinalgError, UnitaryMatrix,
};

/// Default `rank_tol` is this factor times `‖A‖_max`.
pub const DEFAULT_RANK_TOL_REL: f64 = 1e-9;
/// `|γ_j|` at or below this is treated as an exact zero (`ω_j = 1`).
pub const PHASE_ZERO_TOL: f64 = 1e-13;
const CORNER_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReductionError {
    #[error(
        "matrix is not rank one under rank_tol {rank_tol:e}: eigenvalues above tolerance {large:?}"
    )]
    RankNotOne { large: Vec<f64>, rank_tol: f64 },
    #[error("dimension mismatch: A is {a}x{a}, B is {b}x{b}")]
    DimensionMismatch { a: usize, b: usize },
    #[error("reduction needs n >= 2, got n = {0}")]
    TooSmall(usize),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// `rank_tol = 1e-9 · ‖A‖_max`.
pub fn default_rank_tol(a: &HermitianMatrix) -> f64 {
    DEFAULT_RANK_TOL_REL * a.max_abs()
}

/// The single nonzero eigenpair of a rank-one Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOneCertificate {
    pub lambda_n: f64,
    /// Unit eigenvector for `lambda_n`.
    pub direction: Vec<Complex64>,
}

impl RankOneCertificate {
    /// `‖A − λ v v*‖_max`.
    pub fn defect(&self, a: &HermitianMatrix) -> f64 {
        let n = self.direction.len();
        let mut worst = 0.0_f64;
        for r in 0..n {
            for c in 0..n {
                let outer = self.direction[r] * self.direction[c].conj() * self.lambda_n;
                worst = worst.max((a.get(r, c) - outer).norm());
            }
        }
        worst
    }
}

/// Checks that exactly one eigenvalue of `a` exceeds `rank_tol` in modulus.
pub fn assert_rank_one(
    a: &HermitianMatrix,
    rank_tol: f64,
) -> Result<RankOneCertificate, ReductionError> {
    let d = eigh(a)?;
    let large: Vec<usize> = (0..d.eigenvalues.len())
        .filter(|&j| d.eigenvalues[j].abs() > rank_tol)
        .collect();
    if large.len() != 1 {
        return Err(ReductionError::RankNotOne {
            large: large.iter().map(|&j| d.eigenvalues[j]).collect(),
            rank_tol,
        });
    }
    let j = large[0];
    Ok(RankOneCertificate {
        lambda_n: d.eigenvalues[j],
        direction: d.eigenvector(j),
    })
}

/// Unitary `U` with `U v = α e_n`, `|α| = 1`, for the certificate's
/// direction `v`; hence `U A U* = diag(0, …, 0, λ)`.
///
/// If `v` is already a multiple of `e_n` the result is a diagonal phase
/// matrix (the identity when `v = e_n`); otherwise it is the complex
/// Householder reflection `I − 2 w w* / (w* w)` with `w = v − α e_n` and
/// `α = −v_n / |v_n|`.
pub fn corner_diagonalizer(cert: &RankOneCertificate) -> UnitaryMatrix {
    let v = &cert.direction;
    let n = v.len();
    let last = v[n - 1];
    let phase = if last.norm() > 0.0 {
        last / last.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };

    if v[..n - 1].iter().all(|z| z.norm() <= CORNER_TOL) {
        let mut phases = vec![Complex64::new(1.0, 0.0); n];
        phases[n - 1] = phase.conj();
        return UnitaryMatrix::new_unchecked(ComplexMatrix::from_dmatrix_unchecked(
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(phases)),
        ));
    }

    let alpha = -phase;
    let mut w = nalgebra::DVector::from_column_slice(v);
    w[n - 1] -= alpha;
    let ww: f64 = w.iter().map(|z| z.norm_sqr()).sum();
    let mut h = DMatrix::<Complex64>::identity(n, n);
    let scale = Complex64::new(2.0 / ww, 0.0);
    for r in 0..n {
        for c in 0..n {
            h[(r, c)] -= scale * w[r] * w[c].conj();
        }
    }
    UnitaryMatrix::new_unchecked(ComplexMatrix::from_dmatrix_unchecked(h))
}

/// Phases `ω_j` with `|ω_j| = 1` and `ω_j γ_j = |γ_j|`; `ω_j = 1` when
/// `|γ_j| ≤ PHASE_ZERO_TOL`.
pub fn phase_matrix(g: &[Complex64]) -> (Vec<Complex64>, Option<UnitaryMatrix>) {
    let omegas: Vec<Complex64> = g
        .iter()
        .map(|&z| {
            let r = z.norm();
            if r <= PHASE_ZERO_TOL {
                Complex64::new(1.0, 0.0)
            } else {
                z.conj() / r
            }
        })
        .collect();
    let omega = if omegas.is_empty() {
        None
    } else {
        Some(UnitaryMatrix::new_unchecked(
            ComplexMatrix::from_dmatrix_unchecked(DMatrix::from_diagonal(
                &nalgebra::DVector::from_column_slice(&omegas),
            )),
        ))
    };
    (omegas, omega)
}

/// Every intermediate of the reduction, named after its role.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionTrace {
    /// Step-1 corner diagonalizer.
    pub u: UnitaryMatrix,
    /// Leading `(n-1)` block of `U B U*`.
    pub b_block: HermitianMatrix,
    /// Last column of `U B U*` above the corner.
    pub b_col: Vec<Complex64>,
    /// Corner entry of `U B U*`.
    pub mu_n: f64,
    /// `V` with `V b_block V* = diag(m_block)`.
    pub v_block: UnitaryMatrix,
    pub m_block: Vec<f64>,
    /// `g = V b_col`.
    pub g: Vec<Complex64>,
    pub omegas: Vec<Complex64>,
    pub omega: UnitaryMatrix,
    /// `Ω V`.
    pub w_block: UnitaryMatrix,
    pub g_abs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionResult {
    pub w: UnitaryMatrix,
    pub l: HermitianMatrix,
    pub m: HermitianMatrix,
    pub trace: ReductionTrace,
}

/// Residuals of a reduction against the original pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReductionResiduals {
    /// `‖W A W* − L‖_max`
    pub a: f64,
    /// `‖W B W* − M‖_max`
    pub b: f64,
    /// `‖W W* − I‖_max`
    pub unitarity: f64,
    /// Smallest real part among the off-diagonal entries of `M`.
    pub min_offdiag: f64,
}

impl ReductionResult {
    pub fn residuals(
        &self,
        a: &HermitianMatrix,
        b: &HermitianMatrix,
    ) -> Result<ReductionResiduals, ReductionError> {
        let wa = conjugate(&self.w, a)?;
        let wb = conjugate(&self.w, b)?;
        let n = self.m.dim();
        let mut min_offdiag = f64::INFINITY;
        for r in 0..n {
            for c in 0..n {
                if r != c {
                    min_offdiag = min_offdiag.min(self.m.get(r, c).re);
                }
            }
        }
        Ok(ReductionResiduals {
            a: wa.as_matrix().max_abs_diff(self.l.as_matrix()),
            b: wb.as_matrix().max_abs_diff(self.m.as_matrix()),
            unitarity: self.w.unitarity_defect(),
            min_offdiag,
        })
    }
}

/// Runs the three-stage reduction of `(a, b)`.
pub fn reduce(
    a: &HermitianMatrix,
    b: &HermitianMatrix,
    rank_tol: f64,
) -> Result<ReductionResult, ReductionError> {
    let n = a.dim();
    if b.dim() != n {
        return Err(ReductionError::DimensionMismatch { a: n, b: b.dim() });
    }
    if n < 2 {
        return Err(ReductionError::TooSmall(n));
    }
    let cert = assert_rank_one(a, rank_tol)?;
    let k = n - 1;

    // Step 1: move A's eigenvector to the corner and carry B along.
    let u = corner_diagonalizer(&cert);
    let b1 = conjugate(&u, b)?;
    let b_block = b1.leading_block(k);
    let b_col: Vec<Complex64> = (0..k).map(|r| b1.get(r, k)).collect();
    let mu_n = b1.get(k, k).re;

    // Step 2: diagonalize the leading block, then fix the phases of g.
    let d = eigh(&b_block)?;
    let v_block = d.eigenvectors.adjoint();
    let m_block = d.eigenvalues.clone();
    let g: Vec<Complex64> = (0..k)
        .map(|r| (0..k).map(|c| v_block.get(r, c) * b_col[c]).sum())
        .collect();
    let (omegas, omega) = phase_matrix(&g);
    let omega = omega.expect("k >= 1");
    let g_abs: Vec<f64> = g.iter().map(|z| z.norm()).collect();
    let w_block = omega.compose(&v_block)?;

    // Step 3: assemble W, L and M.
    let w = w_block.extend_with_one().compose(&u)?;
    let mut l_diag = vec![0.0; n];
    l_diag[k] = cert.lambda_n;
    let l = HermitianMatrix::from_real_diagonal(&l_diag)?;

    let mut m = DMatrix::<Complex64>::zeros(n, n);
    for j in 0..k {
        m[(j, j)] = Complex64::new(m_block[j], 0.0);
        m[(j, k)] = Complex64::new(g_abs[j], 0.0);
        m[(k, j)] = Complex64::new(g_abs[j], 0.0);
    }
    m[(k, k)] = Complex64::new(mu_n, 0.0);
    let m = HermitianMatrix::symmetrized(m);

    Ok(ReductionResult {
        w,
        l,
        m,
        trace: ReductionTrace {
            u,
            b_block,
            b_col,
            mu_n,
            v_block,
            m_block,
            g,
            omegas,
            omega,
            w_block,
            g_abs,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{random_hermitian, random_rank_one, random_unit_vector};
    use crate::transform::{trace_f, TracePair};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn rank_one_diagonal() {
        let a = HermitianMatrix::from_real_diagonal(&[0., 0., 2.]).unwrap();
        let cert = assert_rank_one(&a, default_rank_tol(&a)).unwrap();
        assert_eq!(cert.lambda_n, 2.0);
        assert!((cert.direction[2] - c(1., 0.)).norm() < 1e-15);
        assert!(cert.direction[0].norm() + cert.direction[1].norm() < 1e-15);
    }

    #[test]
    fn rank_one_round_trip_recovers_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 2..=6 {
            let v = random_unit_vector(&mut rng, n);
            let mut entries = Vec::new();
            for r in 0..n {
                for col in 0..n {
                    entries.push(v[r] * v[col].conj() * 3.0);
                }
            }
            let a = HermitianMatrix::from_row_major(n, &entries).unwrap();
            let cert = assert_rank_one(&a, default_rank_tol(&a)).unwrap();
            assert!((cert.lambda_n - 3.0).abs() < 1e-12);
            let overlap: Complex64 = v
                .iter()
                .zip(&cert.direction)
                .map(|(x, y)| x.conj() * y)
                .sum();
            assert!((overlap.norm() - 1.0).abs() < 1e-12);
            assert!(cert.defect(&a) < 1e-12);
        }
    }

    #[test]
    fn rank_two_is_rejected() {
        let a = HermitianMatrix::from_real_diagonal(&[1., 1.]).unwrap();
        match assert_rank_one(&a, default_rank_tol(&a)) {
            Err(ReductionError::RankNotOne { large, .. }) => assert_eq!(large, vec![1.0, 1.0]),
            other => panic!("unexpected {other:?}"),
        }
        let zero = HermitianMatrix::zeros(3);
        assert!(matches!(
            assert_rank_one(&zero, default_rank_tol(&zero)),
            Err(ReductionError::RankNotOne { .. })
        ));
    }

    #[test]
    fn corner_diagonalizer_swap_and_identity() {
        let a = HermitianMatrix::from_real_diagonal(&[2., 0.]).unwrap();
        let u = corner_diagonalizer(&assert_rank_one(&a, 1e-9).unwrap());
        for (r, col) in [(0, 0), (1, 1)] {
            assert!(u.get(r, col).norm() < 1e-15);
        }
        for (r, col) in [(0, 1), (1, 0)] {
            assert!((u.get(r, col).norm() - 1.0).abs() < 1e-15);
        }
        let got = conjugate(&u, &a).unwrap();
        assert!(
            got.as_matrix().max_abs_diff(
                HermitianMatrix::from_real_diagonal(&[0., 2.])
                    .unwrap()
                    .as_matrix()
            ) < 1e-15
        );

        let a = HermitianMatrix::from_real_diagonal(&[0., 0., 5.]).unwrap();
        let u = corner_diagonalizer(&assert_rank_one(&a, 1e-9).unwrap());
        assert_eq!(u, UnitaryMatrix::identity(3));
    }

    #[test]
    fn corner_diagonalizer_random_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let (a, lambda) = random_rank_one(&mut rng, 4);
            let cert = assert_rank_one(&a, default_rank_tol(&a)).unwrap();
            let u = corner_diagonalizer(&cert);
            assert!(u.unitarity_defect() < 1e-14);
            let target = HermitianMatrix::from_real_diagonal(&[0., 0., 0., lambda]).unwrap();
            let got = conjugate(&u, &a).unwrap();
            assert!(got.as_matrix().max_abs_diff(target.as_matrix()) <= 1e-10);
        }
    }

    #[test]
    fn phase_matrix_examples() {
        let (w, _) = phase_matrix(&[c(0., 1.)]);
        assert!((w[0] - c(0., -1.)).norm() < 1e-15);

        let (w, _) = phase_matrix(&[c(0., 0.)]);
        assert_eq!(w[0], c(1., 0.));

        let g = [c(3., 0.), c(0., -4.)];
        let (w, omega) = phase_matrix(&g);
        assert!((w[0] - c(1., 0.)).norm() < 1e-15);
        assert!((w[1] - c(0., 1.)).norm() < 1e-15);
        let omega = omega.unwrap();
        let rotated: Vec<Complex64> = (0..2).map(|j| omega.get(j, j) * g[j]).collect();
        assert!((rotated[0] - c(3., 0.)).norm() < 1e-15);
        assert!((rotated[1] - c(4., 0.)).norm() < 1e-15);
    }

    #[test]
    fn reduce_two_by_two() {
        let a = HermitianMatrix::from_real_diagonal(&[0., 1.]).unwrap();
        let b = HermitianMatrix::from_row_major(2, &[c(1., 0.), c(0., 1.), c(0., -1.), c(3., 0.)])
            .unwrap();
        let r = reduce(&a, &b, default_rank_tol(&a)).unwrap();
        let w = UnitaryMatrix::from_phases(&[c(0., -1.), c(1., 0.)]).unwrap();
        assert!(r.w.as_matrix().max_abs_diff(w.as_matrix()) < 1e-15);
        assert_eq!(r.l, a);
        let m = HermitianMatrix::from_real_row_major(2, &[1., 1., 1., 3.]).unwrap();
        assert!(r.m.as_matrix().max_abs_diff(m.as_matrix()) < 1e-15);
    }

    #[test]
    fn reduce_already_reduced_real_pair() {
        let a = HermitianMatrix::from_real_diagonal(&[0., 1.]).unwrap();
        let b = HermitianMatrix::from_real_row_major(2, &[-1., 0.5, 0.5, 2.]).unwrap();
        let r = reduce(&a, &b, default_rank_tol(&a)).unwrap();
        assert_eq!(r.w, UnitaryMatrix::identity(2));
        assert_eq!(r.m, b);
    }

    #[test]
    fn reduce_random_four_by_four() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let (a, _) = random_rank_one(&mut rng, 4);
        let b = random_hermitian(&mut rng, 4);
        let r = reduce(&a, &b, default_rank_tol(&a)).unwrap();
        let res = r.residuals(&a, &b).unwrap();
        assert!(res.a <= 1e-10 && res.b <= 1e-10, "{res:?}");
        assert!(res.unitarity <= 1e-10);
        assert!(res.min_offdiag >= -1e-12);
        for j in 0..3 {
            for k in (j + 1)..3 {
                assert_eq!(r.m.get(j, k), c(0., 0.));
            }
            assert_eq!(r.m.get(j, 3), c(r.trace.g_abs[j], 0.));
        }
        for (w, g) in r.trace.omegas.iter().zip(&r.trace.g) {
            assert!((w.norm() - 1.0).abs() < 1e-12);
            assert!((w * g - c(g.norm(), 0.)).norm() < 1e-12);
        }
        let original = TracePair::new(a, b).unwrap();
        let reduced = TracePair::new(r.l.clone(), r.m.clone()).unwrap();
        for k in 0..=4 {
            let t = -2.0 + k as f64;
            let f = trace_f(&original, t).unwrap();
            let g = trace_f(&reduced, t).unwrap();
            assert!((f - g).abs() <= 1e-9 * f.max(1.0), "t = {t}: {f} vs {g}");
        }
    }

    #[test]
    fn reduce_errors() {
        let a = HermitianMatrix::from_real_diagonal(&[1., 1.]).unwrap();
        let b = HermitianMatrix::zeros(2);
        assert!(matches!(
            reduce(&a, &b, 1e-9),
            Err(ReductionError::RankNotOne { .. })
        ));
        let a = HermitianMatrix::from_real_diagonal(&[0., 1.]).unwrap();
        assert!(matches!(
            reduce(&a, &HermitianMatrix::zeros(3), 1e-9),
            Err(ReductionError::DimensionMismatch { a: 2, b: 3 })
        ));
        let a = HermitianMatrix::from_real_diagonal(&[1.]).unwrap();
        assert!(matches!(
            reduce(&a, &HermitianMatrix::zeros(1), 1e-9),
            Err(ReductionError::TooSmall(1))
        ));
    }

    #[test]
    fn reduce_with_zero_coupling_uses_unit_phase() {
        let a = HermitianMatrix::from_real_diagonal(&[0., 0., -2.]).unwrap();
        let b = HermitianMatrix::from_row_major(
            3,
            &[
                c(1., 0.),
                c(0., 0.5),
                c(0., 0.),
                c(0., -0.5),
                c(2., 0.),
                c(0., 0.),
                c(0., 0.),
                c(0., 0.),
                c(-1., 0.),
            ],
        )
        .unwrap();
        let r = reduce(&a, &b, default_rank_tol(&a)).unwrap();
        assert!(r.trace.omegas.iter().all(|w| *w == c(1., 0.)));
        assert!(r.trace.g_abs.iter().all(|&x| x == 0.0));
        let res = r.residuals(&a, &b).unwrap();
        assert!(res.a <= 1e-10 && res.b <= 1e-10);
    }
}
