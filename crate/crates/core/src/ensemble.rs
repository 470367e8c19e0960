//! Seeded random matrix ensembles.
//!
//! The law used by the verification runner is fixed and spelled out in
//! [`ENSEMBLE_LAW`] so that any failing case can be regenerated outside this
//! crate from `(master seed, case index)`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::hermitian::HermitianMatrix;

/// Human-readable description of the random instance law.
pub const ENSEMBLE_LAW: &str = "rng: ChaCha8, seeded with the master seed, stream = case index; \
n uniform in [2, max_n]; \
A = lambda v v* with |lambda| uniform in [0.1, 3] and a uniform random sign, \
v = z / |z| with z_j = x_j + i y_j, x_j, y_j iid N(0, 1); \
B = (G + G*) / 2 with G_jk = x_jk + i y_jk, x_jk, y_jk iid N(0, 1); \
draw order: n, lambda magnitude, lambda sign, z, G (row-major, re before im), \
then 8 uniform points in [-2, 2] for the random Gram grid";

/// Independent generator for case `index` under `master_seed`.
pub fn case_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im)
}

/// Normalized complex Gaussian vector.
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<Complex64> {
    loop {
        let z: Vec<Complex64> = (0..n).map(|_| complex_gaussian(rng)).collect();
        let norm = z.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-8 {
            return z.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// `(G + G*) / 2` with complex Gaussian `G`.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> HermitianMatrix {
    let g: Vec<Complex64> = (0..n * n).map(|_| complex_gaussian(rng)).collect();
    HermitianMatrix::symmetrized(nalgebra::DMatrix::from_row_slice(n, n, &g))
}

/// Nonzero eigenvalue drawn from `[-3, -0.1] ∪ [0.1, 3]`.
pub fn random_rank_one_eigenvalue<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let magnitude = rng.random_range(0.1..=3.0);
    if rng.random_bool(0.5) {
        magnitude
    } else {
        -magnitude
    }
}

/// `λ v v*`; returns the matrix and `λ`.
pub fn random_rank_one<R: Rng + ?Sized>(rng: &mut R, n: usize) -> (HermitianMatrix, f64) {
    let lambda = random_rank_one_eigenvalue(rng);
    let v = random_unit_vector(rng, n);
    (outer(lambda, &v), lambda)
}

pub(crate) fn outer(lambda: f64, v: &[Complex64]) -> HermitianMatrix {
    let n = v.len();
    let mut m = nalgebra::DMatrix::<Complex64>::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            m[(r, c)] = v[r] * v[c].conj() * lambda;
        }
    }
    HermitianMatrix::symmetrized(m)
}

/// Real symmetric matrix with `N(0, 1)` diagonal and nonnegative
/// off-diagonal entries `|N(0, 1)|`, roughly a third of them zeroed so that
/// reducible patterns also occur.
pub fn random_nonneg_offdiag<R: Rng + ?Sized>(rng: &mut R, n: usize) -> HermitianMatrix {
    let mut m = nalgebra::DMatrix::<Complex64>::zeros(n, n);
    for r in 0..n {
        let d: f64 = rng.sample(StandardNormal);
        m[(r, r)] = Complex64::new(d, 0.0);
        for c in (r + 1)..n {
            let x: f64 = rng.sample(StandardNormal);
            let x = if rng.random_bool(1.0 / 3.0) {
                0.0
            } else {
                x.abs()
            };
            m[(r, c)] = Complex64::new(x, 0.0);
            m[(c, r)] = Complex64::new(x, 0.0);
        }
    }
    HermitianMatrix::symmetrized(m)
}

/// One random rank-one instance following [`ENSEMBLE_LAW`].
#[derive(Debug, Clone, PartialEq)]
pub struct RankOneInstance {
    pub index: u64,
    pub n: usize,
    pub lambda: f64,
    pub a: HermitianMatrix,
    pub b: HermitianMatrix,
}

/// Instance `index` of the ensemble with dimension drawn from `[2, max_n]`.
pub fn rank_one_instance(master_seed: u64, index: u64, max_n: usize) -> RankOneInstance {
    let mut rng = case_rng(master_seed, index);
    draw_rank_one_instance(&mut rng, index, max_n)
}

/// Draws the next instance from `rng`; the generator can be reused for
/// further per-case randomness afterwards.
pub fn draw_rank_one_instance<R: Rng + ?Sized>(
    rng: &mut R,
    index: u64,
    max_n: usize,
) -> RankOneInstance {
    let n = rng.random_range(2..=max_n.max(2));
    rank_one_instance_from(rng, index, n)
}

/// Instance `index` with a fixed dimension.
pub fn rank_one_instance_with_dim(master_seed: u64, index: u64, n: usize) -> RankOneInstance {
    let mut rng = case_rng(master_seed, index);
    rank_one_instance_from(&mut rng, index, n)
}

fn rank_one_instance_from<R: Rng + ?Sized>(rng: &mut R, index: u64, n: usize) -> RankOneInstance {
    let (a, lambda) = random_rank_one(rng, n);
    let b = random_hermitian(rng, n);
    RankOneInstance {
        index,
        n,
        lambda,
        a,
        b,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_are_reproducible() {
        let x = rank_one_instance(42, 3, 7);
        let y = rank_one_instance(42, 3, 7);
        assert_eq!(x, y);
        let z = rank_one_instance(42, 4, 7);
        assert_ne!(x.a, z.a);
    }

    #[test]
    fn lambda_avoids_small_band() {
        let mut rng = case_rng(1, 0);
        for _ in 0..2000 {
            let l = random_rank_one_eigenvalue(&mut rng);
            assert!((0.1..=3.0).contains(&l.abs()));
        }
    }

    #[test]
    fn nonneg_offdiag_generator() {
        let mut rng = case_rng(9, 0);
        for _ in 0..50 {
            let m = random_nonneg_offdiag(&mut rng, 5);
            for r in 0..5 {
                for c in 0..5 {
                    if r != c {
                        assert!(m.get(r, c).re >= 0.0 && m.get(r, c).im == 0.0);
                    }
                }
            }
        }
    }
}
