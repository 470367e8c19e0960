//! Lawson–Hanson active-set solver for `min ‖C x − d‖₂ subject to x ≥ 0`.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct NnlsSolution {
    pub x: DVector<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum NnlsFailure {
    IterationLimit(usize),
    NonFinite,
}

/// Solves the nonnegative least-squares problem. Deterministic: ties in
/// the entering-variable choice go to the lowest column index.
pub(crate) fn nnls(c: &DMatrix<f64>, d: &DVector<f64>) -> Result<NnlsSolution, NnlsFailure> {
    let (m, n) = c.shape();
    let mut x = DVector::<f64>::zeros(n);
    let mut passive = vec![false; n];
    let max_outer = 3 * n.max(1) + 10;

    let norm1 = (0..n)
        .map(|j| c.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0_f64, f64::max);
    let dinf = d.amax();
    let tol = 10.0 * f64::EPSILON * (m.max(n) as f64) * norm1 * dinf;

    let mut iterations = 0;
    loop {
        let residual = d - c * &x;
        let dual = c.transpose() * &residual;

        let mut entering = None;
        let mut best = tol;
        for j in 0..n {
            if !passive[j] && dual[j] > best {
                best = dual[j];
                entering = Some(j);
            }
        }
        let Some(j) = entering else { break };
        iterations += 1;
        if iterations > max_outer {
            return Err(NnlsFailure::IterationLimit(iterations));
        }
        passive[j] = true;

        let mut inner = 0;
        loop {
            inner += 1;
            if inner > max_outer {
                return Err(NnlsFailure::IterationLimit(iterations));
            }
            let cols: Vec<usize> = (0..n).filter(|&k| passive[k]).collect();
            let z_p = least_squares(c, &cols, d).ok_or(NnlsFailure::NonFinite)?;

            if z_p.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (&k, &v) in cols.iter().zip(z_p.iter()) {
                    x[k] = v;
                }
                break;
            }

            // Step back toward the feasible region until a passive variable hits zero.
            let mut alpha = f64::INFINITY;
            for (&k, &v) in cols.iter().zip(z_p.iter()) {
                if v <= 0.0 {
                    let step = x[k] / (x[k] - v);
                    if step < alpha {
                        alpha = step;
                    }
                }
            }
            if !alpha.is_finite() {
                return Err(NnlsFailure::NonFinite);
            }
            for (&k, &v) in cols.iter().zip(z_p.iter()) {
                x[k] += alpha * (v - x[k]);
            }
            for &k in &cols {
                if x[k] <= tol.max(f64::MIN_POSITIVE) {
                    x[k] = 0.0;
                    passive[k] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }

    if x.iter().any(|v| !v.is_finite()) {
        return Err(NnlsFailure::NonFinite);
    }
    Ok(NnlsSolution { x, iterations })
}

/// Unconstrained least squares on the selected columns via SVD.
fn least_squares(c: &DMatrix<f64>, cols: &[usize], d: &DVector<f64>) -> Option<DVector<f64>> {
    let sub = c.select_columns(cols);
    let svd = sub.svd(true, true);
    let smax = svd.singular_values.amax();
    let eps = f64::EPSILON * smax * (c.nrows().max(cols.len()) as f64);
    let z = svd.solve(d, eps).ok()?;
    if z.iter().all(|v| v.is_finite()) {
        Some(z)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exhaustive oracle: best unconstrained fit over every support pattern
    /// whose solution is feasible.
    fn brute_force(c: &DMatrix<f64>, d: &DVector<f64>) -> f64 {
        let n = c.ncols();
        let mut best = d.norm();
        for mask in 1u32..(1 << n) {
            let cols: Vec<usize> = (0..n).filter(|&j| mask & (1 << j) != 0).collect();
            let z = least_squares(c, &cols, d).unwrap();
            if z.iter().all(|&v| v >= -1e-12) {
                let mut x = DVector::zeros(n);
                for (&k, &v) in cols.iter().zip(z.iter()) {
                    x[k] = v.max(0.0);
                }
                best = best.min((d - c * x).norm());
            }
        }
        best
    }

    #[test]
    fn exact_nonnegative_solution_is_recovered() {
        let c = DMatrix::from_row_slice(4, 3, &[1., 0., 1., 0., 1., 1., 1., 1., 0., 2., 0., 1.]);
        let truth = DVector::from_vec(vec![0.5, 0.0, 2.0]);
        let d = &c * &truth;
        let sol = nnls(&c, &d).unwrap();
        assert!((sol.x - truth).amax() < 1e-12);
    }

    #[test]
    fn matches_brute_force_on_small_problems() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let m = rng.random_range(3..7);
            let n = rng.random_range(2..6);
            let c = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
            let d = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
            let sol = nnls(&c, &d).unwrap();
            assert!(sol.x.iter().all(|&v| v >= 0.0));
            let got = (&d - &c * &sol.x).norm();
            let oracle = brute_force(&c, &d);
            assert!(got <= oracle + 1e-10, "nnls {got} vs oracle {oracle}");
        }
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let c = DMatrix::from_row_slice(2, 2, &[1., 2., 3., 4.]);
        let sol = nnls(&c, &DVector::zeros(2)).unwrap();
        assert_eq!(sol.x, DVector::zeros(2));
        assert_eq!(sol.iterations, 0);
    }
}
