use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::Matrix;
use crate::error::{Error, Result};
use crate::spaces::{conjugate, SpaceDescriptor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    /// Lower bound of `‖A‖_{ℓ^{rX} → ℓ^{rY}}`.
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Boyd's power method for `max ‖Ax‖_{rY} / ‖x‖_{rX}`.
///
/// Each step replaces the unit vector `x` by the maximizer of `⟨Aᵀ J_{rY}(Ax), ·⟩`
/// over the unit `ℓ^{rX}` sphere, which is the normalized `J_{rX*}` image of
/// that gradient. The ratio `‖Ax‖_{rY}` cannot decrease from one step to the
/// next. With `rX = rY = 2` this is the classical power iteration on `AᵀA`.
pub fn boyd_operator_norm(
    a: &Matrix,
    rx: f64,
    ry: f64,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<NormEstimate> {
    boyd_iterate(a, rx, ry, tol, max_iter, seed, |_| ())
}

/// Best of `starts` runs of [`boyd_operator_norm`]: the positive start vector
/// followed by signed Gaussian ones drawn from `seed`.
///
/// For signed matrices with `rX ≠ 2` or `rY ≠ 2` the ratio has local maxima and
/// a single run can stop at one of them. For entrywise nonnegative matrices with
/// `rX ≤ rY` the positive start already reaches the global maximum.
/// `iterations` sums over runs; `converged` refers to the returned run.
pub fn boyd_operator_norm_multistart(
    a: &Matrix,
    rx: f64,
    ry: f64,
    tol: f64,
    max_iter: usize,
    seed: u64,
    starts: usize,
) -> Result<NormEstimate> {
    if starts == 0 {
        return Err(Error::InvalidInput("at least one start is required".into()));
    }
    let mut best = boyd_operator_norm(a, rx, ry, tol, max_iter, seed)?;
    let mut total = best.iterations;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ SIGNED_START_SALT);
    for _ in 1..starts {
        let x0: Vec<f64> = (0..a.cols()).map(|_| rng.sample(StandardNormal)).collect();
        let est = iterate_from(a, rx, ry, tol, max_iter, x0, |_| ())?;
        total += est.iterations;
        if est.value > best.value {
            best = est;
        }
    }
    Ok(NormEstimate {
        iterations: total,
        ..best
    })
}

const SIGNED_START_SALT: u64 = 0x0b0d_5a27;

/// Same as [`boyd_operator_norm`], also returning the raw ratio after every step
/// (the first entry belongs to the start vector).
pub fn boyd_operator_norm_history(
    a: &Matrix,
    rx: f64,
    ry: f64,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<(NormEstimate, Vec<f64>)> {
    let mut history = Vec::new();
    let est = boyd_iterate(a, rx, ry, tol, max_iter, seed, |v| history.push(v))?;
    Ok((est, history))
}

fn boyd_iterate(
    a: &Matrix,
    rx: f64,
    ry: f64,
    tol: f64,
    max_iter: usize,
    seed: u64,
    on_step: impl FnMut(f64),
) -> Result<NormEstimate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0: Vec<f64> = (0..a.cols()).map(|_| 0.5 + rng.random::<f64>()).collect();
    iterate_from(a, rx, ry, tol, max_iter, x0, on_step)
}

fn iterate_from(
    a: &Matrix,
    rx: f64,
    ry: f64,
    tol: f64,
    max_iter: usize,
    mut x: Vec<f64>,
    mut on_step: impl FnMut(f64),
) -> Result<NormEstimate> {
    let x_space = SpaceDescriptor::componentwise(rx)?;
    let y_space = SpaceDescriptor::componentwise(ry)?;
    let dual_x = SpaceDescriptor::componentwise(conjugate(rx))?;
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "tolerance {tol} must be finite and ≥ 0"
        )));
    }
    if a.is_zero() || a.rows() == 0 || a.cols() == 0 {
        return Ok(NormEstimate {
            value: 0.0,
            iterations: 0,
            converged: true,
        });
    }
    if !normalize(&mut x, &x_space) {
        return Err(Error::InvalidInput(
            "start vector must be nonzero and finite".into(),
        ));
    }

    let mut ax = vec![0.0; a.rows()];
    let mut jy = vec![0.0; a.rows()];
    let mut grad = vec![0.0; a.cols()];
    a.matvec_into(&x, &mut ax);
    let mut estimate = y_space.norm(&ax);
    on_step(estimate);

    for it in 1..=max_iter {
        y_space.duality_map_into(&ax, &mut jy);
        a.matvec_transpose_into(&jy, &mut grad);
        dual_x.duality_map_into(&grad, &mut x);
        if !normalize(&mut x, &x_space) {
            // Aᵀ J(Ax) = 0 only when Ax = 0; the start vector lies in the kernel.
            return Ok(NormEstimate {
                value: estimate,
                iterations: it,
                converged: true,
            });
        }
        a.matvec_into(&x, &mut ax);
        let next = y_space.norm(&ax);
        on_step(next);
        let done = (next - estimate).abs() <= tol * next;
        estimate = estimate.max(next);
        if done {
            return Ok(NormEstimate {
                value: estimate,
                iterations: it,
                converged: true,
            });
        }
    }
    Ok(NormEstimate {
        value: estimate,
        iterations: max_iter,
        converged: false,
    })
}

fn normalize(x: &mut [f64], space: &SpaceDescriptor) -> bool {
    let n = space.norm(x);
    if n == 0.0 || !n.is_finite() {
        return false;
    }
    x.iter_mut().for_each(|v| *v /= n);
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_and_row_vector() {
        let d = Matrix::from_rows(&[vec![3.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let est = boyd_operator_norm(&d, 2.0, 2.0, 1e-15, 10_000, 1).unwrap();
        assert!((est.value - 3.0).abs() < 1e-8);
        assert!(est.converged);

        let r = Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
        let est = boyd_operator_norm(&r, 2.0, 2.0, 1e-15, 10_000, 1).unwrap();
        assert!((est.value - 2f64.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn zero_matrix_has_zero_norm() {
        let z = Matrix::zeros(3, 2);
        let est = boyd_operator_norm(&z, 1.5, 2.0, 1e-12, 100, 0).unwrap();
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn reports_non_convergence() {
        let d = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.999]]).unwrap();
        let est = boyd_operator_norm(&d, 2.0, 2.0, 0.0, 3, 4).unwrap();
        assert!(!est.converged);
        assert_eq!(est.iterations, 3);
        assert!(est.value <= 1.0 + 1e-15);
    }

    #[test]
    fn restarts_match_exhaustive_search_in_two_dimensions() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for &(rx, ry) in &[(3.0, 1.2), (4.0, 4.0), (1.2, 3.0)] {
            for _ in 0..10 {
                let a = Matrix::from_fn(4, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
                // the ratio is homogeneous, so directions on the half circle cover every x
                let oracle = (0..200_000)
                    .map(|i| {
                        let t = std::f64::consts::PI * i as f64 / 200_000.0;
                        let x = [t.cos(), t.sin()];
                        let ax = a.matvec(&x).unwrap();
                        crate::spaces::lr_norm(&ax, ry).unwrap()
                            / crate::spaces::lr_norm(&x, rx).unwrap()
                    })
                    .fold(0.0, f64::max);
                let est = boyd_operator_norm_multistart(&a, rx, ry, 1e-13, 100_000, 0, 16)
                    .unwrap()
                    .value;
                // the grid itself undershoots the maximum by its resolution
                assert!(
                    est <= oracle * (1.0 + 1e-7),
                    "{est} exceeds the maximum {oracle}"
                );
                assert!(
                    est >= oracle * (1.0 - 1e-6),
                    "({rx}, {ry}): {est} vs {oracle}"
                );
            }
        }
        assert!(
            boyd_operator_norm_multistart(&Matrix::identity(2), 2.0, 2.0, 1e-8, 10, 0, 0).is_err()
        );
    }

    #[test]
    fn rejects_invalid_exponents() {
        let d = Matrix::identity(2);
        assert!(boyd_operator_norm(&d, 1.0, 2.0, 1e-8, 10, 0).is_err());
        assert!(boyd_operator_norm(&d, 2.0, f64::INFINITY, 1e-8, 10, 0).is_err());
    }
}
