//! Quadrature discretization of the Green's-function integral operator on (0, 1).

use super::Matrix;
use crate::error::{Error, Result};

/// `κ(t, s) = 40 t (1 − s)` for `t ≤ s`, `40 s (1 − t)` otherwise.
pub fn kernel(t: f64, s: f64) -> f64 {
    if t <= s {
        40.0 * t * (1.0 - s)
    } else {
        40.0 * s * (1.0 - t)
    }
}

/// `n × n` matrix with entries `κ(t_j, s_k) / n`, `t_j = (j − 1)/n`.
///
/// Column nodes are the midpoints `s_k = (2k − 1)/(2n)` when `midpoint_columns`
/// is set; otherwise `s_k = (2k − 1)/n`, the literal node formula, which leaves
/// the unit interval for `k > n/2`.
pub fn build_integral_operator(n: usize, midpoint_columns: bool) -> Result<Matrix> {
    if n < 2 {
        return Err(Error::Config(format!(
            "discretization size {n} must be at least 2"
        )));
    }
    let nf = n as f64;
    let col_node = |k: usize| {
        let odd = (2 * k + 1) as f64;
        if midpoint_columns {
            odd / (2.0 * nf)
        } else {
            odd / nf
        }
    };
    Ok(Matrix::from_fn(n, n, |j, k| {
        kernel(j as f64 / nf, col_node(k)) / nf
    }))
}

/// Piecewise constant test signal: 1 on `[9/40, 11/40] ∪ [29/40, 31/40]`,
/// 2 on `[19/40, 21/40]`, 0 elsewhere.
pub fn sample_sparse_signal(s: f64) -> f64 {
    let inside = |a: f64, b: f64| (a / 40.0..=b / 40.0).contains(&s);
    if inside(19.0, 21.0) {
        2.0
    } else if inside(9.0, 11.0) || inside(29.0, 31.0) {
        1.0
    } else {
        0.0
    }
}

/// The sparse signal sampled at the cell midpoints `(2j − 1)/(2n)`.
pub fn exact_sparse_signal(n: usize) -> Result<Vec<f64>> {
    if n < 40 {
        return Err(Error::Config(format!(
            "signal size {n} is below 40 and cannot resolve the support"
        )));
    }
    let nf = n as f64;
    Ok((0..n)
        .map(|j| sample_sparse_signal((2 * j + 1) as f64 / (2.0 * nf)))
        .collect())
}
