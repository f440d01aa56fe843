//! Convergence records, error metrics, rate bounds, and seed-ensemble statistics.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::noise::scaled_gaussian_perturbation;
use crate::operators::{BlockOperator, Matrix, ObservationSet};
use crate::solver::{
    landweber_step, step, IterationState, Method, Problem, Reference, SolverConfig, StepSchedule,
    StoppingRule,
};
use crate::spaces::SpaceDescriptor;

pub const CSV_HEADER: &str = "epoch,objective,residual,bregman,delta1,delta2,step";

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRow {
    pub epoch: u64,
    pub objective: f64,
    pub residual: f64,
    pub bregman: Option<f64>,
    pub delta1: Option<f64>,
    pub delta2: Option<f64>,
    /// Step size of the last step in the epoch, 0 before the first step.
    pub step: f64,
}

impl EpochRow {
    pub fn measure(
        epoch: u64,
        x: &[f64],
        problem: &Problem<'_>,
        cfg: &SolverConfig,
        reference: Reference<'_>,
        step: f64,
    ) -> Result<Self> {
        let norms = block_residual_norms(x, problem.op, problem.obs, cfg.y_space.r())?;
        let objective = objective_from_norms(&norms, cfg.gradient_exponent());
        let residual = stacked_norm(&norms, cfg.y_space.r());
        let bregman = reference.bregman_target.map(|t| cfg.x_space.bregman(x, t));
        let deltas = reference.truth.map(|t| delta_metrics(x, t)).transpose()?;
        Ok(Self {
            epoch,
            objective,
            residual,
            bregman,
            delta1: deltas.map(|d| d.0),
            delta2: deltas.map(|d| d.1),
            step,
        })
    }

    fn values(&self) -> impl Iterator<Item = f64> + '_ {
        [self.objective, self.residual, self.step]
            .into_iter()
            .chain(
                [self.bregman, self.delta1, self.delta2]
                    .into_iter()
                    .flatten(),
            )
    }
}

/// Per-epoch trace with strictly increasing epochs and finite entries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceRecord {
    rows: Vec<EpochRow>,
}

impl ConvergenceRecord {
    pub fn push(&mut self, row: EpochRow) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if row.epoch <= last.epoch {
                return Err(Error::InvalidInput(format!(
                    "epoch {} does not follow epoch {}",
                    row.epoch, last.epoch
                )));
            }
        }
        if row.values().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite diagnostic at epoch {}",
                row.epoch
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn rows(&self) -> &[EpochRow] {
        &self.rows
    }

    pub fn last(&self) -> Option<&EpochRow> {
        self.rows.last()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        let opt = |v: Option<f64>| v.map(|v| format!("{v:?}")).unwrap_or_default();
        for r in &self.rows {
            writeln!(
                w,
                "{},{:?},{:?},{},{},{},{:?}",
                r.epoch,
                r.objective,
                r.residual,
                opt(r.bregman),
                opt(r.delta1),
                opt(r.delta2),
                r.step
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }
}

fn block_residual_norms(
    x: &[f64],
    op: &BlockOperator,
    obs: &ObservationSet,
    r_y: f64,
) -> Result<Vec<f64>> {
    obs.check_against(op)?;
    Error::check_len(op.input_dim(), x.len())?;
    let space = SpaceDescriptor::componentwise(r_y)?;
    let mut res = Vec::new();
    op.blocks()
        .iter()
        .zip(obs.blocks())
        .enumerate()
        .map(|(i, (a, y))| {
            res.resize(a.rows(), 0.0);
            op.apply_into(i, x, &mut res)?;
            res.iter_mut().zip(y).for_each(|(r, yi)| *r -= yi);
            Ok(space.norm(&res))
        })
        .collect()
}

fn objective_from_norms(norms: &[f64], exponent: f64) -> f64 {
    norms
        .iter()
        .map(|n| n.powf(exponent) / exponent)
        .sum::<f64>()
        / norms.len() as f64
}

fn stacked_norm(norms: &[f64], r: f64) -> f64 {
    let m = norms.iter().copied().fold(0.0, f64::max);
    if m == 0.0 {
        return 0.0;
    }
    m * norms
        .iter()
        .map(|n| (n / m).powf(r))
        .sum::<f64>()
        .powf(1.0 / r)
}

/// `Ψ(x) = (1/N) Σ_i (1/e) ‖A_i x − y_i‖_{r_Y}^e`, with `e = y_space.p()`.
pub fn objective(
    x: &[f64],
    op: &BlockOperator,
    obs: &ObservationSet,
    y_space: &SpaceDescriptor,
) -> Result<f64> {
    let norms = block_residual_norms(x, op, obs, y_space.r())?;
    Ok(objective_from_norms(&norms, y_space.p()))
}

/// `‖Ax − y‖_{r_Y}` over the stacked data.
pub fn residual_norm(x: &[f64], op: &BlockOperator, obs: &ObservationSet, r_y: f64) -> Result<f64> {
    let norms = block_residual_norms(x, op, obs, r_y)?;
    Ok(stacked_norm(&norms, r_y))
}

/// Normalized `ℓ^1` and `ℓ^2` errors `(‖x† − x‖₁/‖x†‖₁, ‖x† − x‖₂/‖x†‖₂)`.
pub fn delta_metrics(x: &[f64], truth: &[f64]) -> Result<(f64, f64)> {
    Error::check_len(truth.len(), x.len())?;
    let n1: f64 = truth.iter().map(|v| v.abs()).sum();
    if n1 == 0.0 {
        return Err(Error::InvalidInput("reference solution is zero".into()));
    }
    let e1: f64 = x.iter().zip(truth).map(|(a, b)| (a - b).abs()).sum();
    let l2 = SpaceDescriptor::hilbert();
    let diff: Vec<f64> = x.iter().zip(truth).map(|(a, b)| b - a).collect();
    Ok((e1 / n1, l2.norm(&diff) / l2.norm(truth)))
}

/// `0.1 · max|x†|`.
pub fn default_support_threshold(truth: &[f64]) -> f64 {
    0.1 * truth.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

/// F1 score of `{|x_j| > threshold}` against `{x†_j ≠ 0}`. Two empty supports score 1.
pub fn support_f1(x: &[f64], truth: &[f64], threshold: f64) -> f64 {
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (a, b) in x.iter().zip(truth) {
        match (a.abs() > threshold, *b != 0.0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => {}
        }
    }
    if tp + fp + fneg == 0 {
        return 1.0;
    }
    2.0 * tp as f64 / (2 * tp + fp + fneg) as f64
}

/// `Δ0 (1 + α Δ0^α Σ_{n≤N} μ_n)^{−1/α}` for `N = 1, …, len`.
pub fn polyak_bound(delta0: f64, alpha: f64, step_products: &[f64]) -> Vec<f64> {
    let mut sum = 0.0;
    step_products
        .iter()
        .map(|mu| {
            sum += mu;
            if delta0 == 0.0 {
                0.0
            } else {
                delta0 * (1.0 + alpha * delta0.powf(alpha) * sum).powf(-1.0 / alpha)
            }
        })
        .collect()
}

/// Expected Bregman distance bound after each step: exponential for `α = 1`,
/// algebraic for `α > 1`.
pub fn rate_envelope(delta0: f64, alpha: f64, per_step: &[f64]) -> Result<Vec<f64>> {
    if !(alpha.is_finite() && alpha >= 1.0) {
        return Err(Error::InvalidInput(format!(
            "stability exponent α = {alpha} must be ≥ 1"
        )));
    }
    if alpha == 1.0 {
        let mut sum = 0.0;
        return Ok(per_step
            .iter()
            .map(|c| {
                sum += c;
                delta0 * (-sum).exp()
            })
            .collect());
    }
    let a = alpha - 1.0;
    let mut sum = 0.0;
    Ok(per_step
        .iter()
        .map(|c| {
            sum += c;
            if delta0 == 0.0 {
                return 0.0;
            }
            // (1 + a s)^{-1/a} as exp(-ln1p(a s)/a) keeps the α → 1 limit accurate
            delta0 * (-(a * delta0.powf(a) * sum).ln_1p() / a).exp()
        })
        .collect())
}

/// Per-index sample mean and standard error over a seed ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    pub mean: Vec<f64>,
    pub std_err: Vec<f64>,
    pub n_seeds: usize,
}

/// Runs `trace(seed)` for `seed0, …, seed0 + n_seeds − 1` in parallel and
/// reduces in seed order, so the result does not depend on scheduling.
pub fn monte_carlo_mean<F>(seed0: u64, n_seeds: usize, trace: F) -> Result<EnsembleSummary>
where
    F: Fn(u64) -> Result<Vec<f64>> + Sync,
{
    if n_seeds < 2 {
        return Err(Error::InvalidInput(
            "an ensemble needs at least two seeds".into(),
        ));
    }
    let traces: Vec<Vec<f64>> = (0..n_seeds as u64)
        .into_par_iter()
        .map(|s| trace(seed0 + s))
        .collect::<Result<_>>()?;
    summarize(&traces)
}

/// Mean and standard error of equally long traces, accumulated in the given order.
pub fn summarize(traces: &[Vec<f64>]) -> Result<EnsembleSummary> {
    let n = traces.len();
    if n < 2 {
        return Err(Error::InvalidInput(
            "an ensemble needs at least two traces".into(),
        ));
    }
    let len = traces[0].len();
    for t in traces {
        Error::check_len(len, t.len())?;
    }
    let mut mean = vec![0.0; len];
    for t in traces {
        mean.iter_mut().zip(t).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; len];
    for t in traces {
        var.iter_mut()
            .zip(t.iter().zip(&mean))
            .for_each(|(s, (v, m))| *s += (v - m) * (v - m));
    }
    let std_err = var
        .iter()
        .map(|s| (s / (n - 1) as f64 / n as f64).sqrt())
        .collect();
    Ok(EnsembleSummary {
        mean,
        std_err,
        n_seeds: n,
    })
}

/// Mean discrepancies between coupled clean and noisy runs at one noise level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityPoint {
    pub delta: f64,
    /// `D(x_k^δ, x_k)`.
    pub bregman: f64,
    /// `‖x_k^δ − x_k‖_X`.
    pub primal: f64,
    /// `‖J_p(x_k^δ) − J_p(x_k)‖_{X*}`.
    pub dual: f64,
}

fn run_steps(problem: &Problem<'_>, cfg: &SolverConfig, k: u64) -> Result<IterationState> {
    let mut state = IterationState::zeros(problem.op.input_dim(), cfg.seed);
    while state.k < k {
        step(&mut state, problem, cfg)?;
    }
    Ok(state)
}

/// For each `δ` and seed, perturbs the data by a Gaussian direction of norm exactly
/// `δ` and runs clean and noisy iterations to step `k_fixed` with the same index
/// sequence. The perturbation direction depends on the seed only, so noise levels
/// are coupled too.
pub fn stability_probe(
    problem: &Problem<'_>,
    cfg: &SolverConfig,
    k_fixed: u64,
    deltas: &[f64],
    seed0: u64,
    n_seeds: usize,
) -> Result<Vec<StabilityPoint>> {
    cfg.validate()?;
    if n_seeds == 0 {
        return Err(Error::InvalidInput(
            "stability probe needs at least one seed".into(),
        ));
    }
    let x_space = cfg.x_space;
    let dual = x_space.dual();
    let lens: Vec<usize> = problem.obs.blocks().iter().map(Vec::len).collect();
    let clean = problem.obs.concatenated();

    let per_seed: Vec<Vec<[f64; 3]>> = (0..n_seeds as u64)
        .into_par_iter()
        .map(|s| -> Result<Vec<[f64; 3]>> {
            let mut c = cfg.clone();
            c.seed = seed0 + s;
            let base = run_steps(problem, &c, k_fixed)?;
            let direction = scaled_gaussian_perturbation(
                clean.len(),
                1.0,
                c.y_space.r(),
                c.seed ^ 0x005e_ed0f_d1ff,
            )?;
            deltas
                .iter()
                .map(|&delta| {
                    let noisy: Vec<f64> = clean
                        .iter()
                        .zip(&direction)
                        .map(|(y, e)| y + delta * e)
                        .collect();
                    let mut blocks = Vec::with_capacity(lens.len());
                    let mut start = 0;
                    for &l in &lens {
                        blocks.push(noisy[start..start + l].to_vec());
                        start += l;
                    }
                    let obs = ObservationSet::new(blocks, delta)?;
                    let p = Problem::new(problem.op, &obs)?;
                    let st = run_steps(&p, &c, k_fixed)?;
                    let dx: Vec<f64> = st.x.iter().zip(&base.x).map(|(a, b)| a - b).collect();
                    let dz: Vec<f64> = st
                        .dual_x
                        .iter()
                        .zip(&base.dual_x)
                        .map(|(a, b)| a - b)
                        .collect();
                    Ok([
                        x_space.bregman(&st.x, &base.x).max(0.0),
                        x_space.norm(&dx),
                        dual.norm(&dz),
                    ])
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    Ok(deltas
        .iter()
        .enumerate()
        .map(|(j, &delta)| {
            let mut sums = [0.0; 3];
            for s in &per_seed {
                (0..3).for_each(|m| sums[m] += s[j][m]);
            }
            let n = n_seeds as f64;
            StabilityPoint {
                delta,
                bregman: sums[0] / n,
                primal: sums[1] / n,
                dual: sums[2] / n,
            }
        })
        .collect())
}

/// Least-`ℓ^2`-norm solution of `Ax = y` by SVD, dropping singular values below
/// `rel_tol · σ_max`.
pub fn min_norm_solution_hilbert(a: &Matrix, y: &[f64], rel_tol: f64) -> Result<Vec<f64>> {
    Error::check_len(a.rows(), y.len())?;
    let m = DMatrix::from_row_slice(a.rows(), a.cols(), a.as_slice());
    let svd = m.svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let sol = svd
        .solve(&DVector::from_column_slice(y), rel_tol * smax)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(sol.iter().copied().collect())
}

/// Minimum-`ℓ^{r_X}`-norm solution approximated by `steps` Landweber iterations
/// from `x₀ = 0` with constant step `mu`.
///
/// The limit does not depend on the duality power, so power 2 is used on both
/// sides; that keeps the residual map linear and a constant step stable.
pub fn min_norm_solution_landweber(
    op: &BlockOperator,
    obs: &ObservationSet,
    r_x: f64,
    r_y: f64,
    mu: f64,
    steps: u64,
) -> Result<Vec<f64>> {
    let cfg = SolverConfig::new(
        Method::Landweber,
        SpaceDescriptor::new(r_x, 2.0)?,
        r_y,
        StepSchedule::Constant { mu0: mu },
        StoppingRule::MaxEpochs(0),
        0,
    )?;
    let problem = Problem::new(op, obs)?;
    let mut state = IterationState::zeros(op.input_dim(), 0);
    for _ in 0..steps {
        landweber_step(&mut state, &problem, &cfg)?;
    }
    Ok(state.x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn objective_examples() {
        let op = BlockOperator::single(Matrix::identity(2));
        let obs = ObservationSet::exact(&[0.0, 0.0], 1).unwrap();
        let h = SpaceDescriptor::hilbert();
        assert!((objective(&[1.0, 1.0], &op, &obs, &h).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(objective(&[0.0, 0.0], &op, &obs, &h).unwrap(), 0.0);
        assert!(objective(&[1.0], &op, &obs, &h).is_err());
    }

    #[test]
    fn delta_metric_examples() {
        let t = [1.0, -2.0, 0.0, 0.5];
        assert_eq!(delta_metrics(&t, &t).unwrap(), (0.0, 0.0));
        let (a, b) = delta_metrics(&[0.0; 4], &t).unwrap();
        assert!((a - 1.0).abs() < 1e-15 && (b - 1.0).abs() < 1e-15);
        let twice: Vec<f64> = t.iter().map(|v| 2.0 * v).collect();
        let (a, b) = delta_metrics(&twice, &t).unwrap();
        assert!((a - 1.0).abs() < 1e-15 && (b - 1.0).abs() < 1e-15);
        assert!(delta_metrics(&t, &[0.0; 4]).is_err());
    }

    #[test]
    fn support_f1_examples() {
        let t = [1.0, 1.0, 0.0, 0.0];
        assert_eq!(support_f1(&t, &t, 0.1), 1.0);
        assert_eq!(support_f1(&[0.0; 4], &t, 0.1), 0.0);
        assert!((support_f1(&[1.0, 0.0, 0.0, 0.0], &t, 0.1) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(default_support_threshold(&[0.5, -2.0]), 0.2);
    }

    #[test]
    fn polyak_examples() {
        let b = polyak_bound(1.0, 1.0, &[0.1]);
        assert!((b[0] - 1.0 / 1.1).abs() < 1e-15);
        assert!(0.9 <= b[0]);
        assert!(polyak_bound(0.0, 2.0, &[0.3, 0.4])
            .iter()
            .all(|&v| v == 0.0));
        let b = polyak_bound(2.0, 0.5, &[0.1; 20]);
        assert!(b.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn rate_envelope_examples() {
        let e = rate_envelope(1.0, 1.0, &[0.1; 10]).unwrap();
        assert!((e[9] - (-1.0f64).exp()).abs() < 1e-12);
        let near = rate_envelope(1.0, 1.0 + 1e-8, &[0.1; 10]).unwrap();
        assert!((near[9] - e[9]).abs() < 1e-6);
        assert_eq!(rate_envelope(0.7, 2.0, &[0.0]).unwrap(), vec![0.7]);
        assert!(rate_envelope(1.0, 0.5, &[0.1]).is_err());
    }

    #[test]
    fn ensemble_summary() {
        let s = summarize(&[vec![1.0, 2.0], vec![3.0, 2.0]]).unwrap();
        assert_eq!(s.mean, vec![2.0, 2.0]);
        assert!((s.std_err[0] - 1.0).abs() < 1e-15);
        assert_eq!(s.std_err[1], 0.0);
        assert!(summarize(&[vec![1.0]]).is_err());
        assert!(summarize(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn record_rejects_bad_rows() {
        let row = |epoch, objective| EpochRow {
            epoch,
            objective,
            residual: 0.0,
            bregman: None,
            delta1: None,
            delta2: None,
            step: 0.0,
        };
        let mut rec = ConvergenceRecord::default();
        rec.push(row(0, 1.0)).unwrap();
        assert!(rec.push(row(0, 1.0)).is_err());
        assert!(rec.push(row(1, f64::NAN)).is_err());
        rec.push(row(1, 0.5)).unwrap();
        let csv = rec.to_csv_string();
        assert_eq!(csv.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(csv.lines().nth(2).unwrap(), "1,0.5,0.0,,,,0.0");
    }

    #[test]
    fn hilbert_min_norm_solution() {
        // x1 + x2 = 2 → (1, 1)
        let a = Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
        let x = min_norm_solution_hilbert(&a, &[2.0], 1e-12).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }
}
