//! Stochastic gradient descent in the dual of `ℓ^{r_X}`, plus full-gradient Landweber.
//!
//! The iterate is stored as `z_k = J_p(x_k)`. Each step subtracts `μ_k g` from
//! `z_k` and recovers `x_{k+1}` with the inverse duality map.

mod constants;
mod schedule;

pub use constants::{estimate_constants, theoretical_max_step, ConstantsConfig};
pub use schedule::{a_priori_stop_index, APrioriRule, StepSchedule, StoppingRule};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::diagnostics::{ConvergenceRecord, EpochRow};
use crate::error::{Error, Result};
use crate::noise::rng_from_seed;
use crate::operators::{BlockOperator, ObservationSet};
use crate::spaces::SpaceDescriptor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Mini-batch Kaczmarz: one uniformly drawn block per step.
    Sgd,
    /// Full gradient over the stacked operator, one step per epoch.
    Landweber,
    /// Stochastic steps whose residual duality map uses power `q` instead of `p`.
    GeneralizedKaczmarz { q: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    pub x_space: SpaceDescriptor,
    /// Data space. Its power is the exponent of the residual duality map:
    /// `p` for SGD and Landweber, `q` for the generalized Kaczmarz method.
    pub y_space: SpaceDescriptor,
    pub schedule: StepSchedule,
    pub stopping: StoppingRule,
    pub seed: u64,
}

impl SolverConfig {
    /// Builds a validated config; the residual power is derived from `method`.
    pub fn new(
        method: Method,
        x_space: SpaceDescriptor,
        r_y: f64,
        schedule: StepSchedule,
        stopping: StoppingRule,
        seed: u64,
    ) -> Result<Self> {
        let power = match method {
            Method::GeneralizedKaczmarz { q } => q,
            Method::Sgd | Method::Landweber => x_space.p(),
        };
        let y_space = SpaceDescriptor::new(r_y, power)?;
        let cfg = Self {
            method,
            x_space,
            y_space,
            schedule,
            stopping,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.x_space.p();
        let e = self.y_space.p();
        match self.method {
            Method::GeneralizedKaczmarz { q } => {
                if !(q > 1.0 && q <= 2.0) {
                    return Err(Error::Config(format!(
                        "Kaczmarz power q = {q} must lie in (1, 2]"
                    )));
                }
                if e != q {
                    return Err(Error::Config(format!(
                        "data-space power {e} must equal q = {q}"
                    )));
                }
            }
            Method::Sgd | Method::Landweber => {
                if e != p {
                    return Err(Error::Config(format!(
                        "data-space power {e} must equal p = {p}"
                    )));
                }
            }
        }
        self.schedule.validate(self.x_space.conjugate_p())?;
        match self.stopping {
            StoppingRule::MaxEpochs(_) => Ok(()),
            StoppingRule::APriori(rule) => rule.validate(),
        }
    }

    /// Exponent of the residual term in the gradient and in the objective.
    pub fn gradient_exponent(&self) -> f64 {
        self.y_space.p()
    }

    pub fn is_stochastic(&self) -> bool {
        !matches!(self.method, Method::Landweber)
    }
}

#[derive(Debug, Clone)]
pub struct IterationState {
    pub x: Vec<f64>,
    /// `J_p(x)`, the variable the update acts on.
    pub dual_x: Vec<f64>,
    /// Number of steps taken so far.
    pub k: u64,
    pub rng: ChaCha8Rng,
}

impl IterationState {
    /// `x₀ = 0`.
    pub fn zeros(dim: usize, seed: u64) -> Self {
        Self {
            x: vec![0.0; dim],
            dual_x: vec![0.0; dim],
            k: 0,
            rng: rng_from_seed(seed),
        }
    }

    pub fn from_primal(x: Vec<f64>, space: &SpaceDescriptor, seed: u64) -> Self {
        let dual_x = space.duality_map(&x);
        Self {
            x,
            dual_x,
            k: 0,
            rng: rng_from_seed(seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    /// Block used, `None` for a full-gradient step.
    pub index: Option<usize>,
    pub step_size: f64,
    pub gradient: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub op: &'a BlockOperator,
    pub obs: &'a ObservationSet,
}

impl<'a> Problem<'a> {
    pub fn new(op: &'a BlockOperator, obs: &'a ObservationSet) -> Result<Self> {
        obs.check_against(op)?;
        Ok(Self { op, obs })
    }
}

/// Optional comparison targets for the recorded diagnostics.
#[derive(Debug, Clone, Copy, Default)]
pub struct Reference<'a> {
    /// Ground truth `x†` for the δ1/δ2 metrics.
    pub truth: Option<&'a [f64]>,
    /// Solution `x̂` the Bregman distance is measured against.
    pub bregman_target: Option<&'a [f64]>,
}

/// `A_iᵀ J_e(A_i x − y_i)` with `J_e` the duality map of `residual_space`.
pub fn stochastic_gradient(
    x: &[f64],
    problem: &Problem<'_>,
    i: usize,
    residual_space: &SpaceDescriptor,
) -> Result<Vec<f64>> {
    let a = problem.op.block(i)?;
    let y = problem.obs.block(i)?;
    Error::check_len(a.rows(), y.len())?;
    let mut res = problem.op.apply(i, x)?;
    res.iter_mut().zip(y).for_each(|(r, yi)| *r -= yi);
    let j = residual_space.duality_map(&res);
    problem.op.apply_adjoint(i, &j)
}

/// Gradient of `(1/e)‖Ax − y‖^e` for the stacked operator.
pub fn full_gradient(
    x: &[f64],
    problem: &Problem<'_>,
    residual_space: &SpaceDescriptor,
) -> Result<Vec<f64>> {
    let mut res = problem.op.apply_all(x)?;
    let y = problem.obs.concatenated();
    Error::check_len(res.len(), y.len())?;
    res.iter_mut().zip(&y).for_each(|(r, yi)| *r -= yi);
    let j = residual_space.duality_map(&res);
    let mut grad = vec![0.0; problem.op.input_dim()];
    let mut start = 0;
    for (i, b) in problem.op.blocks().iter().enumerate() {
        problem
            .op
            .add_adjoint_scaled(i, &j[start..start + b.rows()], 1.0, &mut grad)?;
        start += b.rows();
    }
    Ok(grad)
}

fn apply_dual_update(
    state: &mut IterationState,
    grad: &[f64],
    mu: f64,
    x_space: &SpaceDescriptor,
) -> Result<()> {
    Error::check_len(state.dual_x.len(), grad.len())?;
    state
        .dual_x
        .iter_mut()
        .zip(grad)
        .for_each(|(z, g)| *z -= mu * g);
    x_space.inverse_duality_map_into(&state.dual_x, &mut state.x);
    if state.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "iterate became non-finite at step {}",
            state.k + 1
        )));
    }
    state.k += 1;
    Ok(())
}

/// One stochastic step with a block drawn uniformly from the state's generator.
pub fn sgd_step(
    state: &mut IterationState,
    problem: &Problem<'_>,
    cfg: &SolverConfig,
) -> Result<StepInfo> {
    let i = state.rng.random_range(0..problem.op.n_blocks());
    sgd_step_with_index(state, problem, cfg, i)
}

/// One stochastic step on a caller-chosen block; does not touch the generator.
pub fn sgd_step_with_index(
    state: &mut IterationState,
    problem: &Problem<'_>,
    cfg: &SolverConfig,
    i: usize,
) -> Result<StepInfo> {
    let mu = cfg.schedule.step_size(state.k + 1);
    let gradient = stochastic_gradient(&state.x, problem, i, &cfg.y_space)?;
    apply_dual_update(state, &gradient, mu, &cfg.x_space)?;
    Ok(StepInfo {
        index: Some(i),
        step_size: mu,
        gradient,
    })
}

pub fn landweber_step(
    state: &mut IterationState,
    problem: &Problem<'_>,
    cfg: &SolverConfig,
) -> Result<StepInfo> {
    let mu = cfg.schedule.step_size(state.k + 1);
    let gradient = full_gradient(&state.x, problem, &cfg.y_space)?;
    apply_dual_update(state, &gradient, mu, &cfg.x_space)?;
    Ok(StepInfo {
        index: None,
        step_size: mu,
        gradient,
    })
}

/// Dispatches on the configured method.
pub fn step(
    state: &mut IterationState,
    problem: &Problem<'_>,
    cfg: &SolverConfig,
) -> Result<StepInfo> {
    if cfg.is_stochastic() {
        sgd_step(state, problem, cfg)
    } else {
        landweber_step(state, problem, cfg)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub record: ConvergenceRecord,
    pub state: IterationState,
}

/// Steps per epoch: `N_b` for stochastic methods, one for Landweber.
pub fn steps_per_epoch(problem: &Problem<'_>, cfg: &SolverConfig) -> u64 {
    if cfg.is_stochastic() {
        problem.op.n_blocks() as u64
    } else {
        1
    }
}

/// Total steps the stopping rule asks for.
pub fn total_steps(problem: &Problem<'_>, cfg: &SolverConfig) -> Result<u64> {
    match cfg.stopping {
        StoppingRule::MaxEpochs(e) => Ok((e as u64).saturating_mul(steps_per_epoch(problem, cfg))),
        StoppingRule::APriori(rule) => rule.stop_index(),
    }
}

/// Runs from `x₀ = 0` until the stopping rule fires, recording a row at
/// epoch 0, after every full epoch, and after a trailing partial epoch.
pub fn run(
    problem: &Problem<'_>,
    cfg: &SolverConfig,
    reference: Reference<'_>,
) -> Result<RunOutput> {
    cfg.validate()?;
    problem.obs.check_against(problem.op)?;
    let dim = problem.op.input_dim();
    for r in [reference.truth, reference.bregman_target]
        .into_iter()
        .flatten()
    {
        Error::check_len(dim, r.len())?;
    }
    let per_epoch = steps_per_epoch(problem, cfg);
    let total = total_steps(problem, cfg)?;

    let mut state = IterationState::zeros(dim, cfg.seed);
    let mut record = ConvergenceRecord::default();
    record.push(EpochRow::measure(
        0, &state.x, problem, cfg, reference, 0.0,
    )?)?;

    while state.k < total {
        let mu = step(&mut state, problem, cfg)?.step_size;
        if state.k.is_multiple_of(per_epoch) || state.k == total {
            let epoch = state.k.div_ceil(per_epoch);
            record.push(EpochRow::measure(
                epoch, &state.x, problem, cfg, reference, mu,
            )?)?;
        }
    }
    Ok(RunOutput { record, state })
}
