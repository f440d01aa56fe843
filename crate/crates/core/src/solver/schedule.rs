use crate::error::{Error, Result};

/// Step-size rule `k ↦ μ_k`, with `k ≥ 1` the global iteration count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    /// `μ0 · k^{−β}`.
    Polynomial {
        mu0: f64,
        beta: f64,
    },
    /// `scale / (1 + 0.05 (k / N_b)^{1/p* + 0.01})`; `scale` is typically a multiple of `L_max`.
    PaperExperiment {
        scale: f64,
        n_batches: usize,
        p_star: f64,
    },
    Constant {
        mu0: f64,
    },
}

impl StepSchedule {
    /// Checks parameter ranges; `p_star` is the conjugate of the solution-space power.
    pub fn validate(&self, p_star: f64) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "{name} = {v} must be positive and finite"
                )))
            }
        };
        match *self {
            StepSchedule::Polynomial { mu0, beta } => {
                positive("mu0", mu0)?;
                if !(beta > 1.0 / p_star && beta <= 1.0) {
                    return Err(Error::Config(format!(
                        "polynomial decay β = {beta} must satisfy 1/p* = {} < β ≤ 1",
                        1.0 / p_star
                    )));
                }
            }
            StepSchedule::PaperExperiment {
                scale,
                n_batches,
                p_star: ps,
            } => {
                positive("scale", scale)?;
                if n_batches == 0 {
                    return Err(Error::Config("schedule batch count must be ≥ 1".into()));
                }
                if !(ps.is_finite() && ps > 1.0) {
                    return Err(Error::Config(format!(
                        "schedule exponent p* = {ps} must exceed 1"
                    )));
                }
            }
            StepSchedule::Constant { mu0 } => positive("mu0", mu0)?,
        }
        Ok(())
    }

    pub fn step_size(&self, k: u64) -> f64 {
        let k = k.max(1) as f64;
        match *self {
            StepSchedule::Polynomial { mu0, beta } => mu0 * k.powf(-beta),
            StepSchedule::PaperExperiment {
                scale,
                n_batches,
                p_star,
            } => {
                let e = 1.0 / p_star + 0.01;
                scale / (1.0 + 0.05 * (k / n_batches as f64).powf(e))
            }
            StepSchedule::Constant { mu0 } => mu0,
        }
    }
}

/// A-priori stopping index `k(δ) = ⌈δ^{−θ p / (1 − β)}⌉`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct APrioriRule {
    pub delta: f64,
    pub beta: f64,
    pub p: f64,
    /// Safety exponent in (0, 1); values near 1 approach the boundary scaling.
    pub theta: f64,
}

impl APrioriRule {
    pub fn new(delta: f64, beta: f64, p: f64, theta: f64) -> Result<Self> {
        let rule = Self {
            delta,
            beta,
            p,
            theta,
        };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::Config(format!(
                "noise level δ = {} must be positive",
                self.delta
            )));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::Config(format!(
                "safety θ = {} must lie in (0, 1)",
                self.theta
            )));
        }
        if !(self.p.is_finite() && self.p > 1.0) {
            return Err(Error::Config(format!("power p = {} must exceed 1", self.p)));
        }
        if self.beta >= 1.0 {
            return Err(Error::Config(
                "a-priori stopping is undefined for β = 1; use a fixed epoch budget".into(),
            ));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::Config(format!(
                "decay β = {} must lie in (0, 1)",
                self.beta
            )));
        }
        Ok(())
    }

    /// Saturates at `u64::MAX` for astronomically small δ.
    pub fn stop_index(&self) -> Result<u64> {
        self.validate()?;
        let exponent = self.theta * self.p / (1.0 - self.beta);
        let k = (-exponent * self.delta.ln()).exp().ceil();
        Ok(if k >= u64::MAX as f64 {
            u64::MAX
        } else {
            (k as u64).max(1)
        })
    }
}

pub fn a_priori_stop_index(rule: &APrioriRule) -> Result<u64> {
    rule.stop_index()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StoppingRule {
    /// Fixed number of epochs (`N_b` stochastic steps, or one Landweber step, each).
    MaxEpochs(usize),
    APriori(APrioriRule),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_examples() {
        let poly = StepSchedule::Polynomial {
            mu0: 1.0,
            beta: 1.0,
        };
        assert_eq!(poly.step_size(4), 0.25);
        let paper = StepSchedule::PaperExperiment {
            scale: 1.0,
            n_batches: 1,
            p_star: 2.0,
        };
        assert!((paper.step_size(1) - 1.0 / 1.05).abs() < 1e-15);
        assert!((paper.step_size(1) - 0.952_381).abs() < 1e-6);
        let c = StepSchedule::Constant { mu0: 0.3 };
        assert_eq!(c.step_size(1), 0.3);
        assert_eq!(c.step_size(10_000), 0.3);
    }

    #[test]
    fn schedule_validation() {
        // p* = 2 requires β > 1/2
        assert!(StepSchedule::Polynomial {
            mu0: 1.0,
            beta: 0.5
        }
        .validate(2.0)
        .is_err());
        assert!(StepSchedule::Polynomial {
            mu0: 1.0,
            beta: 0.75
        }
        .validate(2.0)
        .is_ok());
        assert!(StepSchedule::Polynomial {
            mu0: 1.0,
            beta: 1.5
        }
        .validate(2.0)
        .is_err());
        assert!(StepSchedule::Constant { mu0: 0.0 }.validate(2.0).is_err());
        assert!(StepSchedule::PaperExperiment {
            scale: 1.0,
            n_batches: 0,
            p_star: 2.0
        }
        .validate(2.0)
        .is_err());
    }

    #[test]
    fn paper_schedule_is_decreasing_and_positive() {
        let s = StepSchedule::PaperExperiment {
            scale: 0.9,
            n_batches: 20,
            p_star: 3.0,
        };
        let mut prev = f64::INFINITY;
        for k in 1..5000 {
            let mu = s.step_size(k);
            assert!(mu > 0.0 && mu <= prev);
            prev = mu;
        }
    }

    #[test]
    fn a_priori_examples() {
        let rule = APrioriRule::new(0.1, 0.5, 2.0, 0.5).unwrap();
        assert_eq!(rule.stop_index().unwrap(), 100);
        assert!(APrioriRule::new(0.1, 1.0, 2.0, 0.5).is_err());
        assert!(APrioriRule::new(0.0, 0.5, 2.0, 0.5).is_err());
        assert!(APrioriRule::new(0.1, 0.5, 2.0, 1.0).is_err());

        let mut prev = 0;
        for delta in [0.5, 0.1, 0.05, 0.01, 0.001] {
            let k = APrioriRule::new(delta, 0.75, 1.5, 0.9)
                .unwrap()
                .stop_index()
                .unwrap();
            assert!(k > prev);
            prev = k;
        }
    }

    #[test]
    fn a_priori_boundary_scaling() {
        // θ → 1⁻ approaches δ^{−p/(1−β)}
        let boundary = 0.1f64.powf(-2.0 / 0.5);
        let k = APrioriRule::new(0.1, 0.5, 2.0, 1.0 - 1e-12)
            .unwrap()
            .stop_index()
            .unwrap() as f64;
        assert!((k - boundary).abs() <= 1.0);
    }
}
