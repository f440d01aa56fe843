//! Seeded data corruption: additive Gaussian, random-valued impulse, and salt-and-pepper noise.
//!
//! All draws come from `ChaCha8Rng` (`rand_chacha`) seeded with the spec's
//! 64-bit seed, so integer draws are bit-reproducible across platforms.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::spaces::lr_norm;

/// Name of the generator recorded in experiment manifests.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.9)";

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    /// i.i.d. `N(0, σ²)` added to every entry.
    Gaussian { sigma: f64 },
    /// Each entry is corrupted with probability `pct`, split evenly between
    /// `(1 − ξ) y` and `1.4 ξ + (1 − ξ) y`, with `ξ ~ U(lo, hi)` drawn per entry.
    Impulse { pct: f64, lo: f64, hi: f64 },
    /// A fraction `pct` of entries, chosen without replacement, is set to
    /// `salt` or `pepper` with equal probability. `None` means `max(y)` and `0`.
    SaltPepper {
        pct: f64,
        salt: Option<f64>,
        pepper: Option<f64>,
    },
}

impl NoiseModel {
    /// Impulse model with the default amplitude range `(0.1, 0.4)`.
    pub fn impulse(pct: f64) -> Self {
        NoiseModel::Impulse {
            pct,
            lo: 0.1,
            hi: 0.4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub model: NoiseModel,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(model: NoiseModel, seed: u64) -> Result<Self> {
        let spec = Self { model, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let check_pct = |pct: f64| {
            if (0.0..=1.0).contains(&pct) {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "corruption fraction {pct} outside [0, 1]"
                )))
            }
        };
        match self.model {
            NoiseModel::Gaussian { sigma } => {
                if !(sigma.is_finite() && sigma >= 0.0) {
                    return Err(Error::Config(format!(
                        "standard deviation {sigma} must be ≥ 0"
                    )));
                }
            }
            NoiseModel::Impulse { pct, lo, hi } => {
                check_pct(pct)?;
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::Config(format!(
                        "impulse range ({lo}, {hi}) needs lo < hi"
                    )));
                }
            }
            NoiseModel::SaltPepper { pct, salt, pepper } => {
                check_pct(pct)?;
                if salt.is_some_and(|v| !v.is_finite()) || pepper.is_some_and(|v| !v.is_finite()) {
                    return Err(Error::Config(
                        "salt and pepper values must be finite".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Which branch of the impulse model an entry fell into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImpulseBranch {
    Unchanged,
    Low,
    High,
}

/// Value of a single entry under a given impulse branch and amplitude `ξ`.
pub fn impulse_value(y: f64, branch: ImpulseBranch, xi: f64) -> f64 {
    match branch {
        ImpulseBranch::Unchanged => y,
        ImpulseBranch::Low => (1.0 - xi) * y,
        ImpulseBranch::High => 1.4 * xi + (1.0 - xi) * y,
    }
}

/// Corrupted data and its realized noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct Corrupted {
    pub data: Vec<f64>,
    /// `‖y^δ − y‖_{r_Y}` of the perturbation actually applied.
    pub delta: f64,
}

/// Applies `spec` to `y` and measures the perturbation in the `ℓ^{r_y}` norm.
pub fn corrupt(y: &[f64], spec: &NoiseSpec, r_y: f64) -> Result<Corrupted> {
    spec.validate()?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "clean data contains non-finite entries".into(),
        ));
    }
    let mut rng = rng_from_seed(spec.seed);
    let mut data = y.to_vec();
    match spec.model {
        NoiseModel::Gaussian { sigma } => {
            if sigma > 0.0 {
                for v in &mut data {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *v += sigma * z;
                }
            }
        }
        NoiseModel::Impulse { pct, lo, hi } => {
            for v in &mut data {
                let u: f64 = rng.random();
                let branch = if u < 0.5 * pct {
                    ImpulseBranch::Low
                } else if u < pct {
                    ImpulseBranch::High
                } else {
                    continue;
                };
                let xi = rng.random_range(lo..hi);
                *v = impulse_value(*v, branch, xi);
            }
        }
        NoiseModel::SaltPepper { pct, salt, pepper } => {
            let salt = salt.unwrap_or_else(|| y.iter().copied().fold(f64::NEG_INFINITY, f64::max));
            let pepper = pepper.unwrap_or(0.0);
            let count = (pct * y.len() as f64).round() as usize;
            if count > 0 {
                for i in sample(&mut rng, y.len(), count.min(y.len())).into_iter() {
                    data[i] = if rng.random::<bool>() { salt } else { pepper };
                }
            }
        }
    }
    let diff: Vec<f64> = data.iter().zip(y).map(|(a, b)| a - b).collect();
    let delta = lr_norm(&diff, r_y)?;
    Ok(Corrupted { data, delta })
}

/// Gaussian perturbation rescaled to have `ℓ^{r_y}` norm exactly `delta`.
pub fn scaled_gaussian_perturbation(
    len: usize,
    delta: f64,
    r_y: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "noise level {delta} must be ≥ 0"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut e: Vec<f64> = (0..len).map(|_| StandardNormal.sample(&mut rng)).collect();
    let n = lr_norm(&e, r_y)?;
    if n > 0.0 {
        e.iter_mut().for_each(|v| *v *= delta / n);
    }
    Ok(e)
}
