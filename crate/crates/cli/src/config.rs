//! JSON experiment configuration: strict parsing, preset defaults, and validation.

use std::path::{Path, PathBuf};

use anyhow::Context;
use banach_sgd::operators::RadonGeometry;
use banach_sgd::{Method, NoiseModel, NoiseSpec, SpaceDescriptor, StepSchedule};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Integral,
    Ct,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Sgd,
    Landweber,
    GeneralizedKaczmarz,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleConfig {
    /// `scale / (1 + 0.05 (k/N_b)^{1/p* + 0.01})`; `scale` defaults to `l_max_factor · L_max`.
    PaperExperiment {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scale: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        l_max_factor: Option<f64>,
    },
    Polynomial {
        mu0: f64,
        beta: f64,
    },
    Constant {
        mu0: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseConfig {
    Gaussian {
        sigma: f64,
    },
    Impulse {
        pct: f64,
        #[serde(default = "default_lo")]
        lo: f64,
        #[serde(default = "default_hi")]
        hi: f64,
    },
    SaltPepper {
        pct: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        salt: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pepper: Option<f64>,
    },
}

fn default_lo() -> f64 {
    0.1
}

fn default_hi() -> f64 {
    0.4
}

impl NoiseConfig {
    pub fn model(&self) -> NoiseModel {
        match *self {
            NoiseConfig::Gaussian { sigma } => NoiseModel::Gaussian { sigma },
            NoiseConfig::Impulse { pct, lo, hi } => NoiseModel::Impulse { pct, lo, hi },
            NoiseConfig::SaltPepper { pct, salt, pepper } => {
                NoiseModel::SaltPepper { pct, salt, pepper }
            }
        }
    }
}

/// Where the noise is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseTarget {
    /// Corrupt the measured data `y`.
    #[default]
    Data,
    /// Corrupt the signal before the forward map (pre-measurement noise).
    Signal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StoppingConfig {
    MaxEpochs,
    /// Stop after `⌈δ^{−θp/(1−β)}⌉` steps with the realized noise level δ.
    /// `beta` defaults to the polynomial schedule's decay.
    APriori {
        #[serde(default = "default_theta")]
        theta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta: Option<f64>,
    },
}

fn default_theta() -> f64 {
    0.9
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BregmanReference {
    /// Ground-truth signal.
    Truth,
    /// Minimum-norm solution of the exact-data system.
    MinNorm,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub grid_side: usize,
    pub n_angles: usize,
    pub angle_step: f64,
    pub n_detectors: usize,
    pub pixel_size: f64,
}

impl GeometryConfig {
    pub fn radon(&self) -> RadonGeometry {
        RadonGeometry {
            grid_side: self.grid_side,
            n_angles: self.n_angles,
            angle_step: self.angle_step,
            n_detectors: self.n_detectors,
            pixel_size: self.pixel_size,
        }
    }
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            grid_side: 64,
            n_angles: 60,
            angle_step: 3.0,
            n_detectors: 95,
            pixel_size: 0.1,
        }
    }
}

/// File as written by the user; every field is optional except `preset`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    preset: Option<Preset>,
    method: Option<MethodKind>,
    r_x: Option<f64>,
    p: Option<f64>,
    r_y: Option<f64>,
    q: Option<f64>,
    n: Option<usize>,
    midpoint_columns: Option<bool>,
    geometry: Option<GeometryConfig>,
    matrix: Option<PathBuf>,
    data: Option<PathBuf>,
    truth: Option<PathBuf>,
    n_batches: Option<usize>,
    epochs: Option<usize>,
    seed: Option<u64>,
    seeds: Option<usize>,
    schedule: Option<ScheduleConfig>,
    noise: Option<NoiseConfig>,
    noise_target: Option<NoiseTarget>,
    stopping: Option<StoppingConfig>,
    bregman_reference: Option<BregmanReference>,
    out_dir: Option<PathBuf>,
}

/// Fully resolved experiment, echoed verbatim into the manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub method: MethodKind,
    pub r_x: f64,
    /// Duality power of the solution space.
    pub p: f64,
    pub r_y: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub midpoint_columns: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometryConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<PathBuf>,
    pub n_batches: usize,
    pub epochs: usize,
    pub seed: u64,
    pub seeds: usize,
    pub schedule: ScheduleConfig,
    pub noise: Option<NoiseConfig>,
    pub noise_target: NoiseTarget,
    pub stopping: StoppingConfig,
    pub bregman_reference: BregmanReference,
    pub out_dir: PathBuf,
}

/// Defaults, documented in `--help` and echoed in the manifest:
///
/// * integral: n = 1000, N_b = 100, 250 epochs, X = L^1.1 with p = 1.1, Y = L^2,
///   SGD, step scale L_max, exact data, Bregman distance to the true signal.
/// * ct: 64×64 grid, 60 angles 3° apart, 95 detectors, pixel size 0.1, N_b = 60,
///   100 epochs, generalized Kaczmarz with X = Y = L^1.1, p = 2, q = 1.1,
///   step scale L_max/2, Gaussian noise σ = 0.01.
/// * custom: matrix and data from CSV, N_b = 1, 100 epochs, Hilbert spaces, SGD.
///
/// Every preset: seed 0, one seed, stop after `epochs`, output in `out/`.
pub const DEFAULTS_HELP: &str = "\
Preset defaults:
  integral  n=1000, n_batches=100, epochs=250, r_x=1.1, p=r_x, r_y=2, method=sgd,
            schedule=paper_experiment(scale = 1.0 * L_max), exact data, bregman_reference=truth
  ct        64x64 grid, 60 angles (3 deg apart), 95 detectors, pixel_size=0.1, n_batches=60,
            epochs=100, method=generalized_kaczmarz, r_x=r_y=1.1, p=2, q=1.1,
            schedule=paper_experiment(scale = 0.5 * L_max), gaussian noise sigma=0.01
  custom    matrix/data/truth CSV paths, n_batches=1, epochs=100, r_x=r_y=p=2, method=sgd,
            schedule=paper_experiment(scale = L_max)
  all       seed=0, seeds=1, stopping=max_epochs, noise_target=data, out_dir=out;
            p defaults to r_x (2 for generalized_kaczmarz), q defaults to 1.1 (kaczmarz only),
            a_priori stopping uses theta=0.9 and the polynomial schedule's beta";

/// Reads, applies `overrides` (top-level keys), and validates.
pub fn parse_config(
    path: &Path,
    overrides: &[(String, Value)],
) -> anyhow::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
    from_value(value, overrides).with_context(|| format!("in config {}", path.display()))
}

/// Starts from `{"preset": preset}` plus overrides.
pub fn preset_config(
    preset: Preset,
    overrides: &[(String, Value)],
) -> anyhow::Result<ExperimentConfig> {
    let value = serde_json::json!({ "preset": preset });
    from_value(value, overrides)
}

pub fn from_value(
    mut value: Value,
    overrides: &[(String, Value)],
) -> anyhow::Result<ExperimentConfig> {
    let obj = value
        .as_object_mut()
        .ok_or_else(|| Failure::Validation("config must be a JSON object".into()))?;
    for (k, v) in overrides {
        obj.insert(k.clone(), v.clone());
    }
    let raw: RawConfig =
        serde_json::from_value(value).map_err(|e| Failure::Validation(e.to_string()))?;
    let cfg = resolve(raw)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Parses a `key=value` override; the value is JSON, or a bare string.
pub fn parse_override(s: &str) -> anyhow::Result<(String, Value)> {
    let (k, v) = s.split_once('=').ok_or_else(|| {
        Failure::Validation(format!("override `{s}` is not of the form key=value"))
    })?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.trim().to_string(), value))
}

fn resolve(raw: RawConfig) -> Result<ExperimentConfig, Failure> {
    let preset = raw
        .preset
        .ok_or_else(|| Failure::Validation("missing key `preset`".into()))?;
    let (method, r_x, r_y, n_batches, epochs, schedule_default, noise_default) = match preset {
        Preset::Integral => (
            MethodKind::Sgd,
            1.1,
            2.0,
            100,
            250,
            ScheduleConfig::PaperExperiment {
                scale: None,
                l_max_factor: Some(1.0),
            },
            None,
        ),
        Preset::Ct => (
            MethodKind::GeneralizedKaczmarz,
            1.1,
            1.1,
            60,
            100,
            ScheduleConfig::PaperExperiment {
                scale: None,
                l_max_factor: Some(0.5),
            },
            Some(NoiseConfig::Gaussian { sigma: 0.01 }),
        ),
        Preset::Custom => (
            MethodKind::Sgd,
            2.0,
            2.0,
            1,
            100,
            ScheduleConfig::PaperExperiment {
                scale: None,
                l_max_factor: Some(1.0),
            },
            None,
        ),
    };
    let method = raw.method.unwrap_or(method);
    let r_x = raw.r_x.unwrap_or(r_x);
    let is_gk = method == MethodKind::GeneralizedKaczmarz;
    if raw.q.is_some() && !is_gk {
        return Err(Failure::Validation(
            "`q` is only allowed with method generalized_kaczmarz".into(),
        ));
    }
    let p = raw.p.unwrap_or(if is_gk { 2.0 } else { r_x });
    let q = if is_gk {
        Some(raw.q.unwrap_or(1.1))
    } else {
        None
    };

    let problem_only = |name: &str, present: bool, allowed: Preset| -> Result<(), Failure> {
        if present && preset != allowed {
            return Err(Failure::Validation(format!(
                "`{name}` is not used by preset {preset:?}"
            )));
        }
        Ok(())
    };
    problem_only("n", raw.n.is_some(), Preset::Integral)?;
    problem_only(
        "midpoint_columns",
        raw.midpoint_columns.is_some(),
        Preset::Integral,
    )?;
    problem_only("geometry", raw.geometry.is_some(), Preset::Ct)?;
    problem_only("matrix", raw.matrix.is_some(), Preset::Custom)?;
    problem_only("data", raw.data.is_some(), Preset::Custom)?;
    problem_only("truth", raw.truth.is_some(), Preset::Custom)?;

    let (n, midpoint_columns, geometry) = match preset {
        Preset::Integral => (
            Some(raw.n.unwrap_or(1000)),
            Some(raw.midpoint_columns.unwrap_or(true)),
            None,
        ),
        Preset::Ct => (None, None, Some(raw.geometry.unwrap_or_default())),
        Preset::Custom => {
            if raw.matrix.is_none() || raw.data.is_none() {
                return Err(Failure::Validation(
                    "preset custom needs `matrix` and `data` CSV paths".into(),
                ));
            }
            (None, None, None)
        }
    };
    let default_reference = if preset == Preset::Custom && raw.truth.is_none() {
        BregmanReference::None
    } else {
        BregmanReference::Truth
    };

    Ok(ExperimentConfig {
        preset,
        method,
        r_x,
        p,
        r_y: raw.r_y.unwrap_or(r_y),
        q,
        n,
        midpoint_columns,
        geometry,
        matrix: raw.matrix,
        data: raw.data,
        truth: raw.truth,
        n_batches: raw.n_batches.unwrap_or(n_batches),
        epochs: raw.epochs.unwrap_or(epochs),
        seed: raw.seed.unwrap_or(0),
        seeds: raw.seeds.unwrap_or(1),
        schedule: raw.schedule.unwrap_or(schedule_default),
        noise: if raw.noise.is_some() {
            raw.noise
        } else {
            noise_default
        },
        noise_target: raw.noise_target.unwrap_or_default(),
        stopping: raw.stopping.unwrap_or(StoppingConfig::MaxEpochs),
        bregman_reference: raw.bregman_reference.unwrap_or(default_reference),
        out_dir: raw.out_dir.unwrap_or_else(|| PathBuf::from("out")),
    })
}

impl ExperimentConfig {
    pub fn x_space(&self) -> banach_sgd::Result<SpaceDescriptor> {
        SpaceDescriptor::new(self.r_x, self.p)
    }

    pub fn method(&self) -> Method {
        match self.method {
            MethodKind::Sgd => Method::Sgd,
            MethodKind::Landweber => Method::Landweber,
            MethodKind::GeneralizedKaczmarz => Method::GeneralizedKaczmarz {
                q: self.q.unwrap_or(1.1),
            },
        }
    }

    /// Number of forward-operator rows, when known without reading files.
    pub fn rows(&self) -> Option<usize> {
        match self.preset {
            Preset::Integral => self.n,
            Preset::Ct => self.geometry.map(|g| g.n_angles * g.n_detectors),
            Preset::Custom => None,
        }
    }

    /// Step schedule once `L_max` is known.
    pub fn schedule(&self, l_max: f64) -> StepSchedule {
        match self.schedule {
            ScheduleConfig::PaperExperiment {
                scale,
                l_max_factor,
            } => StepSchedule::PaperExperiment {
                scale: scale.unwrap_or_else(|| l_max_factor.unwrap_or(1.0) * l_max),
                n_batches: self.n_batches,
                p_star: banach_sgd::spaces::conjugate(self.p),
            },
            ScheduleConfig::Polynomial { mu0, beta } => StepSchedule::Polynomial { mu0, beta },
            ScheduleConfig::Constant { mu0 } => StepSchedule::Constant { mu0 },
        }
    }

    pub fn needs_l_max(&self) -> bool {
        matches!(
            self.schedule,
            ScheduleConfig::PaperExperiment { scale: None, .. }
        )
    }

    pub fn validate(&self) -> Result<(), Failure> {
        let v = |e: banach_sgd::Error| Failure::Validation(e.to_string());
        let x_space = self.x_space().map_err(v)?;
        SpaceDescriptor::componentwise(self.r_y).map_err(v)?;
        if let Some(q) = self.q {
            if !(q > 1.0 && q <= 2.0) {
                return Err(Failure::Validation(format!("q = {q} must lie in (1, 2]")));
            }
        }
        if self.epochs == 0 {
            return Err(Failure::Validation("epochs must be ≥ 1".into()));
        }
        if self.seeds == 0 {
            return Err(Failure::Validation("seeds must be ≥ 1".into()));
        }
        if self.n_batches == 0 {
            return Err(Failure::Validation("n_batches must be ≥ 1".into()));
        }
        if let Some(n) = self.n {
            if n < 40 {
                return Err(Failure::Validation(format!(
                    "n = {n} must be ≥ 40 to resolve the test signal"
                )));
            }
        }
        if let Some(g) = &self.geometry {
            g.radon().validate().map_err(v)?;
            if g.grid_side < 16 {
                return Err(Failure::Validation(
                    "grid_side must be ≥ 16 for the disk phantom".into(),
                ));
            }
        }
        if let Some(rows) = self.rows() {
            if rows % self.n_batches != 0 {
                return Err(Failure::Validation(format!(
                    "n_batches = {} must divide the number of rows {rows}",
                    self.n_batches
                )));
            }
        }
        match self.schedule {
            ScheduleConfig::PaperExperiment {
                scale: Some(_),
                l_max_factor: Some(_),
            } => {
                return Err(Failure::Validation(
                    "give either `scale` or `l_max_factor`, not both".into(),
                ));
            }
            ScheduleConfig::PaperExperiment {
                l_max_factor: Some(f),
                ..
            } if !(f.is_finite() && f > 0.0) => {
                return Err(Failure::Validation(format!(
                    "l_max_factor = {f} must be positive"
                )));
            }
            _ => {}
        }
        // L_max only scales the schedule, so 1 stands in for validation.
        self.schedule(1.0)
            .validate(x_space.conjugate_p())
            .map_err(v)?;
        if let Some(noise) = self.noise {
            NoiseSpec::new(noise.model(), 0).map_err(v)?;
        }
        if let StoppingConfig::APriori { theta, beta } = self.stopping {
            let beta = match (beta, self.schedule) {
                (Some(b), _) => b,
                (None, ScheduleConfig::Polynomial { beta, .. }) => beta,
                (None, _) => {
                    return Err(Failure::Validation(
                        "a_priori stopping needs `beta` or a polynomial schedule".into(),
                    ))
                }
            };
            if self.noise.is_none() {
                return Err(Failure::Validation(
                    "a_priori stopping needs a noise model".into(),
                ));
            }
            // δ is only known after corruption; check the remaining parameters with δ = 1.
            banach_sgd::solver::APrioriRule::new(1.0, beta, self.p, theta).map_err(v)?;
        }
        if self.bregman_reference == BregmanReference::Truth
            && self.preset == Preset::Custom
            && self.truth.is_none()
        {
            return Err(Failure::Validation(
                "bregman_reference truth needs a `truth` CSV".into(),
            ));
        }
        Ok(())
    }

    /// `β` used by a-priori stopping.
    pub fn a_priori_beta(&self) -> Option<f64> {
        match (self.stopping, self.schedule) {
            (StoppingConfig::APriori { beta: Some(b), .. }, _) => Some(b),
            (
                StoppingConfig::APriori { beta: None, .. },
                ScheduleConfig::Polynomial { beta, .. },
            ) => Some(beta),
            _ => None,
        }
    }
}
