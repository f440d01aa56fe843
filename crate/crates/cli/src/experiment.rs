//! Problem assembly, seed ensembles, and artifact emission.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use banach_sgd::diagnostics::{min_norm_solution_hilbert, min_norm_solution_landweber};
use banach_sgd::noise::{corrupt, RNG_ALGORITHM};
use banach_sgd::operators::{
    boyd_operator_norm, build_integral_operator, build_radon_operator, exact_sparse_signal,
    partition_rows, partition_vector, sparse_disk_phantom, write_vector_csv,
};
use banach_sgd::solver::{run, APrioriRule, Problem, Reference, SolverConfig, StoppingRule};
use banach_sgd::{BlockOperator, ConvergenceRecord, Matrix, NoiseSpec, ObservationSet};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{BregmanReference, ExperimentConfig, NoiseTarget, Preset, StoppingConfig};
use crate::output::{line_plot_svg, read_vector_csv, write_pgm, MeanTrace, Series};
use crate::Failure;

/// Noise draws use the run seed mixed with this constant, so they are
/// independent of the index sequence that the same seed drives.
pub const NOISE_SEED_SALT: u64 = 0x6e6f_6973_655f_7331;

pub const BOYD_TOL: f64 = 1e-10;
pub const BOYD_MAX_ITER: usize = 5_000;
/// Landweber steps for the minimum-norm reference outside the Hilbert case.
pub const MIN_NORM_STEPS: u64 = 100_000;

/// Forward operator and clean data of one experiment.
#[derive(Debug, Clone)]
pub struct PreparedProblem {
    pub full: Matrix,
    pub truth: Option<Vec<f64>>,
    pub clean_data: Vec<f64>,
    /// Side length when the unknown is a square image.
    pub image_side: Option<usize>,
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

pub fn prepare(cfg: &ExperimentConfig) -> anyhow::Result<PreparedProblem> {
    match cfg.preset {
        Preset::Integral => {
            let n = cfg.n.unwrap_or(1000);
            let full = build_integral_operator(n, cfg.midpoint_columns.unwrap_or(true))?;
            let truth = exact_sparse_signal(n)?;
            let clean_data = full.matvec(&truth)?;
            Ok(PreparedProblem {
                full,
                truth: Some(truth),
                clean_data,
                image_side: None,
            })
        }
        Preset::Ct => {
            let geom = cfg.geometry.unwrap_or_default();
            let full = build_radon_operator(&geom.radon())?;
            let truth = sparse_disk_phantom(geom.grid_side)?;
            let clean_data = full.matvec(&truth)?;
            Ok(PreparedProblem {
                full,
                truth: Some(truth),
                clean_data,
                image_side: Some(geom.grid_side),
            })
        }
        Preset::Custom => {
            let matrix = cfg
                .matrix
                .as_deref()
                .expect("validated: custom preset has a matrix");
            let data = cfg
                .data
                .as_deref()
                .expect("validated: custom preset has data");
            let full = Matrix::read_csv(open(matrix)?)
                .map_err(|e| Failure::Validation(format!("{}: {e}", matrix.display())))?;
            let clean_data = read_vector_csv(open(data)?)
                .with_context(|| format!("reading {}", data.display()))?;
            if clean_data.len() != full.rows() {
                return Err(Failure::Validation(format!(
                    "data has {} entries but the matrix has {} rows",
                    clean_data.len(),
                    full.rows()
                ))
                .into());
            }
            let truth = match cfg.truth.as_deref() {
                Some(p) => {
                    let t = read_vector_csv(open(p)?)
                        .with_context(|| format!("reading {}", p.display()))?;
                    if t.len() != full.cols() {
                        return Err(Failure::Validation(format!(
                            "truth has {} entries but the matrix has {} columns",
                            t.len(),
                            full.cols()
                        ))
                        .into());
                    }
                    Some(t)
                }
                None => None,
            };
            Ok(PreparedProblem {
                full,
                truth,
                clean_data,
                image_side: None,
            })
        }
    }
}

/// `max_j ‖A_j‖_{r_X → r_Y}` by Boyd's power method, blocks in parallel.
pub fn l_max(op: &BlockOperator, r_x: f64, r_y: f64) -> anyhow::Result<f64> {
    let norms: Vec<f64> = op
        .blocks()
        .par_iter()
        .map(|b| boyd_operator_norm(b, r_x, r_y, BOYD_TOL, BOYD_MAX_ITER, 0).map(|e| e.value))
        .collect::<banach_sgd::Result<_>>()?;
    let l = norms.into_iter().fold(0.0, f64::max);
    if l == 0.0 {
        return Err(Failure::Validation("forward operator is zero".into()).into());
    }
    Ok(l)
}

/// Bregman target: the true signal, or the minimum-norm solution of the exact system.
pub fn bregman_target(
    cfg: &ExperimentConfig,
    prepared: &PreparedProblem,
    op: &BlockOperator,
) -> anyhow::Result<Option<Vec<f64>>> {
    match cfg.bregman_reference {
        BregmanReference::None => Ok(None),
        BregmanReference::Truth => Ok(prepared.truth.clone()),
        BregmanReference::MinNorm => {
            if cfg.r_x == 2.0 {
                return Ok(Some(min_norm_solution_hilbert(
                    &prepared.full,
                    &prepared.clean_data,
                    1e-10,
                )?));
            }
            let l2 =
                boyd_operator_norm(&prepared.full, 2.0, 2.0, BOYD_TOL, BOYD_MAX_ITER, 0)?.value;
            let obs = ObservationSet::exact(&prepared.clean_data, op.n_blocks())?;
            let x = min_norm_solution_landweber(
                op,
                &obs,
                cfg.r_x,
                cfg.r_y,
                1.0 / (l2 * l2),
                MIN_NORM_STEPS,
            )?;
            Ok(Some(x))
        }
    }
}

/// Result of one seed.
#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub seed: u64,
    /// Realized noise level `‖y^δ − y‖_{r_Y}`.
    pub delta: f64,
    pub steps: u64,
    pub record: ConvergenceRecord,
    pub x: Vec<f64>,
}

/// Noisy data for `seed`, partitioned like the operator, with its realized noise level.
pub fn observe(
    cfg: &ExperimentConfig,
    prepared: &PreparedProblem,
    seed: u64,
) -> anyhow::Result<ObservationSet> {
    let Some(noise) = cfg.noise else {
        return Ok(ObservationSet::exact(&prepared.clean_data, cfg.n_batches)?);
    };
    let spec = NoiseSpec::new(noise.model(), seed ^ NOISE_SEED_SALT)?;
    let (data, delta) = match cfg.noise_target {
        NoiseTarget::Data => {
            let c = corrupt(&prepared.clean_data, &spec, cfg.r_y)?;
            (c.data, c.delta)
        }
        NoiseTarget::Signal => {
            let truth = prepared
                .truth
                .as_ref()
                .ok_or_else(|| Failure::Validation("signal noise needs a true signal".into()))?;
            let c = corrupt(truth, &spec, cfg.r_x)?;
            let data = prepared.full.matvec(&c.data)?;
            let diff: Vec<f64> = data
                .iter()
                .zip(&prepared.clean_data)
                .map(|(a, b)| a - b)
                .collect();
            (data, banach_sgd::spaces::lr_norm(&diff, cfg.r_y)?)
        }
    };
    Ok(ObservationSet::new(
        partition_vector(&data, cfg.n_batches)?,
        delta,
    )?)
}

pub fn solver_config(
    cfg: &ExperimentConfig,
    l_max: f64,
    delta: f64,
    seed: u64,
) -> anyhow::Result<SolverConfig> {
    let stopping = match cfg.stopping {
        StoppingConfig::MaxEpochs => StoppingRule::MaxEpochs(cfg.epochs),
        StoppingConfig::APriori { theta, .. } => {
            if delta == 0.0 {
                return Err(Failure::Validation(
                    "a_priori stopping needs noisy data (realized δ = 0)".into(),
                )
                .into());
            }
            let beta = cfg
                .a_priori_beta()
                .expect("validated: a-priori rule has a decay");
            StoppingRule::APriori(APrioriRule::new(delta, beta, cfg.p, theta)?)
        }
    };
    Ok(SolverConfig::new(
        cfg.method(),
        cfg.x_space()?,
        cfg.r_y,
        cfg.schedule(l_max),
        stopping,
        seed,
    )?)
}

pub fn run_seed(
    cfg: &ExperimentConfig,
    prepared: &PreparedProblem,
    op: &BlockOperator,
    l_max: f64,
    target: Option<&[f64]>,
    seed: u64,
) -> anyhow::Result<SeedOutcome> {
    let obs = observe(cfg, prepared, seed)?;
    let solver = solver_config(cfg, l_max, obs.noise_level(), seed)?;
    let problem = Problem::new(op, &obs)?;
    let reference = Reference {
        truth: prepared.truth.as_deref(),
        bregman_target: target,
    };
    let out = run(&problem, &solver, reference)
        .map_err(|e| Failure::Invariant(format!("seed {seed}: {e}")))?;
    Ok(SeedOutcome {
        seed,
        delta: obs.noise_level(),
        steps: out.state.k,
        record: out.record,
        x: out.state.x,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub realized_delta: f64,
    pub steps: u64,
    pub final_objective: f64,
    pub final_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_bregman: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_delta1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_delta2: Option<f64>,
}

impl SeedSummary {
    fn new(o: &SeedOutcome) -> Self {
        let last = o.record.last().expect("a record always holds epoch 0");
        Self {
            seed: o.seed,
            realized_delta: o.delta,
            steps: o.steps,
            final_objective: last.objective,
            final_residual: last.residual,
            final_bregman: last.bregman,
            final_delta1: last.delta1,
            final_delta2: last.delta2,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub library_version: &'static str,
    pub rng_algorithm: &'static str,
    pub noise_seed_rule: String,
    pub config: ExperimentConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_max: Option<f64>,
    pub seeds: Vec<SeedSummary>,
    pub files: Vec<String>,
    /// Seconds since the Unix epoch; the only non-reproducible field.
    pub created_unix: u64,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
}

/// Runs every seed on a pool of `jobs` workers and writes all artifacts from this thread.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> anyhow::Result<ExperimentReport> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .context("starting the worker pool")?;

    let prepared = prepare(cfg)?;
    let op = partition_rows(&prepared.full, cfg.n_batches)
        .map_err(|e| Failure::Validation(e.to_string()))?;
    let (l, target) = pool.install(|| -> anyhow::Result<_> {
        let l = if cfg.needs_l_max() {
            Some(l_max(&op, cfg.r_x, cfg.r_y)?)
        } else {
            None
        };
        Ok((l, bregman_target(cfg, &prepared, &op)?))
    })?;
    let seeds: Vec<u64> = (0..cfg.seeds as u64).map(|i| cfg.seed + i).collect();
    let outcomes: Vec<SeedOutcome> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&s| run_seed(cfg, &prepared, &op, l.unwrap_or(1.0), target.as_deref(), s))
            .collect::<anyhow::Result<_>>()
    })?;
    write_artifacts(cfg, &prepared, l, &outcomes)
}

fn create(dir: &Path, name: &str, files: &mut Vec<String>) -> anyhow::Result<BufWriter<File>> {
    let path = dir.join(name);
    files.push(name.to_string());
    Ok(BufWriter::new(
        File::create(&path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_artifacts(
    cfg: &ExperimentConfig,
    prepared: &PreparedProblem,
    l_max: Option<f64>,
    outcomes: &[SeedOutcome],
) -> anyhow::Result<ExperimentReport> {
    let dir = &cfg.out_dir;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut files = Vec::new();

    for o in outcomes {
        let mut w = create(dir, &format!("trace_seed_{}.csv", o.seed), &mut files)?;
        o.record.write_csv(&mut w)?;
        w.flush()?;
    }
    let records: Vec<&ConvergenceRecord> = outcomes.iter().map(|o| &o.record).collect();
    let mean = MeanTrace::from_records(&records)?;
    let mut w = create(dir, "mean.csv", &mut files)?;
    mean.write_csv(&mut w)?;
    w.flush()?;

    let first = &outcomes[0];
    let mut w = create(dir, "reconstruction.csv", &mut files)?;
    write_vector_csv(&first.x, &mut w)?;
    w.flush()?;
    if let Some(side) = prepared.image_side {
        let mut w = create(dir, "reconstruction.pgm", &mut files)?;
        write_pgm(&first.x, side, &mut w)?;
        w.flush()?;
    }

    let epochs: Vec<f64> = mean.epochs.iter().map(|&e| e as f64).collect();
    let series: Vec<Series<'_>> = ["objective", "bregman"]
        .into_iter()
        .filter_map(|name| {
            mean.column(name).map(|c| Series {
                name,
                points: epochs.iter().copied().zip(c.mean.iter().copied()).collect(),
            })
        })
        .collect();
    let title = format!(
        "{:?} preset, mean over {} seed(s)",
        cfg.preset,
        outcomes.len()
    );
    let mut w = create(dir, "convergence.svg", &mut files)?;
    w.write_all(line_plot_svg(&title, "epoch", &series).as_bytes())?;
    w.flush()?;

    files.push("manifest.json".into());
    let manifest = Manifest {
        tool: "banach-sgd",
        library_version: banach_sgd::VERSION,
        rng_algorithm: RNG_ALGORITHM,
        noise_seed_rule: format!("seed XOR {NOISE_SEED_SALT:#x}"),
        config: cfg.clone(),
        l_max,
        seeds: outcomes.iter().map(SeedSummary::new).collect(),
        files,
        created_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    let path = dir.join("manifest.json");
    let mut w = BufWriter::new(
        File::create(&path).with_context(|| format!("creating {}", path.display()))?,
    );
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(ExperimentReport {
        out_dir: dir.clone(),
        manifest,
    })
}
