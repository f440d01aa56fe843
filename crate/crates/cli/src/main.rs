use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use banach_sgd::operators::boyd_operator_norm_multistart;
use banach_sgd::Matrix;
use banach_sgd_cli::config::{self, ExperimentConfig, Preset, DEFAULTS_HELP};
use banach_sgd_cli::experiment::{run_experiment, BOYD_MAX_ITER, BOYD_TOL};
use banach_sgd_cli::{exit_code, Failure};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

/// Stochastic gradient descent for linear inverse problems in l^r spaces.
#[derive(Parser)]
#[command(name = "banach-sgd", version, after_help = DEFAULTS_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config file.
    #[command(after_help = DEFAULTS_HELP)]
    Solve {
        config: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
        /// Extra `key=value` settings applied on top of the file (value parsed as JSON).
        overrides: Vec<String>,
    },
    /// Run a built-in preset.
    #[command(after_help = DEFAULTS_HELP)]
    Experiment {
        preset: PresetArg,
        /// `key=value` settings applied on top of the preset (value parsed as JSON).
        overrides: Vec<String>,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Estimate ‖A‖ from l^rx to l^ry with Boyd's power method.
    NormEstimate {
        matrix: PathBuf,
        #[arg(long)]
        rx: f64,
        #[arg(long)]
        ry: f64,
        #[arg(long, default_value_t = BOYD_TOL)]
        tol: f64,
        #[arg(long, default_value_t = BOYD_MAX_ITER)]
        max_iter: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Independent start vectors; the largest result is kept.
        #[arg(long, default_value_t = 8)]
        starts: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Integral,
    Ct,
}

#[derive(Args)]
struct RunFlags {
    /// First seed of the ensemble.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of consecutive seeds.
    #[arg(long)]
    seeds: Option<usize>,
    /// Worker threads for the seed ensemble.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
}

impl RunFlags {
    fn overrides(&self, extra: &[String]) -> anyhow::Result<Vec<(String, Value)>> {
        let mut out: Vec<(String, Value)> = extra
            .iter()
            .map(|s| config::parse_override(s))
            .collect::<anyhow::Result<_>>()?;
        if let Some(s) = self.seed {
            out.push(("seed".into(), s.into()));
        }
        if let Some(s) = self.seeds {
            out.push(("seeds".into(), s.into()));
        }
        if let Some(e) = self.epochs {
            out.push(("epochs".into(), e.into()));
        }
        if let Some(d) = &self.out_dir {
            out.push(("out_dir".into(), d.to_string_lossy().into_owned().into()));
        }
        Ok(out)
    }
}

fn execute(cfg: &ExperimentConfig, jobs: usize) -> anyhow::Result<()> {
    if jobs == 0 {
        return Err(Failure::Validation("--jobs must be ≥ 1".into()).into());
    }
    let report = run_experiment(cfg, jobs)?;
    for s in &report.manifest.seeds {
        print!(
            "seed {}: steps {} objective {:.6e} residual {:.6e}",
            s.seed, s.steps, s.final_objective, s.final_residual
        );
        if let Some(b) = s.final_bregman {
            print!(" bregman {b:.6e}");
        }
        if let (Some(d1), Some(d2)) = (s.final_delta1, s.final_delta2) {
            print!(" delta1 {d1:.4} delta2 {d2:.4}");
        }
        println!(" (noise level {:.4e})", s.realized_delta);
    }
    println!(
        "wrote {} files to {}",
        report.manifest.files.len(),
        report.out_dir.display()
    );
    Ok(())
}

fn main_inner(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Solve {
            config: path,
            flags,
            overrides,
        } => {
            let cfg = config::parse_config(&path, &flags.overrides(&overrides)?)?;
            execute(&cfg, flags.jobs)
        }
        Command::Experiment {
            preset,
            overrides,
            flags,
        } => {
            let preset = match preset {
                PresetArg::Integral => Preset::Integral,
                PresetArg::Ct => Preset::Ct,
            };
            let cfg = config::preset_config(preset, &flags.overrides(&overrides)?)?;
            execute(&cfg, flags.jobs)
        }
        Command::NormEstimate {
            matrix,
            rx,
            ry,
            tol,
            max_iter,
            seed,
            starts,
        } => {
            let file =
                File::open(&matrix).with_context(|| format!("opening {}", matrix.display()))?;
            let a = Matrix::read_csv(BufReader::new(file))
                .map_err(|e| Failure::Validation(format!("{}: {e}", matrix.display())))?;
            let est = boyd_operator_norm_multistart(&a, rx, ry, tol, max_iter, seed, starts)
                .map_err(|e| Failure::Validation(e.to_string()))?;
            println!("norm {:.10}", est.value);
            println!("iterations {}", est.iterations);
            println!("converged {}", est.converged);
            if !est.converged {
                eprintln!("warning: best start did not converge within {max_iter} iterations; the value is a lower bound");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    // clap's own usage-error code (2) would collide with the invariant code
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(banach_sgd_cli::EXIT_VALIDATION as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
