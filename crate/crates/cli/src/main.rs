use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mdl_cli::config::{ExperimentConfig, SeedSpec};
use mdl_cli::harness::{resolve_threads, run_experiment};
use mdl_cli::summarize::{read_rows, summarize_rows, write_summary};
use mdl_cli::{CliError, CliResult};
use mdl_core::game::{solve_matrix_game, DEFAULT_GAME_TOL};
use mdl_core::instances::{make_hard_instance, make_heterogeneous_instance, make_random_multiloss_instance};
use mdl_core::json::to_canonical_string_pretty;
use mdl_core::learners::Algorithm;
use mdl_core::problem::Instance;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "mdl", version, about = "Multi-distribution learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of a configuration.
    Run(RunArgs),
    /// Run the Cartesian grid of a configuration.
    Sweep(RunArgs),
    /// Generate an instance file.
    #[command(subcommand)]
    Instance(InstanceCommand),
    /// Solve the minimax game of an instance and print value and strategies.
    SolveOpt {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = DEFAULT_GAME_TOL)]
        tol: f64,
    },
    /// Aggregate a results table.
    #[command(subcommand)]
    Report(ReportCommand),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Worker count (default: all cores).
    #[arg(long, env = "MDL_THREADS")]
    threads: Option<usize>,
    #[arg(long)]
    algorithm: Option<Algorithm>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Run seeds `seed_base .. seed_base + seeds`.
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long, default_value_t = 0, requires = "seeds")]
    seed_base: u64,
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    reports_dir: Option<PathBuf>,
    #[arg(long)]
    buckets_csv: Option<PathBuf>,
    #[arg(long)]
    trajectory_stride: Option<u64>,
    /// Write 0 in the wallclock column so reruns are byte-identical.
    #[arg(long)]
    no_wallclock: bool,
}

impl RunArgs {
    fn load(&self) -> CliResult<ExperimentConfig> {
        let mut cfg = ExperimentConfig::from_path(&self.config)?;
        if let Some(a) = self.algorithm {
            cfg.algorithm = a;
        }
        cfg.eps = self.eps.or(cfg.eps);
        cfg.delta = self.delta.or(cfg.delta);
        cfg.budget = self.budget.or(cfg.budget);
        if let Some(count) = self.seeds {
            cfg.seeds = SeedSpec::Count {
                count,
                base: self.seed_base,
            };
        }
        if let Some(p) = &self.csv {
            cfg.output.csv = Some(p.clone());
        }
        if let Some(p) = &self.reports_dir {
            cfg.output.reports_dir = Some(p.clone());
        }
        if let Some(p) = &self.buckets_csv {
            cfg.output.buckets_csv = Some(p.clone());
        }
        if let Some(s) = self.trajectory_stride {
            cfg.options.trajectory_stride = s;
        }
        if self.no_wallclock {
            cfg.options.record_wallclock = false;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
#[allow(clippy::enum_variant_names)] // subcommands are `make-random`, `make-hard`, ...
enum InstanceCommand {
    /// Random Bernoulli-style instance with a planted near-minimax hypothesis.
    MakeRandom {
        #[arg(long)]
        k: usize,
        #[arg(long = "H")]
        h: usize,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long = "R", default_value_t = 1)]
        r: usize,
        #[arg(long, default_value_t = 0.05)]
        eps_gap: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lower-bound instance with 2^d hypotheses.
    MakeHard {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One hard distribution and k - 1 trivial ones.
    MakeHeterogeneous {
        #[arg(long)]
        k: usize,
        #[arg(long = "H")]
        h: usize,
        #[arg(long, default_value_t = 0.5)]
        base_mean: f64,
        #[arg(long)]
        resolution: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ReportCommand {
    /// Mean and quantiles of gap and sample counts per configuration.
    Summarize {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(text: &str, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, format!("{text}\n"))?,
        None => writeln!(io::stdout(), "{text}")?,
    }
    Ok(())
}

fn emit_instance(inst: mdl_core::Result<Instance>, out: Option<&Path>) -> CliResult<()> {
    let inst = inst.map_err(CliError::from_setup)?;
    emit(&to_canonical_string_pretty(&inst)?, out)
}

#[derive(Serialize)]
struct OptOutput {
    value: f64,
    gap: f64,
    iterations: u64,
    pi_star: Vec<(String, f64)>,
    w_star: Vec<f64>,
}

fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run(args) | Command::Sweep(args) => {
            let cfg = args.load()?;
            let threads = resolve_threads(args.threads, &cfg);
            let outcome = run_experiment(&cfg, threads)?;
            eprintln!("{} trials written", outcome.rows.len());
            Ok(())
        }
        Command::Instance(cmd) => match cmd {
            InstanceCommand::MakeRandom {
                k,
                h,
                d,
                r,
                eps_gap,
                seed,
                out,
            } => emit_instance(
                make_random_multiloss_instance(k, h, r, d, eps_gap, seed),
                out.as_deref(),
            ),
            InstanceCommand::MakeHard { d, k, eps, out } => {
                emit_instance(make_hard_instance(d, k, eps).map(|h| h.instance), out.as_deref())
            }
            InstanceCommand::MakeHeterogeneous {
                k,
                h,
                base_mean,
                resolution,
                seed,
                out,
            } => emit_instance(
                make_heterogeneous_instance(k, h, base_mean, resolution, seed),
                out.as_deref(),
            ),
        },
        Command::SolveOpt { instance, tol } => {
            let text = std::fs::read_to_string(&instance)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", instance.display())))?;
            let inst: Instance =
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", instance.display())))?;
            let sol = solve_matrix_game(&inst.objective_matrix(), tol)?;
            let pi_star = inst
                .hypotheses()
                .iter()
                .cloned()
                .zip(sol.pi_star.iter().copied())
                .filter(|(_, p)| *p > 0.0)
                .collect();
            let out = OptOutput {
                value: sol.value,
                gap: sol.gap,
                iterations: sol.iterations,
                pi_star,
                w_star: sol.w_star,
            };
            emit(&to_canonical_string_pretty(&out)?, None)
        }
        Command::Report(ReportCommand::Summarize { csv, out }) => {
            let rows = read_rows(File::open(&csv)?)?;
            let summary = summarize_rows(&rows);
            match out {
                Some(path) => write_summary(&summary, File::create(path)?),
                None => write_summary(&summary, io::stdout()),
            }
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
