use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;

use mdl_core::instances::RademacherSchedule;
use mdl_core::json::to_canonical_string_pretty;
use mdl_core::learners::{
    instance_opt, run_bilinear, run_mdl_hedge_rad, run_mdl_hedge_vc, run_mlmdl_hedge, run_uniform_baseline, Algorithm,
    RunOptions, RunReport,
};
use mdl_core::problem::Instance;
use mdl_core::MdlError;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Cell, ExperimentConfig, ScheduleSpec};
use crate::error::{CliError, CliResult};

pub const CSV_SCHEMA_VERSION: u32 = 1;

/// One results row. Field order is the CSV header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub schema_version: u32,
    pub trial: u64,
    pub seed: u64,
    pub algo: Algorithm,
    pub k: usize,
    pub d: usize,
    #[serde(rename = "R")]
    pub r: usize,
    pub eps: Option<f64>,
    pub delta: Option<f64>,
    pub scale_eta: f64,
    #[serde(rename = "scale_T")]
    pub scale_t: f64,
    #[serde(rename = "scale_T1")]
    pub scale_t1: f64,
    pub rounds: u64,
    /// Every bank draw, warm start included.
    pub samples_bank: u64,
    pub samples_fresh: u64,
    pub samples_total: u64,
    pub gap: f64,
    pub traj_norm: Option<f64>,
    pub trigger_count: u64,
    pub wallclock_ms: u64,
}

pub const CSV_HEADER: &str = "schema_version,trial,seed,algo,k,d,R,eps,delta,scale_eta,scale_T,scale_T1,rounds,samples_bank,samples_fresh,samples_total,gap,traj_norm,trigger_count,wallclock_ms";

impl CsvRow {
    pub fn from_report(report: &RunReport, trial: u64, cfg: &ExperimentConfig) -> Self {
        let c = &report.config;
        let scale = c.scale.unwrap_or(cfg.scale);
        Self {
            schema_version: CSV_SCHEMA_VERSION,
            trial,
            seed: report.seed,
            algo: report.algorithm,
            k: c.k,
            d: c.d,
            r: c.num_losses,
            eps: c.eps,
            delta: c.delta,
            scale_eta: scale.eta,
            scale_t: scale.rounds,
            scale_t1: scale.t1,
            rounds: report.rounds,
            samples_bank: report.samples.bank + report.samples.rad_initial,
            samples_fresh: report.samples.fresh,
            samples_total: report.samples.total,
            gap: report.gap,
            traj_norm: report.trajectory_norm,
            trigger_count: report.trigger_count,
            wallclock_ms: report.wallclock_ms,
        }
    }

    /// The row as CSV text without the trailing newline.
    pub fn to_line(&self) -> CliResult<String> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.serialize(self)?;
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes)
            .expect("csv output is utf-8")
            .trim_end()
            .to_string())
    }
}

#[derive(Debug, Clone, Serialize)]
struct BucketRow {
    cell: usize,
    trial: u64,
    seed: u64,
    algo: Algorithm,
    k: usize,
    d: usize,
    eps: Option<f64>,
    bucket_j: u32,
    bucket_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialFailure {
    pub cell: usize,
    pub trial: u64,
    pub seed: u64,
    pub algo: Algorithm,
    pub error: String,
    /// The failure stems from parameters rather than execution.
    #[serde(skip)]
    pub configuration: bool,
}

/// Rows written (in order) and the trials that failed.
#[derive(Debug, Clone, Default)]
pub struct SweepOutcome {
    pub rows: Vec<CsvRow>,
    pub failures: Vec<TrialFailure>,
}

/// A cell with its instance loaded and everything shared across seeds resolved.
#[derive(Debug, Clone)]
pub struct PreparedCell {
    pub cell: Cell,
    pub instance: Instance,
    pub schedule: Option<RademacherSchedule>,
    pub options: RunOptions,
}

pub fn prepare_cell(cfg: &ExperimentConfig, cell: Cell) -> CliResult<PreparedCell> {
    let instance = cell.instance.load()?;
    let schedule = match cell.algorithm {
        Algorithm::HedgeRad => Some(
            cfg.schedule
                .clone()
                .unwrap_or(ScheduleSpec::Vc { d: None })
                .resolve(&instance)
                .map_err(CliError::from_setup)?,
        ),
        _ => None,
    };
    let mut options = cfg.options.clone();
    if options.known_opt.is_none() {
        options.known_opt = Some(instance_opt(&instance, options.opt_tol)?);
    }
    Ok(PreparedCell {
        cell,
        instance,
        schedule,
        options,
    })
}

pub fn run_trial(cfg: &ExperimentConfig, p: &PreparedCell, seed: u64) -> mdl_core::Result<RunReport> {
    let inst = &p.instance;
    let opts = &p.options;
    let eps = p.cell.eps.unwrap_or(f64::NAN);
    let delta = cfg.delta.unwrap_or(f64::NAN);
    match p.cell.algorithm {
        Algorithm::HedgeVc => run_mdl_hedge_vc(inst, eps, delta, cfg.scale, seed, opts),
        Algorithm::HedgeRad => {
            let schedule = p.schedule.as_ref().expect("schedule resolved for hedge_rad");
            run_mdl_hedge_rad(inst, eps, delta, schedule, cfg.scale, seed, opts)
        }
        Algorithm::Mlmdl => run_mlmdl_hedge(inst, eps, delta, cfg.scale, seed, opts),
        Algorithm::Uniform => run_uniform_baseline(inst, cfg.budget.unwrap_or(0), seed, opts),
        Algorithm::Bilinear => run_bilinear(inst, eps, opts).map(|mut r| {
            r.seed = seed;
            r
        }),
    }
}

fn report_file(dir: &Path, cell: usize, algo: Algorithm, trial: u64, seed: u64) -> PathBuf {
    dir.join(format!("cell{cell:03}_{algo}_trial{trial:04}_seed{seed}.json"))
}

fn failures_path(csv: &Path) -> PathBuf {
    csv.with_extension("failures.csv")
}

struct Sinks {
    csv: csv::Writer<Box<dyn Write>>,
    buckets: Option<csv::Writer<BufWriter<File>>>,
    reports_dir: Option<PathBuf>,
}

impl Sinks {
    fn open(cfg: &ExperimentConfig) -> CliResult<Self> {
        let out: Box<dyn Write> = match &cfg.output.csv {
            Some(path) => {
                create_parent(path)?;
                Box::new(BufWriter::new(File::create(path)?))
            }
            None => Box::new(io::stdout()),
        };
        let mut csv = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        csv.write_record(CSV_HEADER.split(','))?;
        csv.flush()?;
        let buckets = match &cfg.output.buckets_csv {
            Some(path) => {
                create_parent(path)?;
                Some(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
            }
            None => None,
        };
        if let Some(dir) = &cfg.output.reports_dir {
            fs::create_dir_all(dir)?;
        }
        Ok(Self {
            csv,
            buckets,
            reports_dir: cfg.output.reports_dir.clone(),
        })
    }

    /// Writes the report file first; the CSV row only after it succeeded.
    fn write(&mut self, cell: usize, trial: u64, report: &RunReport, row: &CsvRow) -> CliResult<()> {
        if let Some(dir) = &self.reports_dir {
            let text = to_canonical_string_pretty(report)?;
            let path = report_file(dir, cell, report.algorithm, trial, report.seed);
            let tmp = path.with_extension("json.tmp");
            fs::write(&tmp, text + "\n")?;
            fs::rename(&tmp, &path)?;
        }
        self.csv.serialize(row)?;
        self.csv.flush()?;
        if let (Some(w), Some(buckets)) = (&mut self.buckets, &report.weight_buckets) {
            for &(j, count) in buckets {
                w.serialize(BucketRow {
                    cell,
                    trial,
                    seed: report.seed,
                    algo: report.algorithm,
                    k: row.k,
                    d: row.d,
                    eps: row.eps,
                    bucket_j: j,
                    bucket_count: count,
                })?;
            }
            w.flush()?;
        }
        Ok(())
    }
}

fn create_parent(path: &Path) -> io::Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir),
        _ => Ok(()),
    }
}

/// Worker count: explicit request, then the config, then all cores.
pub fn resolve_threads(requested: Option<usize>, cfg: &ExperimentConfig) -> usize {
    requested
        .or(cfg.threads)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1)
}

/// Runs every (cell, seed) trial of the configuration.
///
/// Trials execute on a pool of `threads` workers; results are handed back to
/// this thread and written in (cell, trial) order as soon as the next one in
/// order is available, so the outputs are identical for any worker count and
/// an interrupted run leaves complete rows only.
pub fn sweep(cfg: &ExperimentConfig, threads: usize) -> CliResult<SweepOutcome> {
    cfg.validate()?;
    let prepared = cfg
        .cells()?
        .into_iter()
        .map(|cell| prepare_cell(cfg, cell))
        .collect::<CliResult<Vec<_>>>()?;
    let seeds = cfg.seeds.seeds();
    let jobs: Vec<(usize, u64, u64)> = (0..prepared.len())
        .flat_map(|c| seeds.iter().enumerate().map(move |(t, &s)| (c, t as u64, s)))
        .collect();
    let mut sinks = Sinks::open(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {threads} workers: {e}")))?;

    let mut outcome = SweepOutcome::default();
    let (tx, rx) = mpsc::channel::<(usize, mdl_core::Result<RunReport>)>();
    let write_result = std::thread::scope(|scope| -> CliResult<()> {
        let jobs = &jobs;
        let prepared = &prepared;
        scope.spawn(move || {
            pool.install(|| {
                jobs.par_iter()
                    .enumerate()
                    .for_each_with(tx, |tx, (idx, &(c, _, seed))| {
                        let _ = tx.send((idx, run_trial(cfg, &prepared[c], seed)));
                    });
            });
        });
        let mut pending = BTreeMap::new();
        let mut next = 0;
        for (idx, result) in rx {
            pending.insert(idx, result);
            while let Some(result) = pending.remove(&next) {
                let (c, trial, seed) = jobs[next];
                let algo = prepared[c].cell.algorithm;
                let written = result.map_err(CliError::Run).and_then(|report| {
                    let row = CsvRow::from_report(&report, trial, cfg);
                    sinks.write(c, trial, &report, &row)?;
                    Ok(row)
                });
                match written {
                    Ok(row) => outcome.rows.push(row),
                    Err(CliError::Run(e)) => {
                        let configuration = matches!(e, MdlError::Configuration(_) | MdlError::Validation(_));
                        eprintln!("cell {c} trial {trial} (seed {seed}, {algo}) failed: {e}");
                        outcome.failures.push(TrialFailure {
                            cell: c,
                            trial,
                            seed,
                            algo,
                            error: e.to_string(),
                            configuration,
                        });
                    }
                    Err(other) => return Err(other),
                }
                next += 1;
            }
        }
        Ok(())
    });
    write_result?;
    if let (Some(csv), false) = (&cfg.output.csv, outcome.failures.is_empty()) {
        let mut w = csv::Writer::from_path(failures_path(csv))?;
        for f in &outcome.failures {
            w.serialize(f)?;
        }
        w.flush()?;
    }
    Ok(outcome)
}

/// [`sweep`] followed by the exit-status policy: any failed trial is an
/// error, a configuration error when all failures are parameter problems.
pub fn run_experiment(cfg: &ExperimentConfig, threads: usize) -> CliResult<SweepOutcome> {
    let outcome = sweep(cfg, threads)?;
    if outcome.failures.is_empty() {
        return Ok(outcome);
    }
    if outcome.failures.iter().all(|f| f.configuration) {
        return Err(CliError::Config(format!(
            "{} trials rejected their parameters; first: {}",
            outcome.failures.len(),
            outcome.failures[0].error
        )));
    }
    Err(CliError::TrialsFailed {
        failed: outcome.failures.len(),
        total: outcome.failures.len() + outcome.rows.len(),
    })
}
