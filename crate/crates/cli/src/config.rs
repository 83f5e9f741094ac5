use std::path::{Path, PathBuf};

use mdl_core::instances::{
    make_hard_instance, make_heterogeneous_instance, make_random_multiloss_instance, RademacherSchedule,
};
use mdl_core::learners::{Algorithm, RunOptions, Scale};
use mdl_core::problem::Instance;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// One experiment: an instance, an algorithm and its parameters, the seeds,
/// and optionally a grid of overrides swept as a Cartesian product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub instance: InstanceSpec,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub scale: Scale,
    pub seeds: SeedSpec,
    /// Complexity schedule of `hedge_rad`; defaults to the VC form at the instance's d.
    #[serde(default)]
    pub schedule: Option<ScheduleSpec>,
    /// Total sample budget of `uniform`.
    #[serde(default)]
    pub budget: Option<u64>,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub options: RunOptions,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub grid: Option<Grid>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InstanceSpec {
    File(PathBuf),
    Inline(Instance),
    Generator(GeneratorSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    Random {
        k: usize,
        #[serde(rename = "H")]
        h: usize,
        #[serde(default)]
        d: Option<usize>,
        #[serde(rename = "R", default = "one")]
        r: usize,
        eps_gap: f64,
        seed: u64,
    },
    Hard {
        d: usize,
        k: usize,
        eps: f64,
    },
    Heterogeneous {
        k: usize,
        #[serde(rename = "H")]
        h: usize,
        base_mean: f64,
        resolution: f64,
        seed: u64,
    },
}

fn one() -> usize {
    1
}

impl GeneratorSpec {
    pub fn build(&self) -> mdl_core::Result<Instance> {
        match *self {
            GeneratorSpec::Random {
                k,
                h,
                d,
                r,
                eps_gap,
                seed,
            } => make_random_multiloss_instance(k, h, r, d, eps_gap, seed),
            GeneratorSpec::Hard { d, k, eps } => make_hard_instance(d, k, eps).map(|hard| hard.instance),
            GeneratorSpec::Heterogeneous {
                k,
                h,
                base_mean,
                resolution,
                seed,
            } => make_heterogeneous_instance(k, h, base_mean, resolution, seed),
        }
    }

    fn set_k(&mut self, value: usize) {
        match self {
            GeneratorSpec::Random { k, .. }
            | GeneratorSpec::Hard { k, .. }
            | GeneratorSpec::Heterogeneous { k, .. } => *k = value,
        }
    }

    fn set_d(&mut self, value: usize) -> CliResult<()> {
        match self {
            GeneratorSpec::Random { d, .. } => *d = Some(value),
            GeneratorSpec::Hard { d, .. } => *d = value,
            GeneratorSpec::Heterogeneous { .. } => {
                return Err(CliError::Config(
                    "the heterogeneous generator has no d parameter".into(),
                ))
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    List(Vec<u64>),
    Count {
        count: u64,
        #[serde(default)]
        base: u64,
    },
}

impl SeedSpec {
    pub fn seeds(&self) -> Vec<u64> {
        match self {
            SeedSpec::List(v) => v.clone(),
            SeedSpec::Count { count, base } => (0..*count).map(|t| base + t).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    Vc {
        #[serde(default)]
        d: Option<usize>,
    },
    Massart {
        #[serde(rename = "H", default)]
        h: Option<f64>,
    },
    Table {
        points: Vec<(u64, f64)>,
    },
}

impl ScheduleSpec {
    pub fn resolve(&self, inst: &Instance) -> mdl_core::Result<RademacherSchedule> {
        match self {
            ScheduleSpec::Vc { d } => RademacherSchedule::vc(d.unwrap_or(inst.vc_dim())),
            ScheduleSpec::Massart { h } => RademacherSchedule::massart(h.unwrap_or(inst.num_hypotheses() as f64)),
            ScheduleSpec::Table { points } => RademacherSchedule::table(points.clone()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Results table; written to stdout when unset.
    #[serde(default)]
    pub csv: Option<PathBuf>,
    /// Directory receiving one JSON report per trial.
    #[serde(default)]
    pub reports_dir: Option<PathBuf>,
    /// Long-format table of the dyadic weight buckets of every trial.
    #[serde(default)]
    pub buckets_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(default)]
    pub algorithm: Option<Vec<Algorithm>>,
    #[serde(default)]
    pub k: Option<Vec<usize>>,
    #[serde(default)]
    pub d: Option<Vec<usize>>,
    #[serde(default)]
    pub eps: Option<Vec<f64>>,
}

/// A fully resolved grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub algorithm: Algorithm,
    pub instance: InstanceSpec,
    pub eps: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: Self =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let InstanceSpec::File(p) = &mut cfg.instance {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return bad(format!(
                "unsupported schema_version {} (expected {CONFIG_SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.seeds.seeds().is_empty() {
            return bad("seeds must be nonempty".into());
        }
        self.scale.validate().map_err(CliError::from_setup)?;
        if self.options.trajectory_stride == 0 {
            return bad("options.trajectory_stride must be at least 1".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1".into());
        }
        if let Some(g) = &self.grid {
            for (name, empty) in [
                ("algorithm", g.algorithm.as_ref().is_some_and(Vec::is_empty)),
                ("k", g.k.as_ref().is_some_and(Vec::is_empty)),
                ("d", g.d.as_ref().is_some_and(Vec::is_empty)),
                ("eps", g.eps.as_ref().is_some_and(Vec::is_empty)),
            ] {
                if empty {
                    return bad(format!("grid axis {name} is empty"));
                }
            }
            if (g.k.is_some() || g.d.is_some()) && !matches!(self.instance, InstanceSpec::Generator(_)) {
                return bad("grid axes k and d need a generated instance".into());
            }
        }
        for cell in self.cells()? {
            let needs_eps = !matches!(cell.algorithm, Algorithm::Uniform);
            if needs_eps && cell.eps.is_none() {
                return bad(format!("algorithm {} needs eps", cell.algorithm));
            }
            let needs_delta = matches!(
                cell.algorithm,
                Algorithm::HedgeVc | Algorithm::HedgeRad | Algorithm::Mlmdl
            );
            if needs_delta && self.delta.is_none() {
                return bad(format!("algorithm {} needs delta", cell.algorithm));
            }
            if cell.algorithm == Algorithm::Uniform && self.budget.is_none() {
                return bad("algorithm uniform needs budget".into());
            }
        }
        Ok(())
    }

    /// Grid cells in row-major order over (algorithm, k, d, eps).
    pub fn cells(&self) -> CliResult<Vec<Cell>> {
        let g = self.grid.clone().unwrap_or_default();
        let algorithms = g.algorithm.unwrap_or_else(|| vec![self.algorithm]);
        let ks: Vec<Option<usize>> = g.k.map_or(vec![None], |v| v.into_iter().map(Some).collect());
        let ds: Vec<Option<usize>> = g.d.map_or(vec![None], |v| v.into_iter().map(Some).collect());
        let epss: Vec<Option<f64>> = g.eps.map_or(vec![self.eps], |v| v.into_iter().map(Some).collect());
        let mut cells = Vec::new();
        for &algorithm in &algorithms {
            for &k in &ks {
                for &d in &ds {
                    for &eps in &epss {
                        let mut instance = self.instance.clone();
                        if let InstanceSpec::Generator(gen) = &mut instance {
                            if let Some(k) = k {
                                gen.set_k(k);
                            }
                            if let Some(d) = d {
                                gen.set_d(d)?;
                            }
                        }
                        cells.push(Cell {
                            index: cells.len(),
                            algorithm,
                            instance,
                            eps,
                        });
                    }
                }
            }
        }
        Ok(cells)
    }
}

impl InstanceSpec {
    pub fn load(&self) -> CliResult<Instance> {
        match self {
            InstanceSpec::File(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("cannot read instance {}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("instance {}: {e}", path.display())))
            }
            InstanceSpec::Inline(inst) => Ok(inst.clone()),
            InstanceSpec::Generator(gen) => gen.build().map_err(CliError::from_setup),
        }
    }
}
