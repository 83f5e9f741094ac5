use serde::{Deserialize, Serialize};

use super::erm::ErmMode;
use super::hyper::{FormulaOptions, HyperParams, Scale};
use crate::diagnostics::Trajectory;
use crate::instances::RademacherSchedule;
use crate::problem::RandomizedHypothesis;
use crate::sampling::LossCoupling;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    HedgeVc,
    HedgeRad,
    Mlmdl,
    Uniform,
    Bilinear,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::HedgeVc => "hedge_vc",
            Algorithm::HedgeRad => "hedge_rad",
            Algorithm::Mlmdl => "mlmdl",
            Algorithm::Uniform => "uniform",
            Algorithm::Bilinear => "bilinear",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            Algorithm::HedgeVc,
            Algorithm::HedgeRad,
            Algorithm::Mlmdl,
            Algorithm::Uniform,
            Algorithm::Bilinear,
        ]
        .into_iter()
        .find(|a| a.as_str() == s)
        .ok_or_else(|| format!("unknown algorithm {s:?}"))
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where the samples of a run went.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleAccounting {
    /// Draws added to the bank by the resampling schedule.
    pub bank: u64,
    /// Fresh draws used for loss-vector estimates, summed from batch sizes.
    pub fresh: u64,
    /// Warm-start bank draws taken before the schedule.
    pub rad_initial: u64,
    pub total: u64,
    /// Final bank size per distribution, warm start included.
    pub bank_per_distribution: Vec<u64>,
    pub fresh_per_distribution: Vec<u64>,
    /// Sample counters of the bank and fresh random streams.
    pub stream_bank: u64,
    pub stream_fresh: u64,
}

impl SampleAccounting {
    /// `total = bank + fresh + rad_initial`, and the stream counters agree.
    pub fn is_consistent(&self) -> bool {
        self.total == self.bank + self.fresh + self.rad_initial
            && self.stream_bank == self.bank + self.rad_initial
            && self.stream_fresh == self.fresh
            && self.bank_per_distribution.iter().sum::<u64>() == self.bank + self.rad_initial
            && self.fresh_per_distribution.iter().sum::<u64>() == self.fresh
    }
}

/// Settings a run was executed with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub k: usize,
    pub num_hypotheses: usize,
    #[serde(rename = "R")]
    pub num_losses: usize,
    pub d: usize,
    pub eps: Option<f64>,
    pub delta: Option<f64>,
    pub scale: Option<Scale>,
    pub budget: Option<u64>,
    pub schedule: Option<RademacherSchedule>,
    pub coupling: LossCoupling,
    pub erm: ErmMode,
    pub formulas: FormulaOptions,
    pub trajectory_stride: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub config: ConfigEcho,
    pub hyper: Option<HyperParams>,
    pub rounds: u64,
    pub final_hypothesis: RandomizedHypothesis,
    pub samples: SampleAccounting,
    pub trigger_count: u64,
    pub trajectory: Option<Trajectory>,
    pub trajectory_norm: Option<f64>,
    /// `(j, |W_j|)` for the nonempty dyadic buckets of the running max.
    pub weight_buckets: Option<Vec<(u32, usize)>>,
    pub worst_case_loss: f64,
    pub opt: f64,
    pub gap: f64,
    pub wallclock_ms: u64,
}
