use serde::{Deserialize, Serialize};

use crate::error::{validation, MdlError, Result};
use crate::instances::RademacherSchedule;
use crate::sampling::ceil_count;

/// Multipliers `(c_eta, c_T, c_T1)` applied to the step size, the number of
/// rounds and the bank size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scale {
    pub eta: f64,
    #[serde(rename = "T")]
    pub rounds: f64,
    #[serde(rename = "T1")]
    pub t1: f64,
}

impl Default for Scale {
    fn default() -> Self {
        Self {
            eta: 1.0,
            rounds: 1.0,
            t1: 1.0,
        }
    }
}

impl Scale {
    pub fn new(eta: f64, rounds: f64, t1: f64) -> Result<Self> {
        let s = Self { eta, rounds, t1 };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("eta", self.eta), ("T", self.rounds), ("T1", self.t1)] {
            if !(v > 0.0 && v.is_finite()) {
                return validation(format!("scale multiplier for {name} must be positive, got {v}"));
            }
        }
        Ok(())
    }
}

/// Which expression sets the number of rounds of the single-loss learners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundsFormula {
    /// `20000 log(k / delta) / eps^2`.
    #[default]
    Algorithm,
    /// `20000 log(k / (delta eps)) / eps^2`.
    Proof,
}

/// Knobs that change how the formulas are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FormulaOptions {
    pub rounds_formula: RoundsFormula,
    /// Base of every logarithm in the formulas; natural log when unset.
    pub log_base: Option<f64>,
}

impl FormulaOptions {
    fn log(&self, x: f64) -> f64 {
        match self.log_base {
            Some(b) => x.ln() / b.ln(),
            None => x.ln(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self.log_base {
            Some(b) if !(b > 1.0 && b.is_finite()) => validation(format!("log base must be finite and > 1, got {b}")),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub eta: f64,
    #[serde(rename = "T")]
    pub rounds: u64,
    pub eps1: f64,
    #[serde(rename = "T1")]
    pub t1: u64,
    pub scale: Scale,
}

/// Largest round count or bank size a formula may produce.
pub const MAX_COUNT: f64 = 9.0e15;

fn to_count(x: f64, what: &str) -> Result<u64> {
    if !(x.is_finite() && x <= MAX_COUNT) {
        return Err(MdlError::Configuration(format!("{what} = {x:e} is too large to run")));
    }
    Ok(ceil_count(x.max(0.0)).max(1))
}

fn check_common(eps: f64, delta: f64, k: usize, scale: &Scale, opts: &FormulaOptions) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return validation(format!("eps must lie in (0, 1), got {eps}"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return validation(format!("delta must lie in (0, 1), got {delta}"));
    }
    if k == 0 {
        return validation("k must be at least 1");
    }
    scale.validate()?;
    opts.validate()
}

fn single_loss_rounds(eps: f64, delta: f64, k: usize, scale: &Scale, opts: &FormulaOptions) -> Result<u64> {
    let arg = match opts.rounds_formula {
        RoundsFormula::Algorithm => k as f64 / delta,
        RoundsFormula::Proof => k as f64 / (delta * eps),
    };
    to_count(scale.rounds * 20000.0 * opts.log(arg) / (eps * eps), "T")
}

/// Step size, rounds and bank size of the VC-class learner.
pub fn paper_hyperparams(eps: f64, delta: f64, k: usize, d: usize, scale: Scale) -> Result<HyperParams> {
    paper_hyperparams_with(eps, delta, k, d, scale, &FormulaOptions::default())
}

pub fn paper_hyperparams_with(
    eps: f64,
    delta: f64,
    k: usize,
    d: usize,
    scale: Scale,
    opts: &FormulaOptions,
) -> Result<HyperParams> {
    check_common(eps, delta, k, &scale, opts)?;
    if d == 0 {
        return validation("d must be at least 1");
    }
    let eps1 = eps / 100.0;
    let (kf, df) = (k as f64, d as f64);
    let inner = kf * opts.log(kf / eps1) + df * opts.log(kf * df / eps1) + opts.log(1.0 / delta);
    Ok(HyperParams {
        eta: scale.eta * eps / 100.0,
        rounds: single_loss_rounds(eps, delta, k, &scale, opts)?,
        eps1,
        t1: to_count(scale.t1 * 4000.0 * inner / (eps1 * eps1), "T1")?,
        scale,
    })
}

/// Hyper-parameters of the multi-loss learner over `k` distributions and `r`
/// losses.
pub fn multiloss_hyperparams(
    eps: f64,
    delta: f64,
    k: usize,
    d: usize,
    r: usize,
    scale: Scale,
    opts: &FormulaOptions,
) -> Result<HyperParams> {
    check_common(eps, delta, k, &scale, opts)?;
    if d == 0 || r == 0 {
        return validation("d and R must be at least 1");
    }
    let eps1 = eps / 100.0;
    let (kf, df, rf) = (k as f64, d as f64, r as f64);
    let inner = kf * opts.log(kf * rf / eps1) + df * opts.log(kf * df / eps1) + opts.log(1.0 / delta);
    Ok(HyperParams {
        eta: scale.eta * eps / 100.0,
        rounds: to_count(
            scale.rounds * 20000.0 * opts.log(kf * rf / (delta * eps)) / (eps * eps),
            "T",
        )?,
        eps1,
        t1: to_count(scale.t1 * 40000.0 * inner / (eps1 * eps1), "T1")?,
        scale,
    })
}

/// Default search cap for the Rademacher bank size.
pub const RAD_T1_CAP: u64 = 1_000_000_000_000;

/// `4000 (k log(k/eps1) + log(1/delta)) / eps1^2`, the smallest admissible
/// Rademacher bank size before the complexity constraint.
pub fn rad_t1_floor(eps1: f64, delta: f64, k: usize, opts: &FormulaOptions) -> f64 {
    let kf = k as f64;
    4000.0 * (kf * opts.log(kf / eps1) + opts.log(1.0 / delta)) / (eps1 * eps1)
}

/// Hyper-parameters of the Rademacher learner: as the VC learner, except the
/// bank size is the first `t >= floor` with `C_t <= eps1 / 4800`, times `c_T1`.
pub fn rad_hyperparams(
    eps: f64,
    delta: f64,
    k: usize,
    schedule: &RademacherSchedule,
    scale: Scale,
    opts: &FormulaOptions,
    cap: u64,
) -> Result<HyperParams> {
    check_common(eps, delta, k, &scale, opts)?;
    let eps1 = eps / 100.0;
    let floor = to_count(rad_t1_floor(eps1, delta, k, opts), "T1 floor")?;
    let threshold = eps1 / 4800.0;
    let t = schedule.first_at_most(threshold, floor, cap).ok_or_else(|| {
        MdlError::Configuration(format!(
            "{} schedule stays above eps1/4800 = {threshold:e} up to n = {cap} (C_cap = {:e})",
            schedule.form(),
            schedule.value(cap as f64)
        ))
    })?;
    Ok(HyperParams {
        eta: scale.eta * eps / 100.0,
        rounds: single_loss_rounds(eps, delta, k, &scale, opts)?,
        eps1,
        t1: to_count(scale.t1 * t as f64, "T1")?,
        scale,
    })
}
