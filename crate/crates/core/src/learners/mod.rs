//! Algorithm drivers: Hedge over the distributions against an ERM best
//! response on a reusable, lazily grown sample bank.

mod erm;
mod hyper;
mod report;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use erm::{accumulate_objective, empirical_objective, erm, select, ErmMode};
pub use hyper::{
    multiloss_hyperparams, paper_hyperparams, paper_hyperparams_with, rad_hyperparams, rad_t1_floor, FormulaOptions,
    HyperParams, RoundsFormula, Scale, MAX_COUNT, RAD_T1_CAP,
};
pub use report::{Algorithm, ConfigEcho, RunReport, SampleAccounting, REPORT_SCHEMA_VERSION};

use crate::diagnostics::{trajectory_norm, weight_buckets, Trajectory};
use crate::error::{validation, MdlError, Result};
use crate::game::{run_bilinear_hedge, solve_matrix_game, HedgeWeights, DEFAULT_GAME_TOL};
use crate::instances::RademacherSchedule;
use crate::problem::{exact_worst_case_loss, Instance, RandomizedHypothesis};
use crate::sampling::{
    batch_size, estimate_loss_vector, grow_bank, rad_effective_counts, rad_initial_draws, LossCoupling, Purpose,
    SampleBank, SamplerState, WeightSnapshots,
};

/// Settings shared by all drivers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunOptions {
    pub coupling: LossCoupling,
    pub erm: ErmMode,
    pub formulas: FormulaOptions,
    /// Store every `trajectory_stride`-th weight vector.
    pub trajectory_stride: u64,
    /// Keep the trajectory in the report.
    pub keep_trajectory: bool,
    /// Precomputed minimax value; solved from the instance when unset.
    pub known_opt: Option<f64>,
    pub opt_tol: f64,
    pub rad_t1_cap: u64,
    /// Record elapsed time; when off the report carries 0.
    pub record_wallclock: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            coupling: LossCoupling::Independent,
            erm: ErmMode::Exact,
            formulas: FormulaOptions::default(),
            trajectory_stride: 1,
            keep_trajectory: true,
            known_opt: None,
            opt_tol: DEFAULT_GAME_TOL,
            rad_t1_cap: RAD_T1_CAP,
            record_wallclock: true,
        }
    }
}

/// Minimax value of the instance (max over all distribution/loss columns).
pub fn instance_opt(inst: &Instance, tol: f64) -> Result<f64> {
    Ok(solve_matrix_game(&inst.objective_matrix(), tol)?.value)
}

fn resolve_opt(inst: &Instance, opts: &RunOptions) -> Result<f64> {
    match opts.known_opt {
        Some(v) => Ok(v),
        None => instance_opt(inst, opts.opt_tol),
    }
}

fn echo(inst: &Instance, opts: &RunOptions) -> ConfigEcho {
    ConfigEcho {
        k: inst.k(),
        num_hypotheses: inst.num_hypotheses(),
        num_losses: inst.num_losses(),
        d: inst.vc_dim(),
        eps: None,
        delta: None,
        scale: None,
        budget: None,
        schedule: None,
        coupling: opts.coupling,
        erm: opts.erm,
        formulas: opts.formulas,
        trajectory_stride: opts.trajectory_stride,
    }
}

fn elapsed_ms(start: Instant, opts: &RunOptions) -> u64 {
    if opts.record_wallclock {
        start.elapsed().as_millis() as u64
    } else {
        0
    }
}

/// Weight of each distribution: `sum_l u_{i,l}` with `u` laid out as `i * R + l`.
fn marginals(u: &[f64], k: usize, r: usize) -> Vec<f64> {
    (0..k).map(|i| u[i * r..(i + 1) * r].iter().sum()).collect()
}

fn picks_to_hypothesis(picks: &[u64], rounds: u64) -> Result<RandomizedHypothesis> {
    let (support, weights) = picks
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(h, &c)| (h, c as f64 / rounds as f64))
        .unzip();
    RandomizedHypothesis::new(support, weights)
}

enum Variant {
    Vc,
    Rad,
    MultiLoss,
}

struct Outcome {
    rounds: u64,
    picks: Vec<u64>,
    trigger_count: u64,
    trajectory: Trajectory,
    samples: SampleAccounting,
}

fn hedge_loop(inst: &Instance, hp: &HyperParams, variant: Variant, seed: u64, opts: &RunOptions) -> Result<Outcome> {
    let k = inst.k();
    let r = inst.num_losses();
    let mut sampler = SamplerState::new(seed, k);
    let mut bank = SampleBank::new(inst, opts.coupling);
    let mut rad_initial = 0;
    if let Variant::Rad = variant {
        let n0 = rad_initial_draws(k);
        for i in 0..k {
            bank.append_initial(i, n0, &mut sampler)?;
        }
        rad_initial = n0 * k as u64;
    }
    let mut hedge = HedgeWeights::uniform(k * r, hp.eta)?;
    let mut snaps = WeightSnapshots::new(k);
    let mut trajectory = Trajectory::new(k, opts.trajectory_stride)?;
    let mut picks = vec![0u64; inst.num_hypotheses()];
    let mut fresh_per_distribution = vec![0u64; k];
    let mut trigger_count = 0;
    let mut objective = vec![0.0; inst.num_hypotheses()];

    for _ in 0..hp.rounds {
        let u = hedge.normalize();
        let w = marginals(&u, k, r);
        trajectory.push(&w)?;
        if snaps.observe(&w) {
            grow_bank(&mut bank, &snaps.w_hat, hp.t1, &mut sampler)?;
            trigger_count += 1;
        }
        let h = match variant {
            Variant::Rad => {
                objective.iter_mut().for_each(|o| *o = 0.0);
                let prefix = rad_effective_counts(&w, hp.t1, k);
                for (i, &m) in prefix.iter().enumerate() {
                    let m = m.min(bank.count(i));
                    let sums = bank.prefix_column_sums(i, m, &mut sampler)?;
                    accumulate_objective(&mut objective, sums, &u[i * r..(i + 1) * r], m, i)?;
                }
                select(&objective, opts.erm)?
            }
            Variant::Vc | Variant::MultiLoss => erm(&bank, inst, &u, opts.erm)?,
        };
        picks[h] += 1;
        snaps.update_running_max(&w);
        for (f, &wb) in fresh_per_distribution.iter_mut().zip(&snaps.w_bar) {
            *f += batch_size(k, wb);
        }
        let r_hat = estimate_loss_vector(inst, h, &snaps.w_bar, &mut sampler, opts.coupling)?;
        hedge.step_in_place(&r_hat)?;
    }

    let bank_per_distribution = bank.counts();
    let fresh: u64 = fresh_per_distribution.iter().sum();
    let bank_draws = bank_per_distribution.iter().sum::<u64>() - rad_initial;
    let samples = SampleAccounting {
        bank: bank_draws,
        fresh,
        rad_initial,
        total: bank_draws + fresh + rad_initial,
        bank_per_distribution,
        fresh_per_distribution,
        stream_bank: sampler.total_draws(Purpose::Bank),
        stream_fresh: sampler.total_draws(Purpose::Fresh),
    };
    if !samples.is_consistent() {
        return Err(MdlError::Invariant(format!("sample accounting mismatch: {samples:?}")));
    }
    Ok(Outcome {
        rounds: hp.rounds,
        picks,
        trigger_count,
        trajectory,
        samples,
    })
}

#[allow(clippy::too_many_arguments)]
fn finish(
    inst: &Instance,
    algorithm: Algorithm,
    seed: u64,
    config: ConfigEcho,
    hyper: Option<HyperParams>,
    out: Outcome,
    opts: &RunOptions,
    start: Instant,
) -> Result<RunReport> {
    let final_hypothesis = picks_to_hypothesis(&out.picks, out.rounds)?;
    let worst_case_loss = exact_worst_case_loss(inst, &final_hypothesis)?;
    let opt = resolve_opt(inst, opts)?;
    let norm = trajectory_norm(&out.trajectory)?;
    let buckets = weight_buckets(&out.trajectory)?.sizes();
    Ok(RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        algorithm,
        seed,
        config,
        hyper,
        rounds: out.rounds,
        final_hypothesis,
        samples: out.samples,
        trigger_count: out.trigger_count,
        trajectory: opts.keep_trajectory.then_some(out.trajectory),
        trajectory_norm: Some(norm),
        weight_buckets: Some(buckets),
        worst_case_loss,
        opt,
        gap: worst_case_loss - opt,
        wallclock_ms: elapsed_ms(start, opts),
    })
}

/// Hedge with the doubling-triggered bank on a single-loss instance.
pub fn run_mdl_hedge_vc(
    inst: &Instance,
    eps: f64,
    delta: f64,
    scale: Scale,
    seed: u64,
    opts: &RunOptions,
) -> Result<RunReport> {
    let start = Instant::now();
    if inst.num_losses() != 1 {
        return validation(format!(
            "single-loss learner needs R = 1, got R = {}",
            inst.num_losses()
        ));
    }
    let hp = paper_hyperparams_with(eps, delta, inst.k(), inst.vc_dim(), scale, &opts.formulas)?;
    let out = hedge_loop(inst, &hp, Variant::Vc, seed, opts)?;
    let config = ConfigEcho {
        eps: Some(eps),
        delta: Some(delta),
        scale: Some(scale),
        ..echo(inst, opts)
    };
    finish(inst, Algorithm::HedgeVc, seed, config, Some(hp), out, opts, start)
}

/// Rademacher variant: warm-start draws, a bank size set by the complexity
/// schedule, and ERM restricted to a weight-dependent prefix of the bank.
pub fn run_mdl_hedge_rad(
    inst: &Instance,
    eps: f64,
    delta: f64,
    schedule: &RademacherSchedule,
    scale: Scale,
    seed: u64,
    opts: &RunOptions,
) -> Result<RunReport> {
    let start = Instant::now();
    if inst.num_losses() != 1 {
        return validation(format!(
            "single-loss learner needs R = 1, got R = {}",
            inst.num_losses()
        ));
    }
    let hp = rad_hyperparams(eps, delta, inst.k(), schedule, scale, &opts.formulas, opts.rad_t1_cap)?;
    let out = hedge_loop(inst, &hp, Variant::Rad, seed, opts)?;
    let config = ConfigEcho {
        eps: Some(eps),
        delta: Some(delta),
        scale: Some(scale),
        schedule: Some(schedule.clone()),
        ..echo(inst, opts)
    };
    finish(inst, Algorithm::HedgeRad, seed, config, Some(hp), out, opts, start)
}

/// Hedge over (distribution, loss) pairs for an instance with `R >= 2` losses.
pub fn run_mlmdl_hedge(
    inst: &Instance,
    eps: f64,
    delta: f64,
    scale: Scale,
    seed: u64,
    opts: &RunOptions,
) -> Result<RunReport> {
    let start = Instant::now();
    if inst.num_losses() < 2 {
        return validation("multi-loss learner needs R >= 2; use the single-loss learner for R = 1");
    }
    let hp = multiloss_hyperparams(
        eps,
        delta,
        inst.k(),
        inst.vc_dim(),
        inst.num_losses(),
        scale,
        &opts.formulas,
    )?;
    let out = hedge_loop(inst, &hp, Variant::MultiLoss, seed, opts)?;
    let config = ConfigEcho {
        eps: Some(eps),
        delta: Some(delta),
        scale: Some(scale),
        ..echo(inst, opts)
    };
    finish(inst, Algorithm::Mlmdl, seed, config, Some(hp), out, opts, start)
}

/// Non-adaptive baseline: `floor(budget / k)` draws from every distribution,
/// then the pure hypothesis minimizing the worst empirical mean over all
/// (distribution, loss) pairs.
pub fn run_uniform_baseline(inst: &Instance, total_budget: u64, seed: u64, opts: &RunOptions) -> Result<RunReport> {
    let start = Instant::now();
    let k = inst.k();
    if total_budget < k as u64 {
        return validation(format!("budget {total_budget} is smaller than k = {k}"));
    }
    let n = total_budget / k as u64;
    let mut sampler = SamplerState::new(seed, k);
    let mut bank = SampleBank::new(inst, opts.coupling);
    let h_count = inst.num_hypotheses();
    let mut worst = vec![f64::NEG_INFINITY; h_count];
    for i in 0..k {
        bank.append(i, n, &mut sampler);
        for (c, &s) in bank.column_sums(i).iter().enumerate() {
            let h = c % h_count;
            worst[h] = worst[h].max(s / n as f64);
        }
    }
    let h = select(&worst, ErmMode::Exact)?;
    let final_hypothesis = RandomizedHypothesis::point(h);
    let worst_case_loss = exact_worst_case_loss(inst, &final_hypothesis)?;
    let opt = resolve_opt(inst, opts)?;
    let samples = SampleAccounting {
        bank: n * k as u64,
        fresh: 0,
        rad_initial: 0,
        total: n * k as u64,
        bank_per_distribution: bank.counts(),
        fresh_per_distribution: vec![0; k],
        stream_bank: sampler.total_draws(Purpose::Bank),
        stream_fresh: sampler.total_draws(Purpose::Fresh),
    };
    Ok(RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        algorithm: Algorithm::Uniform,
        seed,
        config: ConfigEcho {
            budget: Some(total_budget),
            ..echo(inst, opts)
        },
        hyper: None,
        rounds: 0,
        final_hypothesis,
        samples,
        trigger_count: 0,
        trajectory: None,
        trajectory_norm: None,
        weight_buckets: None,
        worst_case_loss,
        opt,
        gap: worst_case_loss - opt,
        wallclock_ms: elapsed_ms(start, opts),
    })
}

/// Hedge on the exact game: each hypothesis contributes its vector of
/// population losses and the learner best-responds exactly. Uses no samples.
pub fn run_bilinear(inst: &Instance, eps: f64, opts: &RunOptions) -> Result<RunReport> {
    let start = Instant::now();
    let ys = inst.objective_matrix();
    let traj = run_bilinear_hedge(&ys, eps)?;
    let rounds = traj.rounds.len() as u64;
    let mut picks = vec![0u64; ys.len()];
    let m = ys[0].len();
    let mut trajectory = Trajectory::new(m, opts.trajectory_stride)?;
    for round in &traj.rounds {
        picks[round.choice] += 1;
        trajectory.push(&round.weights)?;
    }
    let final_hypothesis = picks_to_hypothesis(&picks, rounds)?;
    let worst_case_loss = exact_worst_case_loss(inst, &final_hypothesis)?;
    let opt = resolve_opt(inst, opts)?;
    let norm = trajectory_norm(&trajectory)?;
    let buckets = weight_buckets(&trajectory)?.sizes();
    Ok(RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        algorithm: Algorithm::Bilinear,
        seed: 0,
        config: ConfigEcho {
            eps: Some(eps),
            ..echo(inst, opts)
        },
        hyper: None,
        rounds,
        final_hypothesis,
        samples: SampleAccounting {
            bank: 0,
            fresh: 0,
            rad_initial: 0,
            total: 0,
            bank_per_distribution: vec![0; inst.k()],
            fresh_per_distribution: vec![0; inst.k()],
            stream_bank: 0,
            stream_fresh: 0,
        },
        trigger_count: 0,
        trajectory: opts.keep_trajectory.then_some(trajectory),
        trajectory_norm: Some(norm),
        weight_buckets: Some(buckets),
        worst_case_loss,
        opt,
        gap: worst_case_loss - opt,
        wallclock_ms: elapsed_ms(start, opts),
    })
}

/// Upper bound on resample firings: `k ceil(log2(k T)) + k`.
pub fn trigger_bound(k: usize, rounds: u64) -> u64 {
    let kt = k as f64 * rounds as f64;
    k as u64 * kt.log2().ceil().max(0.0) as u64 + k as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::make_random_instance;
    use crate::problem::LossDist;

    fn small_scale() -> Scale {
        Scale::new(1.0, 1e-3, 1e-2).unwrap()
    }

    #[test]
    fn zero_loss_hypothesis_found() {
        let c = |v| LossDist::constant(v).unwrap();
        let coin = LossDist::two_point(-1.0, 1.0, 0.7).unwrap();
        let tables = vec![
            vec![coin.clone(), coin.clone()],
            vec![c(-1.0), c(-1.0)],
            vec![coin.clone(), c(0.5)],
        ];
        let inst = Instance::single_loss(tables, None).unwrap();
        let rep = run_mdl_hedge_vc(&inst, 0.1, 0.1, small_scale(), 1, &RunOptions::default()).unwrap();
        assert!(rep.gap <= 0.1, "gap {}", rep.gap);
        assert_eq!(rep.final_hypothesis.support(), &[1]);
    }

    #[test]
    fn run_is_deterministic_and_accounted() {
        let inst = make_random_instance(3, 6, None, 0.05, 2).unwrap();
        let opts = RunOptions {
            record_wallclock: false,
            ..Default::default()
        };
        let a = run_mdl_hedge_vc(&inst, 0.2, 0.1, small_scale(), 9, &opts).unwrap();
        let b = run_mdl_hedge_vc(&inst, 0.2, 0.1, small_scale(), 9, &opts).unwrap();
        assert_eq!(a, b);
        assert!(a.samples.is_consistent());
        assert!(a.trigger_count <= trigger_bound(3, a.rounds));
        assert_eq!(a.rounds, a.hyper.unwrap().rounds);
        let total_weight: f64 = a.final_hypothesis.weights().iter().sum();
        assert!((total_weight - 1.0).abs() < 1e-12);
        let tn = a.trajectory_norm.unwrap();
        assert!((1.0 - 1e-9..=3.0 + 1e-9).contains(&tn));
    }

    #[test]
    fn rejects_wrong_loss_count() {
        let single = make_random_instance(2, 3, None, 0.1, 0).unwrap();
        assert!(run_mlmdl_hedge(&single, 0.1, 0.1, small_scale(), 0, &RunOptions::default()).is_err());
        let multi = crate::instances::make_random_multiloss_instance(2, 3, 2, None, 0.1, 0).unwrap();
        assert!(run_mdl_hedge_vc(&multi, 0.1, 0.1, small_scale(), 0, &RunOptions::default()).is_err());
    }

    #[test]
    fn baseline_smoke_and_deterministic_instance() {
        let inst = make_random_instance(4, 5, None, 0.1, 3).unwrap();
        let rep = run_uniform_baseline(&inst, 4, 0, &RunOptions::default()).unwrap();
        assert_eq!(rep.samples.total, 4);
        assert!(run_uniform_baseline(&inst, 3, 0, &RunOptions::default()).is_err());

        let c = |v| LossDist::constant(v).unwrap();
        let tables = vec![vec![c(0.5), c(-0.2)], vec![c(0.1), c(0.3)], vec![c(0.9), c(-1.0)]];
        let inst = Instance::single_loss(tables, None).unwrap();
        let rep = run_uniform_baseline(&inst, 10, 0, &RunOptions::default()).unwrap();
        assert_eq!(rep.final_hypothesis.support(), &[1]);
    }

    #[test]
    fn rad_run_accounts_initial_draws() {
        let inst = make_random_instance(2, 4, None, 0.05, 5).unwrap();
        let zero = RademacherSchedule::table(vec![(1, 0.0)]).unwrap();
        let rep = run_mdl_hedge_rad(&inst, 0.2, 0.1, &zero, small_scale(), 3, &RunOptions::default()).unwrap();
        assert_eq!(rep.samples.rad_initial, 2 * rad_initial_draws(2));
        assert!(rep.samples.is_consistent());
    }

    #[test]
    fn trigger_bound_values() {
        assert_eq!(trigger_bound(1, 1), 1);
        assert_eq!(trigger_bound(2, 8), 2 * 4 + 2);
    }
}
