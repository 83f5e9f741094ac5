use serde::{Deserialize, Serialize};

use crate::error::{validation, MdlError, Result};
use crate::problem::Instance;
use crate::sampling::SampleBank;

/// Exact argmin, or any hypothesis within `eps1` of it (the lowest index).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ErmMode {
    #[default]
    Exact,
    Approximate {
        eps1: f64,
    },
}

/// Adds `sum_l u_l / n * sums[l * H + h]` to `objective[h]` for one
/// distribution with `n` stored draws.
pub fn accumulate_objective(objective: &mut [f64], sums: &[f64], u_row: &[f64], n: u64, i: usize) -> Result<()> {
    let h_count = objective.len();
    for (l, &u) in u_row.iter().enumerate() {
        if u == 0.0 {
            continue;
        }
        if n == 0 {
            return Err(MdlError::Precondition(format!(
                "distribution {i} has weight {u} but no banked samples"
            )));
        }
        let scale = u / n as f64;
        for (o, &s) in objective.iter_mut().zip(&sums[l * h_count..(l + 1) * h_count]) {
            *o += scale * s;
        }
    }
    Ok(())
}

/// Picks a minimizer of `objective` under `mode`; ties go to the lowest index.
pub fn select(objective: &[f64], mode: ErmMode) -> Result<usize> {
    if objective.is_empty() {
        return validation("hypothesis set is empty");
    }
    let min = objective.iter().copied().fold(f64::INFINITY, f64::min);
    let slack = match mode {
        ErmMode::Exact => 0.0,
        ErmMode::Approximate { eps1 } => eps1,
    };
    objective
        .iter()
        .position(|&v| v <= min + slack)
        .ok_or_else(|| MdlError::Invariant("empirical objective is not finite".into()))
}

/// Empirical objective `sum_{i,l} u_{i,l} / n_i * sum_j loss_l(h, z_ij)` over
/// the whole bank, for every hypothesis. `u` is laid out as `i * R + l`.
pub fn empirical_objective(bank: &SampleBank, inst: &Instance, u: &[f64]) -> Result<Vec<f64>> {
    let r = inst.num_losses();
    if u.len() != inst.k() * r {
        return validation(format!(
            "weights have length {}, expected k * R = {}",
            u.len(),
            inst.k() * r
        ));
    }
    let mut objective = vec![0.0; inst.num_hypotheses()];
    for i in 0..inst.k() {
        accumulate_objective(
            &mut objective,
            bank.column_sums(i),
            &u[i * r..(i + 1) * r],
            bank.count(i),
            i,
        )?;
    }
    Ok(objective)
}

/// Best response to the weights `u` on the bank.
pub fn erm(bank: &SampleBank, inst: &Instance, u: &[f64], mode: ErmMode) -> Result<usize> {
    select(&empirical_objective(bank, inst, u)?, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::make_random_instance;
    use crate::problem::LossDist;
    use crate::sampling::{empirical_weighted_loss, LossCoupling, SamplerState};

    fn constant_bank(values: &[f64]) -> (Instance, SampleBank) {
        let tables = values.iter().map(|&v| vec![LossDist::constant(v).unwrap()]).collect();
        let inst = Instance::single_loss(tables, None).unwrap();
        let mut s = SamplerState::new(0, 1);
        let mut bank = SampleBank::new(&inst, LossCoupling::Independent);
        bank.append(0, 4, &mut s);
        (inst, bank)
    }

    #[test]
    fn picks_smaller_mean() {
        let (inst, bank) = constant_bank(&[0.2, 0.1]);
        assert_eq!(erm(&bank, &inst, &[1.0], ErmMode::Exact).unwrap(), 1);
    }

    #[test]
    fn ties_go_low() {
        let (inst, bank) = constant_bank(&[0.3, 0.3, 0.3]);
        assert_eq!(erm(&bank, &inst, &[1.0], ErmMode::Exact).unwrap(), 0);
    }

    #[test]
    fn approximate_mode_takes_first_within_slack() {
        let (inst, bank) = constant_bank(&[0.3, 0.25, 0.2]);
        assert_eq!(
            erm(&bank, &inst, &[1.0], ErmMode::Approximate { eps1: 0.06 }).unwrap(),
            1
        );
        assert_eq!(
            erm(&bank, &inst, &[1.0], ErmMode::Approximate { eps1: 0.2 }).unwrap(),
            0
        );
    }

    #[test]
    fn empty_set_rejected() {
        assert!(select(&[], ErmMode::Exact).is_err());
    }

    #[test]
    fn matches_brute_force_scan() {
        let inst = make_random_instance(3, 5, None, 0.1, 11).unwrap();
        let mut s = SamplerState::new(5, 3);
        let mut bank = SampleBank::new(&inst, LossCoupling::Independent);
        for (i, n) in [7u64, 19, 3].into_iter().enumerate() {
            bank.append(i, n, &mut s);
        }
        for w in [[0.2, 0.5, 0.3], [1.0, 0.0, 0.0], [0.01, 0.01, 0.98]] {
            let scan: Vec<f64> = (0..5)
                .map(|h| empirical_weighted_loss(&bank, &w, h, 0).unwrap())
                .collect();
            let mut best = 0;
            for h in 1..5 {
                if scan[h] < scan[best] {
                    best = h;
                }
            }
            assert_eq!(erm(&bank, &inst, &w, ErmMode::Exact).unwrap(), best);
        }
    }
}
