//! On-demand sampling: the doubling resample trigger, the reusable bank and
//! its schedule, the empirical weighted loss and fresh loss-vector estimates.

mod bank;
mod rng;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use bank::{BankDump, ChunkDump, DistDump, LossCoupling, SampleBank};
pub use rng::{Purpose, SamplerState};

use crate::error::{validation, MdlError, Result};
use crate::problem::Instance;

/// `ceil(x)` for nonnegative `x`, ignoring relative rounding noise below 1e-12
/// so that e.g. `k * (1/k)` counts as exactly 1.
pub fn ceil_count(x: f64) -> u64 {
    debug_assert!(x >= 0.0);
    let nearest = x.round();
    if (x - nearest).abs() <= 1e-12 * nearest.max(1.0) {
        nearest as u64
    } else {
        x.ceil() as u64
    }
}

/// True iff some coordinate has at least doubled past its snapshot.
pub fn resample_trigger(w: &[f64], w_hat_prev: &[f64]) -> bool {
    debug_assert_eq!(w.len(), w_hat_prev.len());
    w.iter().zip(w_hat_prev).any(|(&x, &s)| x >= 2.0 * s)
}

/// Low-switching snapshot `w_hat` and running maximum `w_bar` of the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSnapshots {
    pub w_hat: Vec<f64>,
    pub w_bar: Vec<f64>,
}

impl WeightSnapshots {
    /// Snapshot all zeros (so the first round always triggers) and empty running max.
    pub fn new(k: usize) -> Self {
        Self {
            w_hat: vec![0.0; k],
            w_bar: vec![0.0; k],
        }
    }

    /// Applies the trigger for this round's weights. On firing, `w_hat` becomes
    /// the coordinate-wise max of itself and `w`; returns whether it fired.
    pub fn observe(&mut self, w: &[f64]) -> bool {
        let fired = resample_trigger(w, &self.w_hat);
        if fired {
            for (s, &x) in self.w_hat.iter_mut().zip(w) {
                *s = s.max(x);
            }
        }
        fired
    }

    pub fn update_running_max(&mut self, w: &[f64]) {
        for (m, &x) in self.w_bar.iter_mut().zip(w) {
            *m = m.max(x);
        }
    }
}

/// Schedule target for distribution `i`: `ceil(t1 * w_hat_i)`.
pub fn schedule_counts(w_hat: &[f64], t1: u64) -> Vec<u64> {
    w_hat.iter().map(|&s| ceil_count(t1 as f64 * s)).collect()
}

/// Grows every distribution's scheduled draws to `ceil(t1 * w_hat_new_i)`,
/// on top of any initial draws. Returns the number of draws added per
/// distribution.
pub fn grow_bank(bank: &mut SampleBank, w_hat_new: &[f64], t1: u64, sampler: &mut SamplerState) -> Result<Vec<u64>> {
    if w_hat_new.len() != bank.k() {
        return validation("snapshot length differs from the number of distributions");
    }
    let targets = schedule_counts(w_hat_new, t1);
    let mut added = Vec::with_capacity(targets.len());
    for (i, &n) in targets.iter().enumerate() {
        let scheduled = bank.count(i) - bank.initial_draws(i);
        if n < scheduled {
            return Err(MdlError::Invariant(format!(
                "schedule for distribution {i} would shrink from {scheduled} to {n}"
            )));
        }
        bank.append(i, n - scheduled, sampler);
        added.push(n - scheduled);
    }
    Ok(added)
}

/// `sum_i (w_i / n_i) * sum_{j <= n_i} loss_l(h, z_ij)` over the whole bank.
pub fn empirical_weighted_loss(bank: &SampleBank, w: &[f64], h: usize, l: usize) -> Result<f64> {
    if w.len() != bank.k() {
        return validation("weight length differs from the number of distributions");
    }
    let mut total = 0.0;
    for (i, &wi) in w.iter().enumerate() {
        if wi == 0.0 {
            continue;
        }
        let n = bank.count(i);
        if n == 0 {
            return Err(MdlError::Precondition(format!(
                "distribution {i} has weight {wi} but no banked samples"
            )));
        }
        total += wi * bank.loss_sum(i, l, h) / n as f64;
    }
    Ok(total)
}

/// Fresh-sample batch size `ceil(k * w_bar_i)`.
pub fn batch_size(k: usize, w_bar_i: f64) -> u64 {
    ceil_count(k as f64 * w_bar_i)
}

/// Estimates `L(h, e_i)` for every distribution (and loss) from fresh draws.
///
/// Distribution `i` gets one batch of `ceil(k * w_bar_i)` draws; every loss
/// function is evaluated on that same batch. The result is laid out as
/// `i * R + l`.
pub fn estimate_loss_vector(
    inst: &Instance,
    h: usize,
    w_bar: &[f64],
    sampler: &mut SamplerState,
    coupling: LossCoupling,
) -> Result<Vec<f64>> {
    inst.check_hypothesis(h)?;
    let k = inst.k();
    let r = inst.num_losses();
    if w_bar.len() != k {
        return validation("running max length differs from the number of distributions");
    }
    let mut out = vec![0.0; k * r];
    let mut u = vec![0.0; r];
    for (i, &wb) in w_bar.iter().enumerate() {
        if !(wb > 0.0 && wb <= 1.0 + 1e-12) {
            return validation(format!("running max entry {i} = {wb} outside (0, 1]"));
        }
        let batch = batch_size(k, wb);
        assert!(batch >= 1, "batch size is at least one for positive w_bar");
        let rng = sampler.rng(i, Purpose::Fresh);
        let mut sums = vec![0.0; r];
        for _ in 0..batch {
            match coupling {
                LossCoupling::Independent => u.iter_mut().for_each(|x| *x = rng.random()),
                LossCoupling::Comonotone => {
                    let shared: f64 = rng.random();
                    u.iter_mut().for_each(|x| *x = shared);
                }
            }
            for (l, s) in sums.iter_mut().enumerate() {
                let table = inst.table(l, h, i);
                *s += table.atoms()[table.atom_at(u[l])].0;
            }
        }
        sampler.count(i, Purpose::Fresh, batch);
        for (l, s) in sums.into_iter().enumerate() {
            out[i * r + l] = s / batch as f64;
        }
    }
    Ok(out)
}

/// `min(ceil(t1 * w_i + 12 ln(2k)), t1)` per coordinate.
pub fn rad_effective_counts(w: &[f64], t1: u64, k: usize) -> Vec<u64> {
    let floor = 12.0 * (2.0 * k as f64).ln();
    w.iter().map(|&x| ceil_count(t1 as f64 * x + floor).min(t1)).collect()
}

/// `ceil(12 ln(2k))`: per-distribution warm-start draws of the Rademacher variant.
pub fn rad_initial_draws(k: usize) -> u64 {
    ceil_count(12.0 * (2.0 * k as f64).ln())
}
