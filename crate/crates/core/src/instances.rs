//! Instance generators and Rademacher complexity schedules.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::problem::{Instance, LossDist};

/// Loss law on {-1, +1} with mean `m`.
fn signed_coin(m: f64) -> Result<LossDist> {
    LossDist::two_point(-1.0, 1.0, (1.0 + m) / 2.0)
}

/// Index of the planted hypothesis of [`make_random_instance`].
pub fn planted_index(num_hypotheses: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng.random_range(0..num_hypotheses)
}

/// Random single-loss instance; see [`make_random_multiloss_instance`].
pub fn make_random_instance(k: usize, h: usize, d: Option<usize>, eps_gap: f64, seed: u64) -> Result<Instance> {
    make_random_multiloss_instance(k, h, 1, d, eps_gap, seed)
}

/// Random Bernoulli-style instance with `R = r` loss functions.
///
/// Every table is a coin on {-1, +1} whose success probability `p` is uniform
/// on [0, 1] (loss mean `2p - 1`). The hypothesis at [`planted_index`] instead
/// has `p` uniform on [0, eps_gap / 2] in every column, so its worst-case loss
/// is at most `-1 + eps_gap <= OPT + eps_gap`.
pub fn make_random_multiloss_instance(
    k: usize,
    h: usize,
    r: usize,
    d: Option<usize>,
    eps_gap: f64,
    seed: u64,
) -> Result<Instance> {
    if h < 2 || k < 1 || r < 1 {
        return validation(format!("need H >= 2, k >= 1, R >= 1 (got H={h}, k={k}, R={r})"));
    }
    if !(0.0..=2.0).contains(&eps_gap) {
        return validation(format!("eps_gap must lie in [0, 2], got {eps_gap}"));
    }
    let planted = planted_index(h, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut losses = Vec::with_capacity(r);
    for _ in 0..r {
        let mut per_h = Vec::with_capacity(h);
        for hyp in 0..h {
            let mut per_i = Vec::with_capacity(k);
            for _ in 0..k {
                let p: f64 = rng.random();
                let p = if hyp == planted { p * eps_gap / 2.0 } else { p };
                per_i.push(signed_coin(2.0 * p - 1.0)?);
            }
            per_h.push(per_i);
        }
        losses.push(per_h);
    }
    let names = (0..h).map(|j| format!("h{j}")).collect();
    Instance::new(names, losses, d)
}

/// Instance with one hard distribution and `k - 1` trivial ones.
///
/// On distribution 0 the hypotheses have {-1, +1} losses with means
/// `base_mean + resolution * j`, `j = 0..H`, assigned in a seeded random order;
/// telling the best ones apart takes on the order of `1 / resolution^2`
/// samples. On every other distribution all hypotheses lose exactly -1.
pub fn make_heterogeneous_instance(k: usize, h: usize, base_mean: f64, resolution: f64, seed: u64) -> Result<Instance> {
    if k < 2 || h < 2 {
        return validation("heterogeneous instance needs k >= 2 and H >= 2");
    }
    let top = base_mean + resolution * (h - 1) as f64;
    if !(resolution > 0.0) || base_mean < -1.0 || top > 1.0 {
        return validation(format!(
            "hard-distribution means [{base_mean}, {top}] must lie in [-1, 1] with positive resolution"
        ));
    }
    let mut order: Vec<usize> = (0..h).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let tables = order
        .into_iter()
        .map(|rank| {
            let mut per_i = vec![signed_coin(base_mean + resolution * rank as f64)?];
            for _ in 1..k {
                per_i.push(LossDist::constant(-1.0)?);
            }
            Ok(per_i)
        })
        .collect::<Result<Vec<_>>>()?;
    Instance::single_loss(tables, None)
}

/// The lower-bound construction together with its hypothesis partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardInstance {
    pub instance: Instance,
    /// `groups[i]` are the hypotheses that are biased on distribution `i`.
    pub groups: Vec<Vec<usize>>,
    pub h_star: usize,
    pub eps: f64,
}

impl HardInstance {
    /// Group size `N0 = (2^d - 1) / k`.
    pub fn group_size(&self) -> usize {
        self.groups[0].len()
    }

    /// Whether `(d, k, eps)` also satisfy the lower bound's own regime
    /// (`d >= 2 ln(8k)` and `eps < 1/100`); construction does not require it.
    pub fn in_lower_bound_regime(&self) -> bool {
        let d = self.instance.vc_dim() as f64;
        let k = self.instance.k() as f64;
        d >= 2.0 * (8.0 * k).ln() && self.eps < 0.01
    }
}

/// Largest `d` accepted by [`make_hard_instance`] (`2^d` hypotheses).
pub const MAX_HARD_DIM: usize = 20;

/// Builds the hard instance: `N = 2^d` hypotheses split into `k` groups of
/// `N0 = (2^d - 1) / k` plus a distinguished `h*`. On distribution `i` a
/// hypothesis in group `i` loses +1 with probability `1/2 + 4 eps` and -1
/// otherwise (mean `8 eps`); every other hypothesis, `h*` included, is a fair
/// ±1 coin (mean 0).
pub fn make_hard_instance(d: usize, k: usize, eps: f64) -> Result<HardInstance> {
    if d == 0 || d > MAX_HARD_DIM {
        return validation(format!("d must lie in 1..={MAX_HARD_DIM}, got {d}"));
    }
    if k == 0 {
        return validation("k must be at least 1");
    }
    let n = 1usize << d;
    if !(n - 1).is_multiple_of(k) {
        return validation(format!("(2^d - 1) = {} is not divisible by k = {k}", n - 1));
    }
    if !(eps > 0.0 && eps <= 0.125) {
        return validation(format!(
            "eps must lie in (0, 1/8] so that 1/2 + 4 eps is a probability, got {eps}"
        ));
    }
    let n0 = (n - 1) / k;
    let groups: Vec<Vec<usize>> = (0..k).map(|i| (i * n0..(i + 1) * n0).collect()).collect();
    let h_star = n - 1;
    let fair = LossDist::two_point(-1.0, 1.0, 0.5)?;
    let biased = LossDist::two_point(-1.0, 1.0, 0.5 + 4.0 * eps)?;
    let mut names = Vec::with_capacity(n);
    let mut tables = Vec::with_capacity(n);
    for hyp in 0..n {
        let group = (hyp < h_star).then(|| hyp / n0);
        names.push(match group {
            Some(g) => format!("g{g}_{}", hyp % n0),
            None => "h_star".to_string(),
        });
        tables.push(
            (0..k)
                .map(|i| if group == Some(i) { biased.clone() } else { fair.clone() })
                .collect(),
        );
    }
    let instance = Instance::new(names, vec![tables], Some(d))?;
    Ok(HardInstance {
        instance,
        groups,
        h_star,
        eps,
    })
}

/// A non-increasing bound `n -> C_n` on the Rademacher complexity of the class
/// under any mixture of the distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum RademacherSchedule {
    /// `sqrt(2 d ln(e n / d) / n)`, held at its `n = d` value below `d`.
    Vc { d: usize },
    /// `sqrt(2 ln(H) / n)`.
    Massart { h: f64 },
    /// Step function: `C_n` is the value of the last point with `n' <= n`
    /// (the first value before the first point).
    Table { points: Vec<(u64, f64)> },
}

impl RademacherSchedule {
    pub fn vc(d: usize) -> Result<Self> {
        if d == 0 {
            return validation("VC schedule needs d >= 1");
        }
        Ok(Self::Vc { d })
    }

    pub fn massart(h: f64) -> Result<Self> {
        if !(h >= 2.0) {
            return validation(format!("Massart schedule needs H >= 2, got {h}"));
        }
        Ok(Self::Massart { h })
    }

    pub fn table(mut points: Vec<(u64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return validation("schedule table is empty");
        }
        points.sort_by_key(|p| p.0);
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return validation("schedule table has repeated n");
        }
        if points.iter().any(|p| !(p.1 >= 0.0) || !p.1.is_finite()) {
            return validation("schedule values must be finite and nonnegative");
        }
        if points.windows(2).any(|w| w[1].1 > w[0].1) {
            return validation("schedule values must be non-increasing in n");
        }
        Ok(Self::Table { points })
    }

    pub fn form(&self) -> &'static str {
        match self {
            Self::Vc { .. } => "vc",
            Self::Massart { .. } => "massart",
            Self::Table { .. } => "table",
        }
    }

    pub fn value(&self, n: f64) -> f64 {
        match self {
            Self::Vc { d } => {
                let d = *d as f64;
                let n = n.max(d);
                (2.0 * d * (std::f64::consts::E * n / d).ln() / n).sqrt()
            }
            Self::Massart { h } => (2.0 * h.ln() / n).sqrt(),
            Self::Table { points } => {
                let idx = points.partition_point(|p| (p.0 as f64) <= n);
                points[idx.saturating_sub(1)].1
            }
        }
    }

    /// Smallest integer `t` in `[floor, cap]` with `C_t <= threshold`.
    pub fn first_at_most(&self, threshold: f64, floor: u64, cap: u64) -> Option<u64> {
        if floor > cap || self.value(cap as f64) > threshold {
            return None;
        }
        let (mut lo, mut hi) = (floor, cap);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if self.value(mid as f64) <= threshold {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        Some(lo)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::solve_matrix_game;
    use crate::problem::{exact_mixture_loss, exact_worst_case_loss, RandomizedHypothesis};

    #[test]
    fn random_two_row_single_distribution() {
        let inst = make_random_instance(1, 2, None, 0.1, 4).unwrap();
        let m = inst.loss_matrix(0);
        let sol = solve_matrix_game(&m, 1e-6).unwrap();
        assert!((sol.value - m[0][0].min(m[1][0])).abs() < 1e-6);
    }

    #[test]
    fn random_instance_is_deterministic() {
        let a = make_random_instance(3, 5, None, 0.1, 77).unwrap();
        let b = make_random_instance(3, 5, None, 0.1, 77).unwrap();
        let c = make_random_instance(3, 5, None, 0.1, 78).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn planted_is_near_minimax() {
        for seed in 0..20 {
            let inst = make_random_multiloss_instance(4, 8, 2, None, 0.05, seed).unwrap();
            let p = planted_index(8, seed);
            let sol = solve_matrix_game(&inst.objective_matrix(), 1e-6).unwrap();
            let planted = exact_worst_case_loss(&inst, &RandomizedHypothesis::point(p)).unwrap();
            assert!(planted <= sol.value + 0.05 + 1e-6, "seed {seed}");
        }
    }

    #[test]
    fn hard_instance_sizes_and_losses() {
        let hard = make_hard_instance(3, 1, 0.05).unwrap();
        assert_eq!(hard.group_size(), 7);
        assert_eq!(hard.instance.num_hypotheses(), 8);
        assert_eq!(hard.instance.vc_dim(), 3);
        let g = hard.groups[0][0];
        assert!((exact_mixture_loss(&hard.instance, g, &[1.0], 0).unwrap() - 0.4).abs() < 1e-12);

        let hard = make_hard_instance(4, 3, 0.02).unwrap();
        for (i, group) in hard.groups.iter().enumerate() {
            for &h in group {
                for j in 0..3 {
                    let expected = if i == j { 8.0 * 0.02 } else { 0.0 };
                    assert!((hard.instance.mean(0, h, j) - expected).abs() < 1e-12);
                }
            }
        }
        assert!(!hard.in_lower_bound_regime());
    }

    #[test]
    fn hard_instance_h_star_unique() {
        let hard = make_hard_instance(4, 5, 0.05).unwrap();
        let inst = &hard.instance;
        for h in 0..inst.num_hypotheses() {
            let worst = exact_worst_case_loss(inst, &RandomizedHypothesis::point(h)).unwrap();
            if h == hard.h_star {
                assert!(worst.abs() < 1e-12);
            } else {
                assert!(worst >= 8.0 * 0.05 - 1e-12);
            }
        }
    }

    #[test]
    fn hard_instance_rejections() {
        assert!(make_hard_instance(3, 2, 0.05).is_err());
        assert!(make_hard_instance(3, 1, 0.2).is_err());
        assert!(make_hard_instance(3, 1, 0.0).is_err());
        assert!(make_hard_instance(0, 1, 0.05).is_err());
        let err = make_hard_instance(6, 4, 0.05).unwrap_err().to_string();
        assert!(err.contains("divisible"), "{err}");
    }

    #[test]
    fn heterogeneous_structure() {
        let inst = make_heterogeneous_instance(3, 4, 0.5, 0.01, 1).unwrap();
        let mut hard: Vec<f64> = (0..4).map(|h| inst.mean(0, h, 0)).collect();
        hard.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (j, m) in hard.iter().enumerate() {
            assert!((m - (0.5 + 0.01 * j as f64)).abs() < 1e-12);
        }
        for h in 0..4 {
            assert_eq!(inst.mean(0, h, 1), -1.0);
            assert_eq!(inst.mean(0, h, 2), -1.0);
        }
        assert!(make_heterogeneous_instance(3, 4, 0.99, 0.01, 1).is_err());
    }

    #[test]
    fn vc_schedule_values() {
        let s = RademacherSchedule::vc(1).unwrap();
        let e = std::f64::consts::E;
        assert!((s.value(e) - (4.0 / e).sqrt()).abs() < 1e-12);
        assert!((s.value(e) - 1.2131).abs() < 1e-4);
        for d in [1usize, 5, 30] {
            let s = RademacherSchedule::vc(d).unwrap();
            for n in [d as f64, 10.0 * d as f64, 1e6] {
                assert!(s.value(2.0 * n) <= s.value(n));
            }
            // held constant below d
            assert_eq!(s.value(0.5), s.value(d as f64));
        }
        assert!(RademacherSchedule::vc(100).unwrap().value(1e10) < 1e-3);
        assert!(RademacherSchedule::vc(0).is_err());
    }

    #[test]
    fn massart_schedule_values() {
        let s = RademacherSchedule::massart(std::f64::consts::E.powi(2)).unwrap();
        assert!((s.value(8.0) - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(s.value(9.0) < s.value(8.0));
        assert!((s.value(400.0) - s.value(100.0) / 2.0).abs() < 1e-15);
        assert!(RademacherSchedule::massart(1.5).is_err());
    }

    #[test]
    fn table_schedule_and_search() {
        let s = RademacherSchedule::table(vec![(10, 0.5), (1, 1.0), (100, 0.1)]).unwrap();
        assert_eq!(s.value(0.0), 1.0);
        assert_eq!(s.value(9.0), 1.0);
        assert_eq!(s.value(10.0), 0.5);
        assert_eq!(s.value(1e9), 0.1);
        assert_eq!(s.first_at_most(0.5, 1, 1000), Some(10));
        assert_eq!(s.first_at_most(0.5, 20, 1000), Some(20));
        assert_eq!(s.first_at_most(0.05, 1, 1000), None);
        assert!(RademacherSchedule::table(vec![(1, 0.1), (2, 0.2)]).is_err());
        let zero = RademacherSchedule::table(vec![(1, 0.0)]).unwrap();
        assert_eq!(zero.first_at_most(1e-9, 12345, u64::MAX / 2), Some(12345));
    }

    #[test]
    fn vc_search_matches_linear_scan() {
        let s = RademacherSchedule::vc(3).unwrap();
        let thr = 0.05;
        let found = s.first_at_most(thr, 1, 1_000_000).unwrap();
        assert!(s.value(found as f64) <= thr);
        assert!(s.value((found - 1) as f64) > thr);
    }
}
