//! Hedge weight dynamics and zero-sum matrix games.
//!
//! Convention throughout: the matrix `M` is `rows x cols`, the row player
//! (hypotheses) minimizes and the column player (distributions) maximizes
//! `pi^T M w`.

use serde::{Deserialize, Serialize};

use crate::error::{validation, MdlError, Result};
use crate::scalar::{argmin, Scalar};

/// Slack allowed on a reward entry before it is treated as a broken estimate.
pub const REWARD_SLACK: f64 = 1e-9;

/// Exponential weights stored as log-weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedgeWeights<T = f64> {
    log_w: Vec<T>,
    eta: T,
}

impl<T: Scalar> HedgeWeights<T> {
    /// `m` coordinates, all with unit weight.
    pub fn uniform(m: usize, eta: T) -> Result<Self> {
        Self::from_log_weights(vec![T::zero(); m], eta)
    }

    pub fn from_log_weights(log_w: Vec<T>, eta: T) -> Result<Self> {
        if log_w.is_empty() {
            return validation("hedge needs at least one coordinate");
        }
        if !(eta > T::zero()) || !eta.is_finite() {
            return validation(format!("step size must be positive and finite, got {eta}"));
        }
        if log_w.iter().any(|x| !x.is_finite()) {
            return validation("log-weights must be finite");
        }
        Ok(Self { log_w, eta })
    }

    pub fn log_weights(&self) -> &[T] {
        &self.log_w
    }

    pub fn eta(&self) -> T {
        self.eta
    }

    pub fn dim(&self) -> usize {
        self.log_w.len()
    }

    /// `log_w_i += eta * reward_i`, returning the updated state.
    pub fn hedge_step(&self, reward: &[T]) -> Result<Self> {
        let mut next = self.clone();
        next.step_in_place(reward)?;
        Ok(next)
    }

    /// In-place form of [`hedge_step`](Self::hedge_step). Leaves `self`
    /// untouched on error.
    pub fn step_in_place(&mut self, reward: &[T]) -> Result<()> {
        if reward.len() != self.log_w.len() {
            return validation(format!(
                "reward has length {}, weights have {}",
                reward.len(),
                self.log_w.len()
            ));
        }
        let bound = T::one() + T::of(REWARD_SLACK);
        if let Some((i, r)) = reward.iter().enumerate().find(|(_, r)| !(r.abs() <= bound)) {
            return validation(format!("reward entry {i} = {r} outside [-1, 1]"));
        }
        for (lw, &r) in self.log_w.iter_mut().zip(reward) {
            *lw = *lw + self.eta * r;
        }
        Ok(())
    }

    /// Normalized weights, computed by max-subtraction.
    pub fn normalize(&self) -> Vec<T> {
        softmax(&self.log_w)
    }
}

/// `exp(x_i - max x) / sum_j exp(x_j - max x)`.
pub fn softmax<T: Scalar>(x: &[T]) -> Vec<T> {
    let max = x.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = x.iter().map(|&v| (v - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn check_matrix<T: Scalar>(m: &[Vec<T>]) -> Result<usize> {
    let cols = m.first().map_or(0, Vec::len);
    if m.is_empty() || cols == 0 {
        return validation("game matrix must be nonempty");
    }
    for (r, row) in m.iter().enumerate() {
        if row.len() != cols {
            return validation(format!("row {r} has {} columns, expected {cols}", row.len()));
        }
        if let Some(x) = row.iter().find(|x| !x.is_finite()) {
            return validation(format!("row {r} has non-finite entry {x}"));
        }
    }
    Ok(cols)
}

fn row_losses<T: Scalar>(m: &[Vec<T>], w: &[T], out: &mut [T]) {
    for (o, row) in out.iter_mut().zip(m) {
        *o = row.iter().zip(w).map(|(&a, &b)| a * b).sum();
    }
}

fn col_payoffs<T: Scalar>(m: &[Vec<T>], pi: &[T], out: &mut [T]) {
    out.iter_mut().for_each(|o| *o = T::zero());
    for (row, &p) in m.iter().zip(pi) {
        if p != T::zero() {
            for (o, &a) in out.iter_mut().zip(row) {
                *o = *o + p * a;
            }
        }
    }
}

/// Bounds `(lower, upper)` on the game value certified by `(pi, w)`:
/// `min_h (M w)_h <= value <= max_i (pi^T M)_i`.
pub fn value_bounds<T: Scalar>(m: &[Vec<T>], pi: &[T], w: &[T]) -> (T, T) {
    let cols = m.first().map_or(0, Vec::len);
    let mut rl = vec![T::zero(); m.len()];
    let mut cp = vec![T::zero(); cols];
    row_losses(m, w, &mut rl);
    col_payoffs(m, pi, &mut cp);
    let lower = rl.into_iter().fold(T::infinity(), T::min);
    let upper = cp.into_iter().fold(T::neg_infinity(), T::max);
    (lower, upper)
}

/// `max_i (pi^T M)_i - min_h (M w)_h`; zero exactly at an equilibrium.
pub fn duality_gap<T: Scalar>(m: &[Vec<T>], pi: &[T], w: &[T]) -> T {
    let (lower, upper) = value_bounds(m, pi, w);
    upper - lower
}

/// Equilibrium certificate returned by [`solve_matrix_game`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSolution<T = f64> {
    /// Midpoint of the certified bounds; within `gap / 2` of the game value.
    pub value: T,
    pub pi_star: Vec<T>,
    pub w_star: Vec<T>,
    pub gap: T,
    pub iterations: u64,
}

/// Iteration cap for [`solve_matrix_game`].
pub const MAX_GAME_ITERATIONS: u64 = 100_000_000;

/// Default certificate tolerance for the OPT oracle.
pub const DEFAULT_GAME_TOL: f64 = 1e-6;

fn rm_plus_strategy<T: Scalar>(q: &[T], out: &mut [T]) {
    let total: T = q.iter().copied().sum();
    if total > T::zero() {
        for (o, &x) in out.iter_mut().zip(q) {
            *o = x / total;
        }
    } else {
        let u = T::one() / T::of(q.len() as f64);
        out.iter_mut().for_each(|o| *o = u);
    }
}

/// Solves `min_pi max_w pi^T M w` by regret-matching+ self-play with
/// alternating updates and linearly weighted averages.
///
/// Runs until the duality gap of the best certificate seen (averaged or
/// current iterates) is at most `tol`. The certificate, not the iteration
/// count, decides success.
pub fn solve_matrix_game<T: Scalar>(m: &[Vec<T>], tol: T) -> Result<GameSolution<T>> {
    solve_matrix_game_capped(m, tol, MAX_GAME_ITERATIONS)
}

pub fn solve_matrix_game_capped<T: Scalar>(m: &[Vec<T>], tol: T, max_iterations: u64) -> Result<GameSolution<T>> {
    let cols = check_matrix(m)?;
    if !(tol > T::zero()) {
        return validation(format!("tolerance must be positive, got {tol}"));
    }
    let rows = m.len();

    // A pure saddle point is found exactly without iterating.
    if let Some(sol) = pure_saddle(m) {
        return Ok(sol);
    }

    let mut q_row = vec![T::zero(); rows];
    let mut q_col = vec![T::zero(); cols];
    let mut pi = vec![T::zero(); rows];
    let mut w = vec![T::zero(); cols];
    let mut avg_pi = vec![T::zero(); rows];
    let mut avg_w = vec![T::zero(); cols];
    let mut rl = vec![T::zero(); rows];
    let mut cp = vec![T::zero(); cols];
    let mut weight_total = T::zero();

    rm_plus_strategy(&q_row, &mut pi);
    rm_plus_strategy(&q_col, &mut w);

    let mut best = (T::infinity(), pi.clone(), w.clone());
    let mut next_check = 16u64;
    let mut t = 0u64;
    while t < max_iterations {
        t += 1;
        // row player (minimizer) responds to the current column strategy
        row_losses(m, &w, &mut rl);
        let v: T = pi.iter().zip(&rl).map(|(&p, &l)| p * l).sum();
        for (q, &l) in q_row.iter_mut().zip(&rl) {
            *q = (*q + v - l).max(T::zero());
        }
        rm_plus_strategy(&q_row, &mut pi);
        // column player (maximizer) responds to the updated row strategy
        col_payoffs(m, &pi, &mut cp);
        let u: T = w.iter().zip(&cp).map(|(&p, &c)| p * c).sum();
        for (q, &c) in q_col.iter_mut().zip(&cp) {
            *q = (*q + c - u).max(T::zero());
        }
        rm_plus_strategy(&q_col, &mut w);

        let tw = T::of(t as f64);
        weight_total = weight_total + tw;
        for (a, &p) in avg_pi.iter_mut().zip(&pi) {
            *a = *a + tw * p;
        }
        for (a, &p) in avg_w.iter_mut().zip(&w) {
            *a = *a + tw * p;
        }

        if t == next_check || t == max_iterations {
            next_check = next_check + (next_check / 4).max(16);
            let ap: Vec<T> = avg_pi.iter().map(|&a| a / weight_total).collect();
            let aw: Vec<T> = avg_w.iter().map(|&a| a / weight_total).collect();
            let polished = if best.0 < T::of(POLISH_BELOW) {
                polish(m, &ap, &aw)
            } else {
                None
            };
            let candidates = [Some((ap, aw)), Some((pi.clone(), w.clone())), polished];
            for (cand_pi, cand_w) in candidates.into_iter().flatten() {
                let gap = duality_gap(m, &cand_pi, &cand_w);
                if gap < best.0 {
                    best = (gap, cand_pi, cand_w);
                }
            }
            if best.0 <= tol {
                break;
            }
        }
    }

    let (gap, pi_star, w_star) = best;
    if !(gap <= tol) {
        return Err(MdlError::Convergence {
            iterations: t,
            gap: gap.as_f64(),
            tol: tol.as_f64(),
        });
    }
    let (lower, upper) = value_bounds(m, &pi_star, &w_star);
    Ok(GameSolution {
        value: (lower + upper) / T::of(2.0),
        pi_star,
        w_star,
        gap,
        iterations: t,
    })
}

/// Averaged-play gap below which support polishing is attempted.
const POLISH_BELOW: f64 = 1e-2;

/// Guesses equilibrium supports from approximate strategies and solves the
/// equalizing linear systems on them. Only square supports are tried; the
/// caller keeps the result only if its certificate improves.
fn polish<T: Scalar>(m: &[Vec<T>], pi: &[T], w: &[T]) -> Option<(Vec<T>, Vec<T>)> {
    let mut best: Option<(T, Vec<T>, Vec<T>)> = None;
    for &theta in &[1e-2, 1e-3, 1e-4, 1e-6] {
        let theta = T::of(theta);
        let rows: Vec<usize> = (0..pi.len()).filter(|&h| pi[h] >= theta).collect();
        let cols: Vec<usize> = (0..w.len()).filter(|&c| w[c] >= theta).collect();
        if rows.len() != cols.len() || rows.is_empty() {
            continue;
        }
        // row strategy equalizes the support columns
        let a: Vec<Vec<T>> = cols.iter().map(|&c| rows.iter().map(|&h| m[h][c]).collect()).collect();
        let Some(p) = equalizer(&a) else { continue };
        // column strategy equalizes the support rows
        let b: Vec<Vec<T>> = rows.iter().map(|&h| cols.iter().map(|&c| m[h][c]).collect()).collect();
        let Some(q) = equalizer(&b) else { continue };
        let mut full_pi = vec![T::zero(); pi.len()];
        let mut full_w = vec![T::zero(); w.len()];
        rows.iter().zip(p).for_each(|(&h, x)| full_pi[h] = x);
        cols.iter().zip(q).for_each(|(&c, x)| full_w[c] = x);
        let gap = duality_gap(m, &full_pi, &full_w);
        if best.as_ref().is_none_or(|b| gap < b.0) {
            best = Some((gap, full_pi, full_w));
        }
    }
    best.map(|(_, p, q)| (p, q))
}

/// Solves `sum_j x_j a[r][j] = v` for every row `r`, `sum_j x_j = 1` for
/// `(x, v)`; returns `x` if it is (numerically) nonnegative.
fn equalizer<T: Scalar>(a: &[Vec<T>]) -> Option<Vec<T>> {
    let s = a.len();
    let n = s + 1;
    // augmented matrix over unknowns [x_1..x_s, v]
    let mut sys: Vec<Vec<T>> = Vec::with_capacity(n);
    for row in a {
        let mut eq: Vec<T> = row.clone();
        eq.push(-T::one());
        eq.push(T::zero());
        sys.push(eq);
    }
    let mut norm = vec![T::one(); s];
    norm.push(T::zero());
    norm.push(T::one());
    sys.push(norm);
    let sol = gauss_solve(sys)?;
    let x = &sol[..s];
    let floor = T::of(-1e-9);
    if x.iter().any(|&v| !(v >= floor)) {
        return None;
    }
    let clipped: Vec<T> = x.iter().map(|&v| v.max(T::zero())).collect();
    let total: T = clipped.iter().copied().sum();
    if !(total > T::zero()) {
        return None;
    }
    Some(clipped.into_iter().map(|v| v / total).collect())
}

/// Gaussian elimination with partial pivoting on an augmented `n x (n+1)` system.
fn gauss_solve<T: Scalar>(mut sys: Vec<Vec<T>>) -> Option<Vec<T>> {
    let n = sys.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&a, &b| {
            sys[a][col]
                .abs()
                .partial_cmp(&sys[b][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if !(sys[pivot][col].abs() > T::of(1e-12)) {
            return None;
        }
        sys.swap(col, pivot);
        for r in col + 1..n {
            let f = sys[r][col] / sys[col][col];
            if f != T::zero() {
                let (top, bottom) = sys.split_at_mut(r);
                for (x, &v) in bottom[0][col..].iter_mut().zip(&top[col][col..]) {
                    *x = *x - f * v;
                }
            }
        }
    }
    let mut x = vec![T::zero(); n];
    for r in (0..n).rev() {
        let mut acc = sys[r][n];
        for c in r + 1..n {
            acc = acc - sys[r][c] * x[c];
        }
        x[r] = acc / sys[r][r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Returns a pure equilibrium if one exists: a row whose worst column equals
/// the max-min value of the matrix. Ties go to the lowest index.
fn pure_saddle<T: Scalar>(m: &[Vec<T>]) -> Option<GameSolution<T>> {
    let row_max: Vec<T> = m
        .iter()
        .map(|row| row.iter().copied().fold(T::neg_infinity(), T::max))
        .collect();
    let cols = m[0].len();
    let col_min: Vec<T> = (0..cols)
        .map(|c| m.iter().map(|row| row[c]).fold(T::infinity(), T::min))
        .collect();
    let r = argmin(&row_max)?;
    let c = crate::scalar::argmax(&col_min)?;
    if row_max[r] != col_min[c] {
        return None;
    }
    let mut pi = vec![T::zero(); m.len()];
    let mut w = vec![T::zero(); cols];
    pi[r] = T::one();
    w[c] = T::one();
    Some(GameSolution {
        value: row_max[r],
        gap: duality_gap(m, &pi, &w),
        pi_star: pi,
        w_star: w,
        iterations: 0,
    })
}

/// One round of the bilinear game: adversary weights and the learner's reply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BilinearRound<T = f64> {
    pub weights: Vec<T>,
    /// Index into the candidate set of the chosen loss vector.
    pub choice: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BilinearTrajectory<T = f64> {
    pub eta: T,
    pub rounds: Vec<BilinearRound<T>>,
}

impl<T: Scalar> BilinearTrajectory<T> {
    /// Time-averaged adversary weights.
    pub fn average_weights(&self) -> Vec<T> {
        let k = self.rounds.first().map_or(0, |r| r.weights.len());
        let n = T::of(self.rounds.len() as f64);
        let mut avg = vec![T::zero(); k];
        for r in &self.rounds {
            for (a, &w) in avg.iter_mut().zip(&r.weights) {
                *a = *a + w;
            }
        }
        avg.into_iter().map(|a| a / n).collect()
    }

    /// Learner's empirical mixture over the candidate set (uniform over rounds).
    pub fn choice_distribution(&self, num_candidates: usize) -> Vec<T> {
        let mut counts = vec![0u64; num_candidates];
        for r in &self.rounds {
            counts[r.choice] += 1;
        }
        let n = T::of(self.rounds.len() as f64);
        counts.into_iter().map(|c| T::of(c as f64) / n).collect()
    }

    /// Duality gap of the averaged strategies in the game whose rows are `ys`.
    pub fn averaged_gap(&self, ys: &[Vec<T>]) -> T {
        duality_gap(ys, &self.choice_distribution(ys.len()), &self.average_weights())
    }

    /// `(1/T) sum_t <w^t, y^t>`.
    pub fn average_payoff(&self, ys: &[Vec<T>]) -> T {
        let total: T = self
            .rounds
            .iter()
            .map(|r| r.weights.iter().zip(&ys[r.choice]).map(|(&a, &b)| a * b).sum::<T>())
            .sum();
        total / T::of(self.rounds.len() as f64)
    }
}

/// Number of rounds `ceil(100 ln k / eps^2)`, at least 1.
pub fn bilinear_rounds(k: usize, eps: f64) -> u64 {
    ((100.0 * (k as f64).ln() / (eps * eps)).ceil() as u64).max(1)
}

/// Hedge for the bilinear game `min_{y in Y} max_{w in simplex} <w, y>`:
/// the adversary runs Hedge with `eta = eps / 10` and the learner best-responds.
pub fn run_bilinear_hedge<T: Scalar>(ys: &[Vec<T>], eps: T) -> Result<BilinearTrajectory<T>> {
    let k = check_matrix(ys)?;
    if !(eps > T::zero() && eps < T::one()) {
        return validation(format!("eps must lie in (0, 1), got {eps}"));
    }
    if ys.iter().flatten().any(|y| y.abs() > T::one()) {
        return validation("loss vectors must lie in [-1, 1]^k");
    }
    let rounds = bilinear_rounds(k, eps.as_f64());
    let mut hedge = HedgeWeights::uniform(k, eps / T::of(10.0))?;
    let mut out = Vec::with_capacity(rounds as usize);
    let mut scores = vec![T::zero(); ys.len()];
    for _ in 0..rounds {
        let w = hedge.normalize();
        row_losses(ys, &w, &mut scores);
        let choice = argmin(&scores).expect("nonempty candidate set");
        hedge.step_in_place(&ys[choice])?;
        out.push(BilinearRound { weights: w, choice });
    }
    Ok(BilinearTrajectory {
        eta: hedge.eta(),
        rounds: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_reward_is_identity() {
        let h = HedgeWeights::uniform(2, 0.01).unwrap();
        assert_eq!(h.hedge_step(&[0.0, 0.0]).unwrap().log_weights(), &[0.0, 0.0]);
    }

    #[test]
    fn ln2_step_gives_two_thirds() {
        let h = HedgeWeights::uniform(2, std::f64::consts::LN_2).unwrap();
        let w = h.hedge_step(&[1.0, 0.0]).unwrap().normalize();
        assert!((w[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((w[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn reward_out_of_range_rejected() {
        let h = HedgeWeights::uniform(2, 0.1).unwrap();
        assert!(h.hedge_step(&[1.0 + 1e-6, 0.0]).is_err());
        assert!(h.hedge_step(&[1.0 + 1e-10, 0.0]).is_ok());
        assert!(h.hedge_step(&[f64::NAN, 0.0]).is_err());
        assert!(h.hedge_step(&[0.0]).is_err());
        assert!(HedgeWeights::uniform(2, 0.0).is_err());
        assert!(HedgeWeights::<f64>::uniform(0, 0.1).is_err());
    }

    #[test]
    fn normalize_uniform_and_extreme() {
        let w = HedgeWeights::from_log_weights(vec![0.0f64; 3], 1.0)
            .unwrap()
            .normalize();
        for x in w {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        let w = softmax(&[700.0, 0.0]);
        assert_eq!(w[0], 1.0);
        assert!(w[1] > 0.0 && w[1] < 1e-300);
        let w = softmax(&[1e6f64, -1e6, 1e6]);
        assert!((w[0] - 0.5).abs() < 1e-15 && w[1] == 0.0);
    }

    #[test]
    fn matching_pennies() {
        let m = vec![vec![0.0f64, 1.0], vec![1.0, 0.0]];
        let sol = solve_matrix_game(&m, 1e-6).unwrap();
        assert!((sol.value - 0.5).abs() < 1e-6);
        assert!(sol.gap <= 1e-6);
        for x in sol.pi_star.iter().chain(&sol.w_star) {
            assert!((x - 0.5).abs() < 1e-6);
        }
        assert!(duality_gap(&m, &[0.5, 0.5], &[0.5, 0.5]).abs() < 1e-12);
        assert!((duality_gap(&m, &[1.0, 0.0], &[0.5, 0.5]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_row_dominates() {
        let m = vec![vec![0.3f64, 0.9], vec![0.0, 0.0], vec![1.0, -0.2]];
        let sol = solve_matrix_game(&m, 1e-6).unwrap();
        assert!(sol.value.abs() < 1e-6);
        assert!((sol.pi_star[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(solve_matrix_game(&[vec![f64::NAN]], 1e-6).is_err());
        assert!(solve_matrix_game::<f64>(&[], 1e-6).is_err());
        assert!(solve_matrix_game(&[vec![0.0]], 0.0).is_err());
        assert!(solve_matrix_game(&[vec![0.0, 1.0], vec![1.0]], 1e-6).is_err());
    }

    #[test]
    fn convergence_error_reports_gap() {
        let m = vec![vec![0.0, 1.0, 0.3], vec![1.0, 0.0, 0.6], vec![0.2, 0.7, 0.1]];
        match solve_matrix_game_capped(&m, 1e-12, 20) {
            Err(MdlError::Convergence { gap, iterations, .. }) => {
                assert!(gap > 1e-12);
                assert_eq!(iterations, 20);
            }
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn f32_game() {
        let m = vec![vec![0.0f32, 1.0], vec![1.0, 0.0]];
        let sol = solve_matrix_game(&m, 1e-4).unwrap();
        assert!((sol.value - 0.5).abs() < 1e-4);
    }

    #[test]
    fn bilinear_constant_game() {
        let ys = vec![vec![0.0f64; 3]];
        let traj = run_bilinear_hedge(&ys, 0.5).unwrap();
        assert_eq!(traj.rounds.len() as u64, bilinear_rounds(3, 0.5));
        for r in &traj.rounds {
            assert_eq!(r.choice, 0);
            for &x in &r.weights {
                assert!((x - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn bilinear_symmetric_game() {
        let ys = vec![vec![1.0f64, -1.0], vec![-1.0, 1.0]];
        let eps = 0.1;
        let traj = run_bilinear_hedge(&ys, eps).unwrap();
        assert_eq!(traj.rounds.len() as u64, bilinear_rounds(2, eps));
        assert!(traj.average_payoff(&ys) >= -eps);
        assert!(traj.averaged_gap(&ys) <= eps);
        for r in &traj.rounds {
            assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bilinear_rejects_bad_eps() {
        assert!(run_bilinear_hedge(&[vec![0.0]], 0.0).is_err());
        assert!(run_bilinear_hedge(&[vec![0.0]], 1.0).is_err());
        assert!(run_bilinear_hedge(&[vec![2.0]], 0.5).is_err());
    }

    fn brute_gap(m: &[Vec<f64>], pi: &[f64], w: &[f64]) -> f64 {
        let mut upper = f64::NEG_INFINITY;
        for c in 0..m[0].len() {
            let mut s = 0.0;
            for r in 0..m.len() {
                s += pi[r] * m[r][c];
            }
            upper = upper.max(s);
        }
        let mut lower = f64::INFINITY;
        for r in 0..m.len() {
            let mut s = 0.0;
            for c in 0..m[0].len() {
                s += m[r][c] * w[c];
            }
            lower = lower.min(s);
        }
        upper - lower
    }

    fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.01f64..1.0, n).prop_map(|v| {
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        })
    }

    proptest! {
        #[test]
        fn gap_matches_brute_force(
            m in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 3), 3),
            pi in simplex(3),
            w in simplex(3),
        ) {
            let g = duality_gap(&m, &pi, &w);
            prop_assert!((g - brute_gap(&m, &pi, &w)).abs() < 1e-12);
            prop_assert!(g >= -1e-12);
        }

        #[test]
        fn step_then_normalize_matches_closed_form(
            lw in proptest::collection::vec(-5.0f64..5.0, 4),
            r in proptest::collection::vec(-1.0f64..1.0, 4),
            eta in 0.001f64..2.0,
        ) {
            let h = HedgeWeights::from_log_weights(lw, eta).unwrap();
            let before = h.normalize();
            let after = h.hedge_step(&r).unwrap().normalize();
            let raw: Vec<f64> = before.iter().zip(&r).map(|(w, r)| w * (eta * r).exp()).collect();
            let z: f64 = raw.iter().sum();
            for (a, b) in after.iter().zip(&raw) {
                prop_assert!((a - b / z).abs() < 1e-12);
            }
        }

        #[test]
        fn normalize_shift_invariant(
            lw in proptest::collection::vec(-50.0f64..50.0, 1..6),
            c in -1e3f64..1e3,
        ) {
            let a = softmax(&lw);
            let shifted: Vec<f64> = lw.iter().map(|x| x + c).collect();
            let b = softmax(&shifted);
            prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn reward_shift_leaves_weights(
            r in proptest::collection::vec(-0.5f64..0.5, 3),
            c in -0.5f64..0.5,
        ) {
            let h = HedgeWeights::uniform(3, 0.3).unwrap();
            let a = h.hedge_step(&r).unwrap().normalize();
            let shifted: Vec<f64> = r.iter().map(|x| x + c).collect();
            let b = h.hedge_step(&shifted).unwrap().normalize();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn solver_value_between_pure_bounds(
            m in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 1..5), 1..6)
                .prop_filter("rectangular", |m| m.iter().all(|r| r.len() == m[0].len())),
        ) {
            let tol = 1e-6;
            let sol = solve_matrix_game(&m, tol).unwrap();
            prop_assert!(sol.gap <= tol);
            prop_assert!((duality_gap(&m, &sol.pi_star, &sol.w_star) - sol.gap).abs() < 1e-12);
            let minmax = m.iter().map(|r| r.iter().copied().fold(f64::MIN, f64::max)).fold(f64::MAX, f64::min);
            let maxmin = (0..m[0].len())
                .map(|c| m.iter().map(|r| r[c]).fold(f64::MAX, f64::min))
                .fold(f64::MIN, f64::max);
            prop_assert!(sol.value <= minmax + tol);
            prop_assert!(sol.value >= maxmin - tol);
        }
    }
}
