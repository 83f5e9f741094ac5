//! Trajectory statistics: the running-max norm, dyadic weight buckets and
//! growth segments.

use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::problem::INPUT_TOL;
use crate::scalar::{check_simplex, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint<T = f64> {
    /// 1-based round number.
    pub round: u64,
    pub w: Vec<T>,
}

/// Sequence of simplex vectors `w^1..w^T`.
///
/// With `stride > 1` only rounds `1, 1 + stride, ...` are stored, but the
/// per-coordinate running maxima always cover every pushed vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<T = f64> {
    k: usize,
    stride: u64,
    rounds: u64,
    points: Vec<TrajectoryPoint<T>>,
    running_max: Vec<T>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn new(k: usize, stride: u64) -> Result<Self> {
        if k == 0 || stride == 0 {
            return validation("trajectory needs k >= 1 and stride >= 1");
        }
        Ok(Self {
            k,
            stride,
            rounds: 0,
            points: Vec::new(),
            running_max: vec![T::zero(); k],
        })
    }

    /// Unthinned trajectory holding every vector in `ws`.
    pub fn from_vectors(ws: &[Vec<T>]) -> Result<Self> {
        let Some(first) = ws.first() else {
            return validation("trajectory is empty");
        };
        let mut traj = Self::new(first.len(), 1)?;
        for w in ws {
            traj.push(w)?;
        }
        Ok(traj)
    }

    pub fn push(&mut self, w: &[T]) -> Result<()> {
        check_simplex(w, self.k, INPUT_TOL, "trajectory entry")?;
        for (m, &x) in self.running_max.iter_mut().zip(w) {
            *m = m.max(x);
        }
        if self.rounds.is_multiple_of(self.stride) {
            self.points.push(TrajectoryPoint {
                round: self.rounds + 1,
                w: w.to_vec(),
            });
        }
        self.rounds += 1;
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn stride(&self) -> u64 {
        self.stride
    }

    /// Number of vectors pushed, stored or not.
    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    pub fn is_empty(&self) -> bool {
        self.rounds == 0
    }

    pub fn points(&self) -> &[TrajectoryPoint<T>] {
        &self.points
    }

    pub fn running_max(&self) -> &[T] {
        &self.running_max
    }
}

/// `sum_i max_t w_i^t`, which lies in `[1, k]`.
pub fn trajectory_norm<T: Scalar>(traj: &Trajectory<T>) -> Result<T> {
    if traj.is_empty() {
        return validation("trajectory is empty");
    }
    Ok(traj.running_max.iter().copied().sum())
}

/// Coordinates grouped by the dyadic range of their running max:
/// bucket `j >= 1` holds `i` with `max_t w_i^t` in `(2^-j, 2^-(j-1)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightBuckets {
    /// `(j, members)` for every nonempty bucket, in increasing `j`.
    pub buckets: Vec<(u32, Vec<usize>)>,
    /// Coordinates whose running max is zero or at most `2^-max_j`.
    pub underflow: Vec<usize>,
}

impl WeightBuckets {
    /// `(j, |W_j|)` pairs.
    pub fn sizes(&self) -> Vec<(u32, usize)> {
        self.buckets.iter().map(|(j, m)| (*j, m.len())).collect()
    }

    pub fn total(&self) -> usize {
        self.buckets.iter().map(|(_, m)| m.len()).sum::<usize>() + self.underflow.len()
    }
}

/// Bucket index of a running max, or `None` for the underflow bucket.
pub fn bucket_index<T: Scalar>(max_w: T, max_j: u32) -> Option<u32> {
    if !(max_w > T::zero()) {
        return None;
    }
    let mut j = 1;
    let mut lower = T::of(0.5);
    while max_w <= lower {
        j += 1;
        if j > max_j {
            return None;
        }
        lower = lower * T::of(0.5);
    }
    Some(j)
}

/// Largest bucket index reported by [`weight_buckets`]; smaller maxima underflow.
pub const MAX_BUCKET: u32 = 1000;

pub fn weight_buckets<T: Scalar>(traj: &Trajectory<T>) -> Result<WeightBuckets> {
    if traj.is_empty() {
        return validation("trajectory is empty");
    }
    let mut buckets: Vec<(u32, Vec<usize>)> = Vec::new();
    let mut underflow = Vec::new();
    for (i, &m) in traj.running_max.iter().enumerate() {
        match bucket_index(m, MAX_BUCKET) {
            Some(j) => match buckets.binary_search_by_key(&j, |b| b.0) {
                Ok(pos) => buckets[pos].1.push(i),
                Err(pos) => buckets.insert(pos, (j, vec![i])),
            },
            None => underflow.push(i),
        }
    }
    Ok(WeightBuckets { buckets, underflow })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub t1: u64,
    pub t2: u64,
    pub subset: Vec<usize>,
}

/// Finds `(p, q, x)`-segments of the stored trajectory points.
///
/// For a subset `I` with weight sum `s_t`, a segment `(t1, t2)` has
/// `p/2 <= s_t1 <= p`, `s_t2 >= p e^x` and `s_t >= q` for all stored `t` in
/// `[t1, t2]`. Scanning left to right, each segment starts at the earliest
/// admissible `t1` and ends at the latest admissible `t2`; the next search
/// resumes at `t2`. `index_sets = None` searches all singletons.
pub fn find_segments<T: Scalar>(
    traj: &Trajectory<T>,
    p: T,
    q: T,
    x: T,
    index_sets: Option<&[Vec<usize>]>,
) -> Result<Vec<Segment>> {
    if !(p > T::zero() && q > T::zero() && x > T::zero()) {
        return validation("segment parameters p, q, x must be positive");
    }
    let singletons: Vec<Vec<usize>>;
    let sets = match index_sets {
        Some(s) => s,
        None => {
            singletons = (0..traj.k).map(|i| vec![i]).collect();
            &singletons
        }
    };
    let half = p * T::of(0.5);
    let target = p * x.exp();
    let mut out = Vec::new();
    for set in sets {
        if set.iter().any(|&i| i >= traj.k) {
            return validation(format!("index set {set:?} out of range for k = {}", traj.k));
        }
        let sums: Vec<T> = traj
            .points
            .iter()
            .map(|pt| set.iter().map(|&i| pt.w[i]).sum())
            .collect();
        let mut a = 0;
        while a < sums.len() {
            let s = sums[a];
            if !(s >= half && s <= p && s >= q) {
                a += 1;
                continue;
            }
            let mut end = None;
            let mut b = a + 1;
            while b < sums.len() && sums[b] >= q {
                if sums[b] >= target {
                    end = Some(b);
                }
                b += 1;
            }
            match end {
                Some(e) => {
                    out.push(Segment {
                        t1: traj.points[a].round,
                        t2: traj.points[e].round,
                        subset: set.clone(),
                    });
                    a = e;
                }
                None => a += 1,
            }
        }
    }
    Ok(out)
}
