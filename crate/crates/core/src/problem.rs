//! Problem definition: a finite set of data distributions, a finite hypothesis
//! class and discrete loss tables, plus exact evaluation of population losses.
//!
//! A loss table gives, for every (loss function, hypothesis, distribution)
//! triple, the law of the loss value of that hypothesis on a fresh sample from
//! that distribution. All population quantities are finite sums over these
//! tables and are computed exactly.

use serde::{Deserialize, Serialize};

use crate::error::{validation, MdlError, Result};
use crate::scalar::{check_simplex, Scalar};

/// Tolerance used when validating constructed probability tables.
pub const CONSTRUCTION_TOL: f64 = 1e-12;
/// Tolerance used when validating caller-supplied simplex vectors.
pub const INPUT_TOL: f64 = 1e-9;

/// A finite discrete distribution over loss values in [-1, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LossDist<T = f64> {
    atoms: Vec<(T, T)>,
}

impl<T: Scalar> LossDist<T> {
    pub fn new(atoms: Vec<(T, T)>) -> Result<Self> {
        let dist = Self { atoms };
        dist.validate()?;
        Ok(dist)
    }

    /// Point mass at `value`.
    pub fn constant(value: T) -> Result<Self> {
        Self::new(vec![(value, T::one())])
    }

    /// Two-point law on {`lo`, `hi`} with `P(hi) = p_hi`.
    pub fn two_point(lo: T, hi: T, p_hi: T) -> Result<Self> {
        Self::new(vec![(lo, T::one() - p_hi), (hi, p_hi)])
    }

    fn validate(&self) -> Result<()> {
        if self.atoms.is_empty() {
            return validation("loss distribution has no atoms");
        }
        let mut total = T::zero();
        for &(v, p) in &self.atoms {
            if !v.is_finite() || v < -T::one() || v > T::one() {
                return validation(format!("loss value {v} outside [-1, 1]"));
            }
            if !p.is_finite() || p < T::zero() {
                return validation(format!("atom probability {p} is negative or non-finite"));
            }
            total = total + p;
        }
        if (total - T::one()).abs().as_f64() > CONSTRUCTION_TOL {
            return validation(format!("atom probabilities sum to {total}, not 1"));
        }
        Ok(())
    }

    pub fn atoms(&self) -> &[(T, T)] {
        &self.atoms
    }

    pub fn mean(&self) -> T {
        self.atoms.iter().map(|&(v, p)| v * p).sum()
    }

    pub fn variance(&self) -> T {
        let m = self.mean();
        self.atoms.iter().map(|&(v, p)| p * (v - m) * (v - m)).sum()
    }

    /// Atom index selected by a uniform draw `u` in [0, 1) (inverse CDF).
    pub fn atom_at(&self, u: T) -> usize {
        let mut acc = T::zero();
        for (j, &(_, p)) in self.atoms.iter().enumerate() {
            acc = acc + p;
            if u < acc {
                return j;
            }
        }
        // u landed in the rounding slack above the last cumulative sum
        self.atoms.iter().rposition(|&(_, p)| p > T::zero()).unwrap_or(0)
    }
}

/// The ground-truth world: `k` distributions, `H` hypotheses and `R` loss tables.
///
/// `losses[l][h][i]` is the loss law of hypothesis `h` on distribution `i`
/// under loss function `l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceDoc<T>", into = "InstanceDoc<T>")]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct Instance<T = f64> {
    k: usize,
    vc_dim: usize,
    hypotheses: Vec<String>,
    losses: Vec<Vec<Vec<LossDist<T>>>>,
    means: Vec<Vec<Vec<T>>>,
}

/// On-disk layout of an [`Instance`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDoc<T> {
    k: usize,
    #[serde(rename = "R")]
    r: usize,
    d: usize,
    hypotheses: Vec<String>,
    losses: Vec<Vec<Vec<LossDist<T>>>>,
}

impl<T: Scalar> TryFrom<InstanceDoc<T>> for Instance<T> {
    type Error = MdlError;

    fn try_from(doc: InstanceDoc<T>) -> Result<Self> {
        let inst = Instance::new(doc.hypotheses, doc.losses, Some(doc.d))?;
        if inst.k != doc.k || inst.num_losses() != doc.r {
            return validation(format!(
                "declared k={}, R={} disagree with the loss tables (k={}, R={})",
                doc.k,
                doc.r,
                inst.k,
                inst.num_losses()
            ));
        }
        Ok(inst)
    }
}

impl<T: Scalar> From<Instance<T>> for InstanceDoc<T> {
    fn from(inst: Instance<T>) -> Self {
        InstanceDoc {
            k: inst.k,
            r: inst.losses.len(),
            d: inst.vc_dim,
            hypotheses: inst.hypotheses,
            losses: inst.losses,
        }
    }
}

/// `ceil(log2(h))`, floored at 1.
pub fn default_vc_dim(num_hypotheses: usize) -> usize {
    let mut d = 0;
    while (1usize << d) < num_hypotheses {
        d += 1;
    }
    d.max(1)
}

impl<T: Scalar> Instance<T> {
    /// Builds an instance from `losses[l][h][i]`. `vc_dim` defaults to `ceil(log2 H)`.
    pub fn new(hypotheses: Vec<String>, losses: Vec<Vec<Vec<LossDist<T>>>>, vc_dim: Option<usize>) -> Result<Self> {
        let h_count = hypotheses.len();
        if h_count == 0 {
            return validation("instance needs at least one hypothesis");
        }
        if losses.is_empty() {
            return validation("instance needs at least one loss function");
        }
        let mut seen = std::collections::HashSet::new();
        for name in &hypotheses {
            if !seen.insert(name.as_str()) {
                return validation(format!("duplicate hypothesis id {name:?}"));
            }
        }
        let k = losses[0].first().map_or(0, Vec::len);
        if k == 0 {
            return validation("instance needs at least one distribution");
        }
        for (l, per_h) in losses.iter().enumerate() {
            if per_h.len() != h_count {
                return validation(format!("loss {l}: {} hypothesis rows, expected {h_count}", per_h.len()));
            }
            for (h, per_i) in per_h.iter().enumerate() {
                if per_i.len() != k {
                    return validation(format!(
                        "loss {l}, hypothesis {h}: {} distributions, expected {k}",
                        per_i.len()
                    ));
                }
                for dist in per_i {
                    dist.validate()?;
                }
            }
        }
        let vc_dim = vc_dim.unwrap_or_else(|| default_vc_dim(h_count));
        if vc_dim == 0 {
            return validation("vc_dim_proxy must be at least 1");
        }
        let means = losses
            .iter()
            .map(|per_h| {
                per_h
                    .iter()
                    .map(|per_i| per_i.iter().map(LossDist::mean).collect())
                    .collect()
            })
            .collect();
        Ok(Self {
            k,
            vc_dim,
            hypotheses,
            losses,
            means,
        })
    }

    /// Single-loss instance from `tables[h][i]`, with hypotheses named `h0, h1, ...`.
    pub fn single_loss(tables: Vec<Vec<LossDist<T>>>, vc_dim: Option<usize>) -> Result<Self> {
        let names = (0..tables.len()).map(|h| format!("h{h}")).collect();
        Self::new(names, vec![tables], vc_dim)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_hypotheses(&self) -> usize {
        self.hypotheses.len()
    }

    /// Number of loss functions (`R`).
    pub fn num_losses(&self) -> usize {
        self.losses.len()
    }

    pub fn vc_dim(&self) -> usize {
        self.vc_dim
    }

    pub fn hypotheses(&self) -> &[String] {
        &self.hypotheses
    }

    pub fn hypothesis_index(&self, id: &str) -> Result<usize> {
        self.hypotheses
            .iter()
            .position(|h| h == id)
            .ok_or_else(|| MdlError::Domain(format!("unknown hypothesis {id:?}")))
    }

    pub fn check_hypothesis(&self, h: usize) -> Result<()> {
        if h >= self.hypotheses.len() {
            return Err(MdlError::Domain(format!(
                "hypothesis index {h} out of range (H = {})",
                self.hypotheses.len()
            )));
        }
        Ok(())
    }

    pub fn check_loss(&self, l: usize) -> Result<()> {
        if l >= self.losses.len() {
            return Err(MdlError::Domain(format!(
                "loss index {l} out of range (R = {})",
                self.losses.len()
            )));
        }
        Ok(())
    }

    pub fn table(&self, l: usize, h: usize, i: usize) -> &LossDist<T> {
        &self.losses[l][h][i]
    }

    /// Exact `E_{D_i}[loss_l(h, .)]`.
    pub fn mean(&self, l: usize, h: usize, i: usize) -> T {
        self.means[l][h][i]
    }

    /// `H x k` matrix of exact per-distribution losses under loss `l`.
    pub fn loss_matrix(&self, l: usize) -> Vec<Vec<T>> {
        self.means[l].clone()
    }

    /// `H x (k R)` matrix over (distribution, loss) columns, column `i * R + l`.
    pub fn objective_matrix(&self) -> Vec<Vec<T>> {
        let r = self.num_losses();
        (0..self.num_hypotheses())
            .map(|h| (0..self.k * r).map(|c| self.means[c % r][h][c / r]).collect())
            .collect()
    }

    /// Same tables with loss values and probabilities converted to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Instance<U> {
        let losses = self
            .losses
            .iter()
            .map(|per_h| {
                per_h
                    .iter()
                    .map(|per_i| {
                        per_i
                            .iter()
                            .map(|d| LossDist {
                                atoms: d
                                    .atoms
                                    .iter()
                                    .map(|&(v, p)| (U::of(v.as_f64()), U::of(p.as_f64())))
                                    .collect(),
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect::<Vec<Vec<Vec<LossDist<U>>>>>();
        let means = losses
            .iter()
            .map(|per_h: &Vec<Vec<LossDist<U>>>| {
                per_h
                    .iter()
                    .map(|per_i| per_i.iter().map(LossDist::mean).collect())
                    .collect()
            })
            .collect();
        Instance {
            k: self.k,
            vc_dim: self.vc_dim,
            hypotheses: self.hypotheses.clone(),
            losses,
            means,
        }
    }
}

/// A probability distribution over hypotheses (indices into the instance's list).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomizedHypothesis<T = f64> {
    support: Vec<usize>,
    weights: Vec<T>,
}

impl<T: Scalar> RandomizedHypothesis<T> {
    pub fn new(support: Vec<usize>, weights: Vec<T>) -> Result<Self> {
        if support.is_empty() {
            return validation("randomized hypothesis has empty support");
        }
        if support.len() != weights.len() {
            return validation("support and weights differ in length");
        }
        let mut sorted = support.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return validation("support entries must be distinct");
        }
        check_simplex(&weights, support.len(), CONSTRUCTION_TOL, "hypothesis weights")?;
        Ok(Self { support, weights })
    }

    pub fn point(h: usize) -> Self {
        Self {
            support: vec![h],
            weights: vec![T::one()],
        }
    }

    pub fn uniform(support: Vec<usize>) -> Result<Self> {
        let n = T::of(support.len() as f64);
        let weights = vec![T::one() / n; support.len()];
        Self::new(support, weights)
    }

    /// Empirical law of a sequence of hypothesis picks, merged by identity and
    /// sorted by index.
    pub fn from_picks(picks: &[usize]) -> Result<Self> {
        let mut counts = std::collections::BTreeMap::new();
        for &h in picks {
            *counts.entry(h).or_insert(0u64) += 1;
        }
        let total = T::of(picks.len() as f64);
        let (support, weights) = counts.into_iter().map(|(h, c)| (h, T::of(c as f64) / total)).unzip();
        Self::new(support, weights)
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        self.support.iter().copied().zip(self.weights.iter().copied())
    }

    fn check_against(&self, inst: &Instance<T>) -> Result<()> {
        self.support.iter().try_for_each(|&h| inst.check_hypothesis(h))
    }
}

/// `L(h, w) = sum_i w_i E_{D_i}[loss_l(h, .)]`, exact.
pub fn exact_mixture_loss<T: Scalar>(inst: &Instance<T>, h: usize, w: &[T], l: usize) -> Result<T> {
    inst.check_hypothesis(h)?;
    inst.check_loss(l)?;
    check_simplex(w, inst.k(), INPUT_TOL, "mixture weights")?;
    Ok(w.iter().enumerate().map(|(i, &wi)| wi * inst.mean(l, h, i)).sum())
}

/// Exact expected loss of `pi` on every (distribution, loss) column, column `i * R + l`.
pub fn exact_column_losses<T: Scalar>(inst: &Instance<T>, pi: &RandomizedHypothesis<T>) -> Result<Vec<T>> {
    pi.check_against(inst)?;
    let r = inst.num_losses();
    Ok((0..inst.k() * r)
        .map(|c| pi.iter().map(|(h, p)| p * inst.mean(c % r, h, c / r)).sum())
        .collect())
}

/// `max_{i, l} E_{h ~ pi} E_{D_i}[loss_l(h, .)]`.
pub fn exact_worst_case_loss<T: Scalar>(inst: &Instance<T>, pi: &RandomizedHypothesis<T>) -> Result<T> {
    let cols = exact_column_losses(inst, pi)?;
    Ok(cols.into_iter().fold(T::neg_infinity(), T::max))
}

/// Worst-case loss of `pi` minus the game value `opt`. Can be slightly
/// negative when `opt` carries solver error.
pub fn optimality_gap<T: Scalar>(inst: &Instance<T>, pi: &RandomizedHypothesis<T>, opt: T) -> Result<T> {
    if !opt.is_finite() {
        return validation("opt value must be finite");
    }
    Ok(exact_worst_case_loss(inst, pi)? - opt)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(v: f64) -> LossDist {
        LossDist::constant(v).unwrap()
    }

    fn identity2() -> Instance {
        // L(h_j, e_i) = 1{i = j}
        Instance::single_loss(vec![vec![c(1.0), c(0.0)], vec![c(0.0), c(1.0)]], None).unwrap()
    }

    #[test]
    fn mixture_single_atom() {
        let inst = Instance::single_loss(vec![vec![c(0.3)]], None).unwrap();
        assert!((exact_mixture_loss(&inst, 0, &[1.0], 0).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn mixture_linear_in_w() {
        let tables = vec![vec![
            LossDist::two_point(0.0f64, 1.0, 0.2).unwrap(),
            LossDist::two_point(0.0, 1.0, 0.8).unwrap(),
        ]];
        let inst = Instance::single_loss(tables, None).unwrap();
        assert!((exact_mixture_loss(&inst, 0, &[0.5, 0.5], 0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mixture_errors() {
        let inst = identity2();
        assert!(matches!(
            exact_mixture_loss(&inst, 5, &[0.5, 0.5], 0),
            Err(MdlError::Domain(_))
        ));
        assert!(matches!(
            exact_mixture_loss(&inst, 0, &[0.5, 0.6], 0),
            Err(MdlError::Validation(_))
        ));
        assert!(matches!(
            exact_mixture_loss(&inst, 0, &[0.5, 0.5], 1),
            Err(MdlError::Domain(_))
        ));
        assert!(inst.hypothesis_index("nope").is_err());
        assert_eq!(inst.hypothesis_index("h1").unwrap(), 1);
    }

    #[test]
    fn worst_case_symmetric() {
        let inst = identity2();
        let pi = RandomizedHypothesis::uniform(vec![0, 1]).unwrap();
        assert!((exact_worst_case_loss(&inst, &pi).unwrap() - 0.5).abs() < 1e-15);
        let point = RandomizedHypothesis::point(0);
        assert_eq!(exact_worst_case_loss(&inst, &point).unwrap(), 1.0);
        assert!((optimality_gap(&inst, &point, 0.5).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn worst_case_single_distribution_is_average() {
        let tables = vec![
            vec![c(0.2)],
            vec![c(0.6)],
            vec![LossDist::two_point(-1.0, 1.0, 0.25).unwrap()],
        ];
        let inst = Instance::single_loss(tables, None).unwrap();
        let pi = RandomizedHypothesis::new(vec![0, 1, 2], vec![0.5, 0.25, 0.25]).unwrap();
        let expected = 0.5 * 0.2 + 0.25 * 0.6 + 0.25 * (-0.5);
        assert!((exact_worst_case_loss(&inst, &pi).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn table_validation() {
        assert!(LossDist::new(vec![(1.5, 1.0)]).is_err());
        assert!(LossDist::new(vec![(0.5, 0.7)]).is_err());
        assert!(LossDist::new(vec![(0.5, -0.1), (0.2, 1.1)]).is_err());
        assert!(LossDist::<f64>::new(vec![]).is_err());
        assert!(Instance::<f64>::single_loss(vec![], None).is_err());
        assert!(Instance::single_loss(vec![vec![c(0.0)], vec![c(0.0), c(1.0)]], None).is_err());
        assert!(Instance::new(
            vec!["a".into(), "a".into()],
            vec![vec![vec![c(0.0)], vec![c(0.0)]]],
            None
        )
        .is_err());
        assert!(Instance::single_loss(vec![vec![c(0.0)]], Some(0)).is_err());
    }

    #[test]
    fn randomized_hypothesis_validation() {
        assert!(RandomizedHypothesis::new(vec![0, 0], vec![0.5, 0.5]).is_err());
        assert!(RandomizedHypothesis::new(vec![0, 1], vec![0.5, 0.6]).is_err());
        assert!(RandomizedHypothesis::<f64>::new(vec![], vec![]).is_err());
        let pi = RandomizedHypothesis::<f64>::from_picks(&[2, 0, 2, 2]).unwrap();
        assert_eq!(pi.support(), &[0, 2]);
        assert_eq!(pi.weights(), &[0.25, 0.75]);
        let inst = identity2();
        assert!(exact_worst_case_loss(&inst, &RandomizedHypothesis::point(7)).is_err());
    }

    #[test]
    fn default_vc_dim_is_ceil_log2() {
        assert_eq!(default_vc_dim(1), 1);
        assert_eq!(default_vc_dim(2), 1);
        assert_eq!(default_vc_dim(8), 3);
        assert_eq!(default_vc_dim(9), 4);
        assert_eq!(default_vc_dim(64), 6);
    }

    #[test]
    fn json_round_trip_byte_stable() {
        let inst = Instance::single_loss(
            vec![vec![LossDist::two_point(0.0, 1.0, 0.3).unwrap(), c(-0.25)]],
            Some(2),
        )
        .unwrap();
        let s = crate::json::to_canonical_string(&inst).unwrap();
        assert!(s.starts_with("{\"k\":2,\"R\":1,\"d\":2,\"hypotheses\":[\"h0\"],\"losses\":[[[["));
        let back: Instance = serde_json::from_str(&s).unwrap();
        assert_eq!(back, inst);
        assert_eq!(crate::json::to_canonical_string(&back).unwrap(), s);
    }

    #[test]
    fn json_rejects_inconsistent_header() {
        let s = r#"{"k":3,"R":1,"d":1,"hypotheses":["a"],"losses":[[[[0.0,1.0]]]]}"#;
        assert!(serde_json::from_str::<Instance>(s).is_err());
        let s = r#"{"k":1,"R":1,"d":1,"hypotheses":["a"],"losses":[[[[0.0,0.5]]]]}"#;
        assert!(serde_json::from_str::<Instance>(s).is_err());
    }

    #[test]
    fn f32_instance_evaluates() {
        let inst: Instance<f32> = identity2().cast();
        let pi = RandomizedHypothesis::<f32>::uniform(vec![0, 1]).unwrap();
        assert!((exact_worst_case_loss(&inst, &pi).unwrap() - 0.5).abs() < 1e-6);
    }
}
