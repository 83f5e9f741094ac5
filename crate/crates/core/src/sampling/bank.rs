//! The reusable sample bank.
//!
//! A draw from distribution `i` realizes the loss of every (loss function,
//! hypothesis) column at one sample point. Algorithms only ever read sums of
//! these losses over prefixes of the draw sequence, so the bank stores the
//! sequence as cumulative atom counts at a sorted set of prefix marks instead
//! of individual draws. Appending `n` draws is one multinomial draw; a prefix
//! that ends inside a stored chunk is resolved by a multivariate hypergeometric
//! split of that chunk, which is recorded so every later read of the same
//! prefix sees the same values. By exchangeability this is an exact simulation
//! of an append-only i.i.d. sequence read at those prefixes.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Hypergeometric};
use serde::{Deserialize, Serialize};

use super::rng::{Purpose, SamplerState};
use crate::error::{MdlError, Result};
use crate::problem::Instance;

/// How the losses of different columns at the same sample point are coupled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossCoupling {
    /// Each column's atom is drawn independently.
    #[default]
    Independent,
    /// All columns read one shared uniform through their inverse CDFs.
    Comonotone,
}

#[derive(Debug, Clone)]
enum Layout {
    /// Column `c` owns cells `offsets[c]..offsets[c + 1]`, one per atom.
    Independent {
        offsets: Vec<usize>,
        probs: Vec<f64>,
        values: Vec<f64>,
    },
    /// Cells are the pieces of [0, 1) cut at every column's CDF breakpoints;
    /// `atom_of[c][cell]` is the atom column `c` takes on that piece.
    Comonotone {
        probs: Vec<f64>,
        atom_of: Vec<Vec<usize>>,
        values: Vec<Vec<f64>>,
    },
}

impl Layout {
    fn build(inst: &Instance, i: usize, coupling: LossCoupling) -> Self {
        let h_count = inst.num_hypotheses();
        let tables: Vec<_> = (0..inst.num_losses())
            .flat_map(|l| (0..h_count).map(move |h| (l, h)))
            .map(|(l, h)| inst.table(l, h, i))
            .collect();
        match coupling {
            LossCoupling::Independent => {
                let mut offsets = vec![0];
                let mut probs = Vec::new();
                let mut values = Vec::new();
                for t in &tables {
                    for &(v, p) in t.atoms() {
                        values.push(v);
                        probs.push(p);
                    }
                    offsets.push(values.len());
                }
                Layout::Independent { offsets, probs, values }
            }
            LossCoupling::Comonotone => {
                let mut cuts: Vec<f64> = vec![0.0, 1.0];
                for t in &tables {
                    let mut acc = 0.0;
                    for &(_, p) in t.atoms() {
                        acc += p;
                        if acc < 1.0 {
                            cuts.push(acc);
                        }
                    }
                }
                cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite cuts"));
                cuts.dedup();
                let cells: Vec<(f64, f64)> = cuts.windows(2).map(|w| (w[0], w[1])).filter(|(a, b)| b > a).collect();
                let probs = cells.iter().map(|(a, b)| b - a).collect();
                let atom_of: Vec<Vec<usize>> = tables
                    .iter()
                    .map(|t| cells.iter().map(|(a, b)| t.atom_at(0.5 * (a + b))).collect())
                    .collect();
                let values = tables
                    .iter()
                    .zip(&atom_of)
                    .map(|(t, atoms)| atoms.iter().map(|&j| t.atoms()[j].0).collect())
                    .collect();
                Layout::Comonotone { probs, atom_of, values }
            }
        }
    }

    fn num_cells(&self) -> usize {
        match self {
            Layout::Independent { probs, .. } | Layout::Comonotone { probs, .. } => probs.len(),
        }
    }

    fn num_columns(&self) -> usize {
        match self {
            Layout::Independent { offsets, .. } => offsets.len() - 1,
            Layout::Comonotone { atom_of, .. } => atom_of.len(),
        }
    }

    /// Groups of cells whose counts sum to the chunk size.
    #[allow(clippy::single_range_in_vec_init)]
    fn groups(&self) -> Vec<std::ops::Range<usize>> {
        match self {
            Layout::Independent { offsets, .. } => offsets.windows(2).map(|w| w[0]..w[1]).collect(),
            Layout::Comonotone { probs, .. } => vec![0..probs.len()],
        }
    }

    fn probs(&self) -> &[f64] {
        match self {
            Layout::Independent { probs, .. } | Layout::Comonotone { probs, .. } => probs,
        }
    }

    fn column_sums(&self, counts: &[u64]) -> Vec<f64> {
        match self {
            Layout::Independent { offsets, values, .. } => offsets
                .windows(2)
                .map(|w| (w[0]..w[1]).map(|c| counts[c] as f64 * values[c]).sum())
                .collect(),
            Layout::Comonotone { values, .. } => values
                .iter()
                .map(|vals| vals.iter().zip(counts).map(|(v, &n)| n as f64 * v).sum())
                .collect(),
        }
    }

    /// Per-column histogram over that column's atoms.
    fn atom_histogram(&self, inst: &Instance, i: usize, counts: &[u64]) -> Vec<Vec<u64>> {
        match self {
            Layout::Independent { offsets, .. } => offsets.windows(2).map(|w| counts[w[0]..w[1]].to_vec()).collect(),
            Layout::Comonotone { atom_of, .. } => {
                let h_count = inst.num_hypotheses();
                atom_of
                    .iter()
                    .enumerate()
                    .map(|(c, atoms)| {
                        let table = inst.table(c / h_count, c % h_count, i);
                        let mut hist = vec![0u64; table.atoms().len()];
                        for (cell, &j) in atoms.iter().enumerate() {
                            hist[j] += counts[cell];
                        }
                        hist
                    })
                    .collect()
            }
        }
    }
}

/// Cumulative counts and per-column loss sums of the first `mark` draws.
#[derive(Debug, Clone)]
struct Mark {
    counts: Vec<u64>,
    sums: Vec<f64>,
}

#[derive(Debug, Clone)]
struct DistBank {
    layout: Layout,
    marks: BTreeMap<u64, Mark>,
}

impl DistBank {
    fn new(layout: Layout) -> Self {
        let mut marks = BTreeMap::new();
        marks.insert(
            0,
            Mark {
                counts: vec![0; layout.num_cells()],
                sums: vec![0.0; layout.num_columns()],
            },
        );
        Self { layout, marks }
    }

    fn size(&self) -> u64 {
        *self.marks.keys().next_back().expect("mark 0 always present")
    }

    fn last(&self) -> &Mark {
        self.marks.values().next_back().expect("mark 0 always present")
    }

    fn append<R: Rng>(&mut self, n: u64, rng: &mut R) {
        if n == 0 {
            return;
        }
        let mut chunk = vec![0u64; self.layout.num_cells()];
        let probs = self.layout.probs();
        for group in self.layout.groups() {
            multinomial(n, &probs[group.clone()], &mut chunk[group], rng);
        }
        let prev = self.last();
        let sums_delta = self.layout.column_sums(&chunk);
        let mark = Mark {
            counts: prev.counts.iter().zip(&chunk).map(|(a, b)| a + b).collect(),
            sums: prev.sums.iter().zip(&sums_delta).map(|(a, b)| a + b).collect(),
        };
        let size = self.size();
        self.marks.insert(size + n, mark);
    }

    fn prefix<R: Rng>(&mut self, m: u64, rng: &mut R) -> Result<&Mark> {
        if m > self.size() {
            return Err(MdlError::Precondition(format!(
                "prefix of {m} draws requested from a bank holding {}",
                self.size()
            )));
        }
        if !self.marks.contains_key(&m) {
            let (&lo, lo_mark) = self.marks.range(..m).next_back().expect("mark 0 precedes m");
            let (&hi, hi_mark) = self.marks.range(m..).next().expect("m below bank size");
            let chunk: Vec<u64> = hi_mark.counts.iter().zip(&lo_mark.counts).map(|(a, b)| a - b).collect();
            let mut part = vec![0u64; chunk.len()];
            for group in self.layout.groups() {
                hypergeometric_split(hi - lo, m - lo, &chunk[group.clone()], &mut part[group], rng)?;
            }
            let sums_delta = self.layout.column_sums(&part);
            let mark = Mark {
                counts: lo_mark.counts.iter().zip(&part).map(|(a, b)| a + b).collect(),
                sums: lo_mark.sums.iter().zip(&sums_delta).map(|(a, b)| a + b).collect(),
            };
            self.marks.insert(m, mark);
        }
        Ok(&self.marks[&m])
    }
}

/// Sequential-binomial multinomial draw of `n` trials over `probs` into `out`.
fn multinomial<R: Rng>(n: u64, probs: &[f64], out: &mut [u64], rng: &mut R) {
    let mut left = n;
    let mut mass: f64 = probs.iter().sum();
    let last = probs.len() - 1;
    for (j, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if j == last {
            out[j] = left;
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let x = if q >= 1.0 {
            left
        } else if q <= 0.0 {
            0
        } else {
            Binomial::new(left, q).expect("valid binomial").sample(rng)
        };
        out[j] = x;
        left -= x;
        mass -= p;
    }
}

/// Counts in the first `m` of `total` exchangeable draws whose category counts
/// are `counts`.
fn hypergeometric_split<R: Rng>(total: u64, m: u64, counts: &[u64], out: &mut [u64], rng: &mut R) -> Result<()> {
    let mut pop = total;
    let mut left = m;
    for (j, &c) in counts.iter().enumerate() {
        if left == 0 {
            break;
        }
        let x = if c == pop {
            left
        } else if c == 0 {
            0
        } else {
            hypergeometric(pop, c, left, rng)?
        };
        out[j] = x;
        pop -= c;
        left -= x;
    }
    if left != 0 {
        return Err(MdlError::Invariant("hypergeometric split left draws unassigned".into()));
    }
    Ok(())
}

/// Number of marked items among `draws` taken without replacement from `pop`
/// items of which `marked` are marked.
///
/// `rand_distr` switches to an inversion sampler when the mode is below 10,
/// and its setup for that branch loops over the whole population (and
/// underflows for populations near 1e8). In that regime the smaller of
/// `marked` and `draws` is at most about `sqrt(10 pop)`, so the items are
/// placed one at a time instead.
fn hypergeometric<R: Rng>(pop: u64, marked: u64, draws: u64, rng: &mut R) -> Result<u64> {
    if marked > pop / 2 {
        return Ok(draws - hypergeometric(pop, pop - marked, draws, rng)?);
    }
    if draws > pop / 2 {
        return Ok(marked - hypergeometric(pop, marked, pop - draws, rng)?);
    }
    let mode = ((draws + 1) as f64 * (marked + 1) as f64 / (pop + 2) as f64).floor();
    if mode >= 10.0 {
        return Hypergeometric::new(pop, marked, draws)
            .map(|d| d.sample(rng))
            .map_err(|e| MdlError::Invariant(format!("hypergeometric split: {e}")));
    }
    // symmetric in (marked, draws): place the smaller group item by item
    let (small, big) = if marked <= draws {
        (marked, draws)
    } else {
        (draws, marked)
    };
    let mut hits = 0u64;
    for j in 0..small {
        let p = (big - hits) as f64 / (pop - j) as f64;
        if rng.random::<f64>() < p {
            hits += 1;
        }
    }
    Ok(hits)
}

/// Append-only reusable dataset, one draw sequence per distribution.
#[derive(Debug, Clone)]
pub struct SampleBank {
    coupling: LossCoupling,
    num_hypotheses: usize,
    dists: Vec<DistBank>,
    /// Draws made before the schedule starts (per distribution).
    initial: Vec<u64>,
}

impl SampleBank {
    pub fn new(inst: &Instance, coupling: LossCoupling) -> Self {
        let dists = (0..inst.k())
            .map(|i| DistBank::new(Layout::build(inst, i, coupling)))
            .collect();
        Self {
            coupling,
            num_hypotheses: inst.num_hypotheses(),
            dists,
            initial: vec![0; inst.k()],
        }
    }

    pub fn coupling(&self) -> LossCoupling {
        self.coupling
    }

    pub fn k(&self) -> usize {
        self.dists.len()
    }

    /// Current number of draws stored for distribution `i`.
    pub fn count(&self, i: usize) -> u64 {
        self.dists[i].size()
    }

    pub fn counts(&self) -> Vec<u64> {
        self.dists.iter().map(DistBank::size).collect()
    }

    /// Draws taken before the schedule (the Rademacher variant's warm start).
    pub fn initial_draws(&self, i: usize) -> u64 {
        self.initial[i]
    }

    fn column(&self, l: usize, h: usize) -> usize {
        l * self.num_hypotheses + h
    }

    /// Appends `n` fresh i.i.d. draws from distribution `i` using the bank stream.
    pub fn append(&mut self, i: usize, n: u64, sampler: &mut SamplerState) {
        self.dists[i].append(n, sampler.rng(i, Purpose::Bank));
        sampler.count(i, Purpose::Bank, n);
    }

    /// Appends draws taken ahead of the schedule; they sit at the front of the
    /// sequence and are excluded from schedule targets.
    pub fn append_initial(&mut self, i: usize, n: u64, sampler: &mut SamplerState) -> Result<()> {
        if self.count(i) != self.initial[i] {
            return Err(MdlError::Precondition(
                "initial draws must precede scheduled draws".into(),
            ));
        }
        self.append(i, n, sampler);
        self.initial[i] += n;
        Ok(())
    }

    /// Sum of `loss_l(h, .)` over all stored draws of distribution `i`.
    pub fn loss_sum(&self, i: usize, l: usize, h: usize) -> f64 {
        self.dists[i].last().sums[self.column(l, h)]
    }

    /// All column sums (column `l * H + h`) over the full sequence of `i`.
    pub fn column_sums(&self, i: usize) -> &[f64] {
        &self.dists[i].last().sums
    }

    /// Column sums over the first `m` draws of distribution `i`.
    pub fn prefix_column_sums(&mut self, i: usize, m: u64, sampler: &mut SamplerState) -> Result<&[f64]> {
        let rng = sampler.rng(i, Purpose::Resolve);
        Ok(&self.dists[i].prefix(m, rng)?.sums)
    }

    /// Debug dump: per distribution, the stored chunks with per-column atom
    /// histograms.
    pub fn dump(&self, inst: &Instance) -> BankDump {
        let distributions = self
            .dists
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let marks: Vec<(&u64, &Mark)> = d.marks.iter().collect();
                let chunks = marks
                    .windows(2)
                    .map(|w| {
                        let diff: Vec<u64> = w[1].1.counts.iter().zip(&w[0].1.counts).map(|(a, b)| a - b).collect();
                        ChunkDump {
                            start: *w[0].0,
                            end: *w[1].0,
                            atom_counts: d.layout.atom_histogram(inst, i, &diff),
                        }
                    })
                    .collect();
                DistDump {
                    size: d.size(),
                    initial: self.initial[i],
                    chunks,
                }
            })
            .collect();
        BankDump {
            coupling: self.coupling,
            distributions,
        }
    }
}

/// Serializable bank contents, for replay comparisons.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BankDump {
    pub coupling: LossCoupling,
    pub distributions: Vec<DistDump>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistDump {
    pub size: u64,
    pub initial: u64,
    pub chunks: Vec<ChunkDump>,
}

/// Draws `start..end` of one distribution. `atom_counts[c][j]` counts draws
/// where column `c = l * H + h` took atom `j` of its loss table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkDump {
    pub start: u64,
    pub end: u64,
    pub atom_counts: Vec<Vec<u64>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::LossDist;

    fn coin_instance() -> Instance {
        // two hypotheses, two distributions, 0/1 losses with distinct means
        let t = |p| LossDist::two_point(0.0, 1.0, p).unwrap();
        Instance::single_loss(vec![vec![t(0.2), t(0.7)], vec![t(0.5), t(0.1)]], None).unwrap()
    }

    #[test]
    fn append_accumulates_and_counts() {
        let inst = coin_instance();
        let mut s = SamplerState::new(3, 2);
        let mut bank = SampleBank::new(&inst, LossCoupling::Independent);
        bank.append(0, 1000, &mut s);
        bank.append(0, 500, &mut s);
        bank.append(1, 10, &mut s);
        assert_eq!(bank.counts(), vec![1500, 10]);
        assert_eq!(s.total_draws(Purpose::Bank), 1510);
        let dump = bank.dump(&inst);
        assert_eq!(dump.distributions[0].chunks.len(), 2);
        for chunk in &dump.distributions[0].chunks {
            for hist in &chunk.atom_counts {
                assert_eq!(hist.iter().sum::<u64>(), chunk.end - chunk.start);
            }
        }
        // loss sum equals the count of 1-atoms
        let ones: u64 = dump.distributions[0].chunks.iter().map(|c| c.atom_counts[0][1]).sum();
        assert_eq!(bank.loss_sum(0, 0, 0), ones as f64);
    }

    #[test]
    fn prefix_is_consistent_and_nested() {
        let inst = coin_instance();
        let mut s = SamplerState::new(11, 2);
        let mut bank = SampleBank::new(&inst, LossCoupling::Independent);
        bank.append(0, 10_000, &mut s);
        let a = bank.prefix_column_sums(0, 4_000, &mut s).unwrap().to_vec();
        let b = bank.prefix_column_sums(0, 7_000, &mut s).unwrap().to_vec();
        let a2 = bank.prefix_column_sums(0, 4_000, &mut s).unwrap().to_vec();
        assert_eq!(a, a2);
        for (x, y) in a.iter().zip(&b) {
            assert!(x <= y);
            assert!(y - x <= 3_000.0);
        }
        let full = bank.prefix_column_sums(0, 10_000, &mut s).unwrap().to_vec();
        assert_eq!(full, bank.column_sums(0));
        assert!(bank.prefix_column_sums(0, 10_001, &mut s).is_err());
        // resolving prefixes draws no samples
        assert_eq!(s.total_draws(Purpose::Bank), 10_000);
    }

    #[test]
    fn comonotone_columns_are_ordered() {
        // with a shared uniform, a column with stochastically larger loss is
        // never below the other one on any draw
        let t = |p| LossDist::two_point(0.0, 1.0, p).unwrap();
        let inst = Instance::single_loss(vec![vec![t(0.3)], vec![t(0.6)]], None).unwrap();
        let mut s = SamplerState::new(5, 1);
        let mut bank = SampleBank::new(&inst, LossCoupling::Comonotone);
        bank.append(0, 5_000, &mut s);
        let dump = bank.dump(&inst);
        let chunk = &dump.distributions[0].chunks[0];
        // every draw with loss 1 for h0 also has loss 1 for h1
        assert!(chunk.atom_counts[0][1] <= chunk.atom_counts[1][1]);
        let mean0 = bank.loss_sum(0, 0, 0) / 5_000.0;
        let mean1 = bank.loss_sum(0, 0, 1) / 5_000.0;
        assert!((mean0 - 0.3).abs() < 0.03 && (mean1 - 0.6).abs() < 0.03);
    }

    #[test]
    fn huge_appends_are_cheap() {
        let inst = coin_instance();
        let mut s = SamplerState::new(1, 2);
        let mut bank = SampleBank::new(&inst, LossCoupling::Independent);
        bank.append(0, 5_000_000_000, &mut s);
        let mean = bank.loss_sum(0, 0, 0) / 5e9;
        assert!((mean - 0.2).abs() < 1e-4);
        let half = bank.prefix_column_sums(0, 2_500_000_000, &mut s).unwrap()[0] / 2.5e9;
        assert!((half - 0.2).abs() < 1e-4);
    }

    #[test]
    fn initial_draws_must_come_first() {
        let inst = coin_instance();
        let mut s = SamplerState::new(1, 2);
        let mut bank = SampleBank::new(&inst, LossCoupling::Independent);
        bank.append_initial(0, 5, &mut s).unwrap();
        bank.append(0, 5, &mut s);
        assert!(bank.append_initial(0, 1, &mut s).is_err());
        assert_eq!(bank.initial_draws(0), 5);
    }

    #[test]
    fn multinomial_handles_degenerate_probs() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut out = [0u64; 3];
        multinomial(100, &[0.0, 1.0, 0.0], &mut out, &mut rng);
        assert_eq!(out, [0, 100, 0]);
        let mut out = [0u64; 1];
        multinomial(7, &[1.0], &mut out, &mut rng);
        assert_eq!(out, [7]);
    }

    #[test]
    fn hypergeometric_small_case_matches_pmf() {
        // pop 10, 3 marked, 4 draws: P(x) = C(3,x) C(7,4-x) / C(10,4)
        let pmf = [35.0 / 210.0, 105.0 / 210.0, 63.0 / 210.0, 7.0 / 210.0];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let n = 200_000;
        let mut hist = [0u64; 4];
        for _ in 0..n {
            hist[hypergeometric(10, 3, 4, &mut rng).unwrap() as usize] += 1;
        }
        for (h, p) in hist.iter().zip(pmf) {
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            assert!((*h as f64 / n as f64 - p).abs() < 5.0 * sd, "{hist:?}");
        }
    }

    #[test]
    fn hypergeometric_huge_population_small_mode() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let (pop, marked, draws) = (400_000_000_000u64, 3_000u64, 200_000_000u64);
        let n = 2_000;
        let mean: f64 = (0..n)
            .map(|_| hypergeometric(pop, marked, draws, &mut rng).unwrap() as f64)
            .sum::<f64>()
            / n as f64;
        let expect = marked as f64 * draws as f64 / pop as f64;
        assert!(
            (mean - expect).abs() < 5.0 * (expect / n as f64).sqrt(),
            "{mean} vs {expect}"
        );
        // complements
        assert_eq!(hypergeometric(pop, pop, draws, &mut rng).unwrap(), draws);
        assert_eq!(hypergeometric(pop, marked, pop, &mut rng).unwrap(), marked);
    }

    use rand::SeedableRng;
}
