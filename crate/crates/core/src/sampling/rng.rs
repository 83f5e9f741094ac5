use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// What a random stream is used for. Bank and fresh draws come from separate
/// streams so changing the number of rounds never perturbs bank contents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Purpose {
    /// Samples appended to the reusable bank.
    Bank,
    /// Fresh samples for loss-vector estimation; never stored.
    Fresh,
    /// Internal randomness that refines already-drawn bank chunks; draws no samples.
    Resolve,
}

impl Purpose {
    fn index(self) -> usize {
        match self {
            Purpose::Bank => 0,
            Purpose::Fresh => 1,
            Purpose::Resolve => 2,
        }
    }
}

const PURPOSES: usize = 3;

/// Seeded generators, one independent ChaCha stream per (distribution, purpose),
/// with a sample counter per stream.
#[derive(Debug, Clone)]
pub struct SamplerState {
    seed: u64,
    streams: Vec<[ChaCha8Rng; PURPOSES]>,
    draws: Vec<[u64; PURPOSES]>,
}

impl SamplerState {
    pub fn new(seed: u64, k: usize) -> Self {
        let streams = (0..k)
            .map(|i| {
                std::array::from_fn(|p| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream((i * PURPOSES + p) as u64);
                    rng
                })
            })
            .collect();
        Self {
            seed,
            streams,
            draws: vec![[0; PURPOSES]; k],
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn k(&self) -> usize {
        self.streams.len()
    }

    pub fn rng(&mut self, i: usize, purpose: Purpose) -> &mut ChaCha8Rng {
        &mut self.streams[i][purpose.index()]
    }

    /// Records `n` samples drawn from distribution `i` for `purpose`.
    pub(crate) fn count(&mut self, i: usize, purpose: Purpose, n: u64) {
        self.draws[i][purpose.index()] += n;
    }

    pub fn draws(&self, i: usize, purpose: Purpose) -> u64 {
        self.draws[i][purpose.index()]
    }

    /// Total samples drawn for `purpose` across all distributions.
    pub fn total_draws(&self, purpose: Purpose) -> u64 {
        self.draws.iter().map(|d| d[purpose.index()]).sum()
    }
}
