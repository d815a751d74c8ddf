//! Seed layout: master seed, then one seed per replication, then three
//! independent streams per replication.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream ids within one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Arrivals = 0,
    Scheduling = 1,
    Routing = 2,
}

/// Seeds for `count` replications, drawn up front from the master seed so
/// that they do not depend on how replications are scheduled.
pub fn replication_seeds(master: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    (0..count).map(|_| rng.gen()).collect()
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

/// The three named streams of one replication.
#[derive(Debug, Clone)]
pub struct SimRng {
    pub arrivals: ChaCha8Rng,
    pub scheduling: ChaCha8Rng,
    pub routing: ChaCha8Rng,
}

impl SimRng {
    pub fn new(seed: u64) -> Self {
        Self {
            arrivals: stream(seed, Stream::Arrivals),
            scheduling: stream(seed, Stream::Scheduling),
            routing: stream(seed, Stream::Routing),
        }
    }
}

/// Uniform on the open interval (0, 1).
pub fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(rand::distributions::Open01)
}
