//! Named random streams derived from a single seed.
//!
//! Each consumer (initialization, data generation, dropout, batching) draws
//! from its own ChaCha stream so it can be reproduced in isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init = 1,
    Data = 2,
    Dropout = 3,
    Batch = 4,
    Verify = 5,
}

pub fn stream(seed: u64, which: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
