//! Random-number stream layout.
//!
//! Replication `i` gets the seed `splitmix64(master + i · φ)` where `φ` is
//! the 64-bit golden-ratio constant. Within a replication every class owns
//! three ChaCha8 streams (inter-arrival, service, routing) sharing that
//! seed and selected by stream id `kind · 2³² + class`. Draws for a class
//! therefore do not depend on the priority policy, which gives common
//! random numbers across policies.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamKind {
    Arrival = 0,
    Service = 1,
    Routing = 2,
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn replication_seed(master: u64, replication: usize) -> u64 {
    splitmix64(master.wrapping_add((replication as u64).wrapping_mul(GOLDEN)))
}

pub fn stream(replication_seed: u64, kind: StreamKind, class: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(replication_seed);
    rng.set_stream(((kind as u64) << 32) | class as u64);
    rng
}
