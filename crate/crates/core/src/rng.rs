//! Seed-derived random streams.
//!
//! Every random source in a run is a ChaCha stream keyed by the master seed and
//! a fixed tag, so components draw independently of each other and of the order
//! in which they are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub const ENSEMBLE_INIT: u64 = 0x100;
pub const MEMBER_NOISE: u64 = 0x200;
pub const MEMBER_PLANNER: u64 = 0x300;
pub const ACTING: u64 = 0x400;
pub const BUFFER: u64 = 0x500;
pub const RESET: u64 = 0x600;

pub fn stream(seed: u64, tag: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tag);
    rng
}

pub fn member_stream(seed: u64, tag: u64, member: usize) -> StreamRng {
    stream(seed, (tag << 32) | member as u64)
}
