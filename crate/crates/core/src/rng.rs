//! Seeded random streams.
//!
//! Every stochastic entity draws from its own ChaCha stream derived from the
//! episode seed, so results do not depend on iteration order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream families; the family occupies the high 32 bits of the stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamKind {
    Setup = 1,
    Agent = 2,
    Target = 3,
    Reporter = 4,
    Bus = 5,
    Policy = 6,
    Dataset = 7,
    Training = 8,
}

pub fn stream(seed: u64, kind: StreamKind, id: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((kind as u64) << 32) | (id & 0xffff_ffff));
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = stream(7, StreamKind::Agent, 0).random();
        let b: u64 = stream(7, StreamKind::Agent, 0).random();
        let c: u64 = stream(7, StreamKind::Agent, 1).random();
        let d: u64 = stream(8, StreamKind::Agent, 0).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
