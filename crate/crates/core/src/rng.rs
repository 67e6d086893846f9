//! Counter-derived random substreams.
//!
//! A substream is a ChaCha8 generator keyed by the run seed mixed with a
//! domain label, with the ChaCha stream id set to the item index. Shot `i`
//! of a series (or bootstrap resample `i`) therefore draws from the same
//! numbers no matter which worker produces it or in which order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent families of substreams derived from one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Shots,
    Bootstrap,
    SweepPoint,
}

impl Domain {
    fn label(self) -> u64 {
        match self {
            Domain::Shots => 0x5348_4f54_5331_0001,
            Domain::Bootstrap => 0x424f_4f54_5354_0002,
            Domain::SweepPoint => 0x5357_4545_5050_0003,
        }
    }
}

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn substream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed ^ domain.label()));
    rng.set_stream(index);
    rng
}

/// Seed of sweep point `index` under the run seed `seed`.
pub fn point_seed(seed: u64, index: u64) -> u64 {
    mix64(seed ^ mix64(Domain::SweepPoint.label() ^ index))
}
