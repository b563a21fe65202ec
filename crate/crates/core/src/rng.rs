//! Deterministic seed partitioning.
//!
//! Every independent random stream (per measurement, per channel, per axis,
//! per Monte Carlo trial) gets its own ChaCha8 generator seeded from a
//! master seed mixed with a path of stream labels, so results never depend
//! on execution order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for `master` along `path`.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &label| splitmix64(acc ^ splitmix64(label)))
}

pub fn stream(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}

/// Stream labels, kept distinct so sibling streams never collide.
pub mod label {
    pub const MEASUREMENT: u64 = 1;
    pub const CHANNEL_PL: u64 = 2;
    pub const CHANNEL_PC: u64 = 3;
    pub const AXIS_X: u64 = 4;
    pub const AXIS_Y: u64 = 5;
    pub const TRIAL: u64 = 6;
    pub const CALIBRATION: u64 = 7;
    pub const GRID_POINT: u64 = 8;
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derivation_is_deterministic_and_path_sensitive() {
        assert_eq!(derive_seed(42, &[1, 2]), derive_seed(42, &[1, 2]));
        assert_ne!(derive_seed(42, &[1, 2]), derive_seed(42, &[2, 1]));
        assert_ne!(derive_seed(42, &[1]), derive_seed(43, &[1]));
        assert_ne!(derive_seed(42, &[]), derive_seed(42, &[0]));
    }

    #[test]
    fn streams_reproduce() {
        let a: Vec<u64> = stream(7, &[3]).random_iter().take(4).collect();
        let b: Vec<u64> = stream(7, &[3]).random_iter().take(4).collect();
        assert_eq!(a, b);
    }
}
