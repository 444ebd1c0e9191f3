//! Labeled seed derivation.
//!
//! Every source of randomness in the toolkit is fed from one top-level seed,
//! fanned out by component label so that adding a consumer never shifts the
//! stream of another. The mix is a fixed FNV-1a fold followed by a
//! SplitMix64 finalizer; it is stable across platforms and releases, unlike
//! the std hasher.

use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derive a child seed from `seed` and a component label.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in label.as_bytes() {
        h = (h ^ b as u64).wrapping_mul(FNV_PRIME);
    }
    splitmix64(seed ^ h)
}

/// Seeded RNG for the given component label.
pub fn rng_for(seed: u64, label: &str) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(derive_seed(seed, label))
}
