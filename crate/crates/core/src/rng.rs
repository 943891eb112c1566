//! Named random substreams derived from one root seed.
//!
//! Every random consumer (sampler, augmentation, init, eval, split) gets its
//! own ChaCha stream so that changing how much one component draws never
//! perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream for `name` under `root`.
pub fn substream(root: u64, name: &str) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(fnv1a(name.as_bytes()));
    rng
}

/// Stream for `name` further keyed by integer indices (epoch, step, slot...).
pub fn indexed(root: u64, name: &str, idx: &[u64]) -> Rng {
    let mut seed = splitmix(root ^ fnv1a(name.as_bytes()));
    for &i in idx {
        seed = splitmix(seed ^ splitmix(i));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(name.as_bytes()));
    rng
}

/// Derive a child seed (for components that take a plain `u64`).
pub fn derive_seed(root: u64, name: &str) -> u64 {
    splitmix(root ^ fnv1a(name.as_bytes()))
}
