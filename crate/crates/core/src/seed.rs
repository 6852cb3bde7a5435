//! Splittable seeding: each ensemble member gets a stream that depends only
//! on `(master seed, member index)`, never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn member_seed(master: u64, member: u64) -> u64 {
    splitmix64(master ^ splitmix64(member.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

pub fn member_seeds(master: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|m| member_seed(master, m)).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
