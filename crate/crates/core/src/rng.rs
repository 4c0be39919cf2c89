//! Counter-based random streams.
//!
//! Every stream is a ChaCha8 keystream addressed by a key derived from
//! integers (a seed plus a site or walker identifier). Nothing is shared
//! between streams, so the draw a walker makes at time `t` depends only on
//! its seed and `t`, whatever the thread schedule.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::env::SiteCoord;

const WALK_DOMAIN: u64 = 0x7761_6c6b_6572_0001;
const ENV_DOMAIN: u64 = 0x656e_7669_726f_0002;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `(master, domain, index)`.
pub fn derive_seed(master: u64, domain: u64, index: u64) -> u64 {
    mix64(mix64(master ^ mix64(domain)) ^ mix64(index.wrapping_add(domain.rotate_left(17))))
}

/// Seed of walker `index` in an ensemble started from `master`.
pub fn walker_seed(master: u64, index: u64) -> u64 {
    derive_seed(master, WALK_DOMAIN, index)
}

/// Environment seed of walker `index` when each walker gets its own environment.
pub fn environment_seed(master: u64, index: u64) -> u64 {
    derive_seed(master, ENV_DOMAIN, index)
}

/// Stream used to generate the transition vector at `site`.
///
/// Key = seed ‖ x₁ ‖ x₂ ‖ x₃ (little-endian), stream id = x₄, so the map from
/// (seed, site) to stream is injective for every supported dimension.
pub fn site_stream(master_seed: u64, site: &SiteCoord) -> ChaCha8Rng {
    let c = site.padded();
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&mix64(master_seed ^ ENV_DOMAIN).to_le_bytes());
    key[8..16].copy_from_slice(&c[0].to_le_bytes());
    key[16..24].copy_from_slice(&c[1].to_le_bytes());
    key[24..32].copy_from_slice(&c[2].to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(c[3] as u64);
    rng
}

/// Step stream of one walker; the `t`-th call to [`unit_f64`] is the draw for step `t`.
pub fn walker_stream(walker_seed: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&walker_seed.to_le_bytes());
    key[8..16].copy_from_slice(&WALK_DOMAIN.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Uniform in [0, 1) from exactly one 64-bit word.
#[inline]
pub fn unit_f64<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Generic seeded stream for auxiliary randomness (bootstrap resampling and the like).
pub fn aux_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
