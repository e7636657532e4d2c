//! Seeded randomness used everywhere in the crate.
//!
//! All stochastic steps draw from a [`ChaCha8Rng`] seeded through
//! [`derive_seed`], so a single master seed pins every byte the pipeline
//! produces. The samplers below are implemented here rather than pulled from
//! a distributions crate so the consumed byte stream is fixed by this crate
//! alone and survives dependency upgrades.

pub use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::{RngCore, SeedableRng};

/// splitmix64 mix step; a solid 64-bit finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a master seed and a tag path.
///
/// Tags identify the consumer (module constant, clip index, participant
/// index, epoch, shuffle index, ...) so independent streams never collide
/// and results are order-independent under parallel execution.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut h = splitmix64(master);
    for &t in tags {
        h = splitmix64(h ^ t);
    }
    h
}

pub fn seed_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform f64 in [0, 1), 53-bit resolution.
pub fn uniform_f64(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform f64 in [lo, hi).
pub fn uniform_range(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * uniform_f64(rng)
}

/// Uniform usize in [0, bound) by rejection; `bound` must be > 0.
pub fn uniform_usize(rng: &mut ChaCha8Rng, bound: usize) -> usize {
    assert!(bound > 0);
    let bound = bound as u64;
    let zone = u64::MAX - u64::MAX % bound;
    loop {
        let v = rng.next_u64();
        if v < zone {
            return (v % bound) as usize;
        }
    }
}

/// Standard normal draw via Box-Muller.
pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = 1.0 - uniform_f64(rng); // (0, 1], keeps ln finite
    let u2 = uniform_f64(rng);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// In-place Fisher-Yates shuffle.
pub fn shuffle<T>(rng: &mut ChaCha8Rng, xs: &mut [T]) {
    for i in (1..xs.len()).rev() {
        let j = uniform_usize(rng, i + 1);
        xs.swap(i, j);
    }
}
