//! Seed derivation and sampling helpers.
//!
//! Every random stream in the crate is a `ChaCha8Rng` seeded from a parent
//! seed and a list of stream labels, so results are reproducible regardless of
//! the order in which streams are created.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::scalar::Scalar;

pub type SimRng = ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Derive a child seed from `parent` and a sequence of stream labels.
pub fn derive_seed(parent: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(splitmix64(parent), |acc, &l| splitmix64(acc ^ splitmix64(l)))
}

/// Stable 64-bit label for a string (FNV-1a).
pub fn label(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

pub fn rng_from(parent: u64, labels: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(parent, labels))
}

pub fn normal<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> T {
    let x: f64 = StandardNormal.sample(rng);
    T::lit(x)
}

pub fn uniform<T: Scalar, R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> T {
    T::lit(rng.random_range(lo..hi))
}
