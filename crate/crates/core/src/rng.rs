//! Reproducible random streams.
//!
//! Every randomized producer draws realization `i` from its own ChaCha20
//! stream: the generator is seeded with `ChaCha20Rng::seed_from_u64(seed)`
//! and then moved to stream `(domain << 56) | i`. A realization therefore
//! depends only on `(seed, domain, i)`, never on how realizations are
//! scheduled across threads, and ChaCha20 output is identical on every
//! platform.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

/// Stream namespaces, so producers sharing a seed stay independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Domain {
    WavenumberChannel = 1,
    Multipath = 2,
    Capacity = 3,
}

pub fn stream_rng(seed: u64, domain: Domain, index: u64) -> ChaCha20Rng {
    assert!(index < 1 << 56, "realization index out of range");
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << 56) | index);
    rng
}

/// Circularly-symmetric `CN(0, 1)`: real and imaginary parts i.i.d.
/// `N(0, 1/2)`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}
