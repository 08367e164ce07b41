//! Deterministic random streams.
//!
//! Every random draw in the crate comes from a ChaCha stream keyed by a
//! `(seed, stream)` pair, so results do not depend on execution order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::C64;

/// Stream used for the random exact solution of a test problem.
pub const SOLUTION_STREAM: u64 = 0;

/// Stream for the rsvd sampling on subdomain `node`.
pub fn subdomain_stream(node: usize) -> u64 {
    node as u64 + 1
}

pub fn keyed_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Complex number with independent standard-normal real and imaginary parts.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<C64> {
    (0..n).map(|_| complex_gaussian(rng)).collect()
}
