//! Randomly shifted Halton sequence on `[-1, 1]^m`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// `count` points of the Halton sequence (starting at index 1) with a
/// Cranley–Patterson rotation drawn from `seed`, mapped to `[-1, 1]^m`.
pub fn halton_points(m: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    assert!(m <= PRIMES.len(), "Halton sequence supports at most {} dimensions", PRIMES.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
    (0..count)
        .map(|i| {
            (0..m)
                .map(|d| {
                    let u = (radical_inverse(i as u64 + 1, PRIMES[d]) + shift[d]).fract();
                    2.0 * u - 1.0
                })
                .collect()
        })
        .collect()
}
