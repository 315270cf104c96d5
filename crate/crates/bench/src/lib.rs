//! Fixtures shared by the benchmarks.

use conformity::prelude::*;

/// Seeded random instance of `n` agents.
pub fn fixture(n: usize, seed: u64) -> Instance {
    random_instance(n, seed, &BetaPresets::default()).expect("fixture instance")
}

/// Dense random digraph pattern with every node on a self-loop.
pub fn dense_pattern(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if i == j || (i * 7 + j * 3) % 5 == 0 { 1.0 } else { 0.0 })
}
