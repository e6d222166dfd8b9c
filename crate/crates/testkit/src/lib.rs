//! Random generators, invariant checks and brute-force oracles shared by the
//! test suites. Oracles deliberately avoid the engine's own helpers: they work
//! on plain sets and `i64` rationals.

pub mod check;
pub mod gen;
pub mod oracle;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `img-000`, `img-001`, ...
pub fn corpus(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("img-{i:03}")).collect()
}
