use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PersistError;

/// Disjoint image batches for successive coding rounds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchPlan {
    pub seed: u64,
    pub batch_size: usize,
    pub batches: Vec<Vec<String>>,
}

/// Shuffles the uuids (sorted ascending first, so input order is irrelevant)
/// with a seeded Fisher–Yates pass and slices off `n_batches` consecutive batches.
pub fn sample_batches<'a>(
    uuids: impl IntoIterator<Item = &'a str>,
    batch_size: usize,
    n_batches: usize,
    seed: u64,
) -> Result<BatchPlan, PersistError> {
    if batch_size == 0 || n_batches == 0 {
        return Err(PersistError::InvalidArgument(
            "batch size and batch count must be positive".into(),
        ));
    }
    let mut pool: Vec<String> = uuids.into_iter().map(str::to_owned).collect();
    pool.sort();
    pool.dedup();
    let needed = batch_size * n_batches;
    if needed > pool.len() {
        return Err(PersistError::NotEnoughImages {
            needed,
            available: pool.len(),
        });
    }
    pool.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let batches = pool[..needed].chunks(batch_size).map(<[String]>::to_vec).collect();
    Ok(BatchPlan {
        seed,
        batch_size,
        batches,
    })
}
