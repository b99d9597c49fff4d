//! Shared inputs for the criterion benchmarks.

use devchain::random::uniform_game;
use devchain::GameSpec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A reproducible random game with the given strategy counts.
pub fn bench_game(sizes: &[usize], seed: u64) -> GameSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    uniform_game(&mut rng, sizes)
}
