//! Random games for tests and benchmarks.

use rand::Rng;

use crate::game::GameSpec;

/// A game with the given strategy counts and i.i.d. uniform payoffs in `[-1, 1)`.
pub fn uniform_game<R: Rng + ?Sized>(rng: &mut R, sizes: &[usize]) -> GameSpec {
    let n = sizes.len();
    let profiles: usize = sizes.iter().product();
    let payoffs = (0..profiles)
        .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    GameSpec::from_sizes(sizes, payoffs).expect("well-formed random game")
}

/// Small integer payoffs in `0..levels`, so ties are common.
pub fn integer_game<R: Rng + ?Sized>(rng: &mut R, sizes: &[usize], levels: u32) -> GameSpec {
    let n = sizes.len();
    let profiles: usize = sizes.iter().product();
    let payoffs = (0..profiles)
        .map(|_| (0..n).map(|_| rng.random_range(0..levels) as f64).collect())
        .collect();
    GameSpec::from_sizes(sizes, payoffs).expect("well-formed random game")
}

/// Strategy counts for `players` agents, each drawn from `min..=max`.
pub fn sizes<R: Rng + ?Sized>(rng: &mut R, players: usize, min: usize, max: usize) -> Vec<usize> {
    (0..players).map(|_| rng.random_range(min..=max)).collect()
}
