#![allow(dead_code)]

use devchain::random;
use devchain::{AgendaWeights, DeviationPolicy, Distribution, ExplicitPolicy, GameSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Strategy counts with `players` in `2..=max_players` and each count in `2..=max_size`.
pub fn sizes(max_players: usize, max_size: usize) -> impl Strategy<Value = Vec<usize>> {
    (2..=max_players).prop_flat_map(move |n| prop::collection::vec(2..=max_size, n))
}

/// Integer payoffs in `0..4`, so payoff ties are frequent.
pub fn tied_game(max_players: usize, max_size: usize) -> impl Strategy<Value = GameSpec> {
    (sizes(max_players, max_size), any::<u64>())
        .prop_map(|(s, seed)| random::integer_game(&mut rng(seed), &s, 4))
}

pub fn real_game(max_players: usize, max_size: usize) -> impl Strategy<Value = GameSpec> {
    (sizes(max_players, max_size), any::<u64>())
        .prop_map(|(s, seed)| random::uniform_game(&mut rng(seed), &s))
}

pub fn any_game(max_players: usize, max_size: usize) -> impl Strategy<Value = GameSpec> {
    prop_oneof![
        tied_game(max_players, max_size),
        real_game(max_players, max_size)
    ]
}

pub fn builtin_policy() -> impl Strategy<Value = DeviationPolicy> {
    prop_oneof![
        (0.0..0.99f64).prop_map(|w| DeviationPolicy::uniform_better(w).unwrap()),
        (0.0..0.99f64).prop_map(|w| DeviationPolicy::proportional(w).unwrap()),
        Just(DeviationPolicy::default()),
        Just(DeviationPolicy::proportional(0.0).unwrap()),
    ]
}

/// Strictly positive agenda weights summing to one.
pub fn positive_weights(n: usize, seed: u64) -> AgendaWeights {
    let mut r = rng(seed);
    let raw: Vec<f64> = (0..n).map(|_| r.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    AgendaWeights::new(raw.into_iter().map(|w| w / total).collect()).unwrap()
}

/// Random normalized weights over `{u} ∪ better replies` for every row with a
/// better reply. Some rows put all mass on staying.
pub fn random_explicit(game: &GameSpec, seed: u64) -> DeviationPolicy {
    let mut r = rng(seed);
    let mut policy = ExplicitPolicy::new();
    for agent in 0..game.num_agents() {
        for u in game.profiles() {
            let better = game.better_replies(agent, u);
            if better.is_empty() {
                continue;
            }
            let mut targets = vec![u];
            targets.extend(better);
            let raw: Vec<f64> = targets
                .iter()
                .map(|_| {
                    if r.random_bool(0.2) {
                        0.0
                    } else {
                        r.random::<f64>()
                    }
                })
                .collect();
            let total: f64 = raw.iter().sum();
            let row: Vec<_> = if total > 0.0 {
                targets
                    .iter()
                    .copied()
                    .zip(raw.iter().map(|w| w / total))
                    .collect()
            } else {
                vec![(u, 1.0)]
            };
            policy.set_row(agent, u, row);
        }
    }
    DeviationPolicy::explicit(game, policy).unwrap()
}

pub fn random_distribution(n: usize, seed: u64) -> Distribution {
    let mut r = rng(seed);
    let raw: Vec<f64> = (0..n).map(|_| r.random::<f64>() + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    Distribution::new(raw.into_iter().map(|p| p / total).collect()).unwrap()
}

/// A cyclic 2x2 game with the four payoff gaps given, in the order
/// `row_left, row_right, col_up, col_down`.
pub fn cyclic_game(gaps: [f64; 4], base: f64) -> GameSpec {
    let [rl, rr, cu, cd] = gaps;
    // profiles (U,L),(U,R),(D,L),(D,R)
    let payoffs = vec![
        vec![base, base + cu],
        vec![base + rr, base],
        vec![base + rl, base],
        vec![base, base + cd],
    ];
    GameSpec::from_sizes(&[2, 2], payoffs).unwrap()
}
