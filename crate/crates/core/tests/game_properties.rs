mod common;

use common::*;
use devchain::{profile_distance, DeviationPolicy, GameSpec, ProfileIndex};
use proptest::prelude::*;

fn sizes_of(game: &GameSpec) -> Vec<usize> {
    (0..game.num_agents())
        .map(|i| game.num_strategies(i))
        .collect()
}

/// `p_i -> alpha_i p_i + beta_i`.
fn affine(game: &GameSpec, alpha: &[f64], beta: &[f64]) -> GameSpec {
    let payoffs = game
        .profiles()
        .map(|u| {
            game.payoff_vector(u)
                .iter()
                .enumerate()
                .map(|(i, &p)| alpha[i] * p + beta[i])
                .collect()
        })
        .collect();
    GameSpec::from_sizes(&sizes_of(game), payoffs).unwrap()
}

fn affine_params(n: usize, seed: u64, dyadic: bool) -> (Vec<f64>, Vec<f64>) {
    use rand::Rng;
    let mut r = rng(seed);
    let alpha = (0..n)
        .map(|_| {
            if dyadic {
                2f64.powi(r.random_range(-3..=3))
            } else {
                r.random_range(0.1..10.0)
            }
        })
        .collect();
    let beta = (0..n).map(|_| r.random_range(-5..=5) as f64).collect();
    (alpha, beta)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn index_round_trip(sizes in prop::collection::vec(1usize..=10, 1..=4)) {
        prop_assume!(sizes.iter().product::<usize>() <= 10_000);
        let payoffs = vec![vec![0.0; sizes.len()]; sizes.iter().product()];
        let game = GameSpec::from_sizes(&sizes, payoffs).unwrap();
        for u in game.profiles() {
            let c = game.coords(u);
            prop_assert_eq!(game.profile_index(&c).unwrap(), u);
            // last agent varies fastest
            let mut expected = 0;
            for (i, &ci) in c.iter().enumerate() {
                expected = expected * sizes[i] + ci;
            }
            prop_assert_eq!(expected, u.0);
        }
    }

    #[test]
    fn deviation_sets(game in any_game(4, 4)) {
        for u in game.profiles() {
            for i in 0..game.num_agents() {
                let dev = game.deviation_set(i, u);
                prop_assert_eq!(dev.len(), game.num_strategies(i));
                prop_assert!(dev.contains(&u));
                for v in dev {
                    prop_assert!(game.profile_distance(u, v).unwrap() <= 1);
                }
            }
        }
    }

    #[test]
    fn nash_two_paths_agree(game in any_game(4, 3)) {
        let direct: Vec<ProfileIndex> = game
            .profiles()
            .filter(|&u| (0..game.num_agents()).all(|i| game.better_replies(i, u).is_empty()))
            .collect();
        prop_assert_eq!(game.pure_nash_equilibria(), direct);
    }

    #[test]
    fn distance_is_metric(sizes in prop::collection::vec(1usize..=4, 1..=3)) {
        let n: usize = sizes.iter().product();
        prop_assume!(n <= 100);
        let game = GameSpec::from_sizes(&sizes, vec![vec![0.0; sizes.len()]; n]).unwrap();
        let d = |u: usize, v: usize| game.profile_distance(ProfileIndex(u), ProfileIndex(v)).unwrap();
        for u in 0..n {
            for v in 0..n {
                prop_assert_eq!(d(u, v) == 0, u == v);
                prop_assert_eq!(d(u, v), d(v, u));
                for w in 0..n {
                    prop_assert!(d(u, w) <= d(u, v) + d(v, w));
                }
            }
        }
    }

    #[test]
    fn affine_invariance(game in tied_game(3, 3), seed in any::<u64>()) {
        let (alpha, beta) = affine_params(game.num_agents(), seed, false);
        let h = affine(&game, &alpha, &beta);
        for u in game.profiles() {
            for i in 0..game.num_agents() {
                prop_assert_eq!(game.better_replies(i, u), h.better_replies(i, u));
            }
        }
        prop_assert_eq!(game.pure_nash_equilibria(), h.pure_nash_equilibria());
        prop_assert_eq!(game.is_weakly_acyclic(), h.is_weakly_acyclic());
    }

    #[test]
    fn builtin_policies_are_affine_invariant(
        game in tied_game(3, 3),
        seed in any::<u64>(),
        stay in 0.0..0.9f64,
    ) {
        let (alpha, beta) = affine_params(game.num_agents(), seed, true);
        let dyadic = affine(&game, &alpha, &beta);
        let (alpha, beta) = affine_params(game.num_agents(), seed, false);
        let general = affine(&game, &alpha, &beta);
        let policies = [
            DeviationPolicy::uniform_better(stay).unwrap(),
            DeviationPolicy::proportional(stay).unwrap(),
        ];
        for policy in &policies {
            for u in game.profiles() {
                for i in 0..game.num_agents() {
                    let base = policy.agent_row(&game, i, u);
                    // power-of-two scaling is exact in floating point
                    prop_assert_eq!(&policy.agent_row(&dyadic, i, u), &base);
                    let other = policy.agent_row(&general, i, u);
                    prop_assert_eq!(other.len(), base.len());
                    for ((v, p), (w, q)) in base.iter().zip(&other) {
                        prop_assert_eq!(v, w);
                        prop_assert!((p - q).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn neighbor_graph_matches_definition(game in tied_game(3, 3)) {
        let graph = game.neighbor_graph();
        let n = game.num_agents();
        for i in 0..n {
            for j in 0..n {
                let affects = j != i && game.profiles().any(|u| {
                    game.deviation_set(j, u)
                        .into_iter()
                        .any(|v| game.payoff(i, v) != game.payoff(i, u))
                });
                prop_assert_eq!(graph.contains(i, j), affects, "i={} j={}", i, j);
            }
        }
    }

    #[test]
    fn flattened_dependence_removes_neighbor(game in real_game(3, 3), pick in any::<(usize, usize)>()) {
        let n = game.num_agents();
        let i = pick.0 % n;
        let j = (i + 1 + pick.1 % (n - 1)) % n;
        // make p_i ignore agent j's coordinate
        let payoffs = game
            .profiles()
            .map(|u| {
                let mut p = game.payoff_vector(u).to_vec();
                p[i] = game.payoff(i, game.with_coord(u, j, 0));
                p
            })
            .collect();
        let flat = GameSpec::from_sizes(&sizes_of(&game), payoffs).unwrap();
        prop_assert!(!flat.neighbor_graph().contains(i, j));
    }

    #[test]
    fn coordinate_distance_matches_profiles(game in any_game(3, 4)) {
        for u in game.profiles() {
            for v in game.profiles() {
                prop_assert_eq!(
                    profile_distance(&game.coords(u), &game.coords(v)).unwrap(),
                    game.profile_distance(u, v).unwrap()
                );
            }
        }
    }

    #[test]
    fn json_round_trip(game in any_game(3, 3)) {
        let text = game.to_json_value().to_string();
        prop_assert_eq!(GameSpec::from_json_str(&text).unwrap(), game);
    }
}
