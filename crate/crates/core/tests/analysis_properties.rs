mod common;

use common::*;
use devchain::analysis::{stationary_residual, DEFAULT_MAX_DOUBLINGS, DEFAULT_TOL};
use devchain::chain::CycleGaps;
use devchain::{
    average_payoff, build, build_cycle_chain_2x2, cesaro_limit_exact, cesaro_limit_iterative,
    chain_structure, stationary_distributions, verify_cycle_stationary, AgendaWeights,
    DeviationProcess, Distribution, GameSpec, TransitionMatrix, UpdateRule,
};
use proptest::prelude::*;
use rand::Rng;

fn assert_distribution(d: &Distribution) -> Result<(), TestCaseError> {
    prop_assert!(d.probs().iter().all(|&p| p >= 0.0));
    prop_assert!((d.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    Ok(())
}

fn random_rule(game: &GameSpec, seed: u64) -> UpdateRule {
    if seed.is_multiple_of(2) {
        UpdateRule::Synchronous
    } else {
        UpdateRule::Asynchronous(AgendaWeights::uniform(game.num_agents()))
    }
}

/// Strictly positive stochastic matrix, irreducible and aperiodic.
fn positive_chain(n: usize, seed: u64) -> (GameSpec, TransitionMatrix) {
    let mut r = rng(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let raw: Vec<f64> = (0..n).map(|_| r.random_range(0.01..1.0)).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|x| x / total).collect()
        })
        .collect();
    let game = GameSpec::from_sizes(&[n], vec![vec![0.0]; n]).unwrap();
    (game, TransitionMatrix::from_dense(&rows).unwrap())
}

fn random_cycle(seed: u64) -> (GameSpec, TransitionMatrix) {
    let mut r = rng(seed);
    let gaps = [(); 4].map(|_| r.random_range(0.5..3.0));
    let game = cyclic_game(gaps, r.random_range(-2.0..2.0));
    let rho0 = r.random_range(0.05..0.999) * CycleGaps::of(&game).unwrap().max_rho0();
    let z = build_cycle_chain_2x2(&game, rho0).unwrap();
    (game, z)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn iterative_matches_exact(game in any_game(4, 4), policy in builtin_policy(), seed in any::<u64>()) {
        let z = build(&game, &policy, &random_rule(&game, seed)).unwrap();
        let pi0 = random_distribution(game.num_profiles(), seed);
        let p = DeviationProcess::new(game, pi0, z).unwrap();
        let exact = cesaro_limit_exact(&p).unwrap();
        let it = cesaro_limit_iterative(&p, DEFAULT_TOL, DEFAULT_MAX_DOUBLINGS).unwrap();
        prop_assert!(it.converged);
        assert_distribution(&exact)?;
        assert_distribution(&it.distribution)?;
        prop_assert!(exact.l1_distance(&it.distribution) < 1e-6, "l1 {}", exact.l1_distance(&it.distribution));
    }

    #[test]
    fn exact_limit_is_stationary(game in any_game(3, 4), policy in builtin_policy(), seed in any::<u64>()) {
        let z = build(&game, &policy, &random_rule(&game, seed)).unwrap();
        let pi0 = random_distribution(game.num_profiles(), seed);
        let p = DeviationProcess::new(game, pi0, z.clone()).unwrap();
        let limit = cesaro_limit_exact(&p).unwrap();
        prop_assert!(stationary_residual(&z, limit.probs()) < 1e-9);
        for pi in stationary_distributions(&z).unwrap() {
            assert_distribution(&pi)?;
            prop_assert!(stationary_residual(&z, pi.probs()) < 1e-9);
        }
    }

    #[test]
    fn structure_partitions_states(game in tied_game(3, 3), policy in builtin_policy(), seed in any::<u64>()) {
        let z = build(&game, &policy, &random_rule(&game, seed)).unwrap();
        let s = chain_structure(&z).unwrap();
        let mut seen = vec![0usize; z.size()];
        for class in &s.classes {
            for u in &class.states {
                seen[u.0] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        let transient = s.classes.iter().filter(|c| !c.recurrent).map(|c| c.states.len()).sum::<usize>();
        prop_assert_eq!(s.absorption.len(), transient);
        for row in &s.absorption {
            prop_assert!((row.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        // pure equilibria are singleton recurrent classes
        for u in game.pure_nash_equilibria() {
            prop_assert!(s.classes.iter().any(|c| c.recurrent && c.states == vec![u]));
        }
    }

    #[test]
    fn irreducible_limit_ignores_initial(n in 2usize..12, seed in any::<u64>(), cyclic in any::<bool>()) {
        let (game, z) = if cyclic { random_cycle(seed) } else { positive_chain(n, seed) };
        let s = chain_structure(&z).unwrap();
        prop_assert!(s.is_irreducible());
        let limits: Vec<Distribution> = (0..10)
            .map(|k| {
                let pi0 = if k == 0 {
                    Distribution::point(z.size(), devchain::ProfileIndex(0))
                } else {
                    random_distribution(z.size(), seed.wrapping_add(k))
                };
                let p = DeviationProcess::new(game.clone(), pi0, z.clone()).unwrap();
                cesaro_limit_exact(&p).unwrap()
            })
            .collect();
        for a in &limits {
            for b in &limits {
                prop_assert!(a.l1_distance(b) < 1e-6);
            }
        }
    }

    #[test]
    fn closed_form_cycle(seed in any::<u64>()) {
        let mut r = rng(seed);
        let gaps = [(); 4].map(|_| r.random_range(0.5..3.0));
        let game = cyclic_game(gaps, r.random_range(-2.0..2.0));
        let rho0 = r.random_range(0.05..0.999) * CycleGaps::of(&game).unwrap().max_rho0();
        let report = verify_cycle_stationary(&game, rho0, 1e-12).unwrap();
        prop_assert!(report.passed);
        prop_assert!(report.residual < 1e-12);
        prop_assert!(report.solved_gap < 1e-9);
        prop_assert!(report.irreducible && report.aperiodic);
    }

    #[test]
    fn average_payoff_is_linear(game in real_game(3, 3), seed in any::<u64>(), alpha in 0.0..=1.0f64) {
        let n = game.num_profiles();
        let mu = random_distribution(n, seed);
        let nu = random_distribution(n, seed ^ 0xABCD);
        let mix = Distribution::new(
            mu.probs().iter().zip(nu.probs()).map(|(a, b)| alpha * a + (1.0 - alpha) * b).collect(),
        ).unwrap();
        for i in 0..game.num_agents() {
            let lhs = average_payoff(&game, i, &mix).unwrap();
            let rhs = alpha * average_payoff(&game, i, &mu).unwrap()
                + (1.0 - alpha) * average_payoff(&game, i, &nu).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
