//! Single-agent policy optimization: pick one agent's individual transition
//! probabilities to maximize its long-run average payoff while every other
//! agent keeps a fixed policy.
//!
//! Each decision row (a profile where the agent has a better reply) is
//! parameterized by nonnegative weights over `{u} ∪ better replies`,
//! normalized to the simplex. Search is coordinate-wise pattern search with
//! a halving step, restarted from both built-in policies and random points.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{average_payoff, cesaro_limit_exact, DeviationProcess, Distribution};
use crate::chain::{build, UpdateRule};
use crate::error::{Error, Result};
use crate::game::{GameSpec, ProfileIndex};
use crate::policy::{DeviationPolicy, ExplicitPolicy, PolicyConfig};
use crate::simulation::trajectory_seed;

/// Candidate rows for the optimizing agent, keyed by source profile.
pub type AgentRows = BTreeMap<ProfileIndex, Vec<(ProfileIndex, f64)>>;

const MIN_STEP: f64 = 1e-4;
const IMPROVEMENT: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct OptimizationSpec {
    pub game: GameSpec,
    pub agent: usize,
    /// Policy of every agent other than `agent`.
    pub fixed_policy: DeviationPolicy,
    pub rule: UpdateRule,
    pub initial: Distribution,
    /// Total number of objective evaluations across all restarts.
    pub budget: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl OptimizationSpec {
    fn check(&self) -> Result<()> {
        self.game.check_agent(self.agent)?;
        if self.budget == 0 {
            return Err(Error::Domain(
                "optimization budget must be at least 1".into(),
            ));
        }
        if self.restarts == 0 || self.restarts > self.budget {
            return Err(Error::Domain(format!(
                "restarts must lie in 1..={} (the budget), got {}",
                self.budget, self.restarts
            )));
        }
        if self.initial.len() != self.game.num_profiles() {
            return Err(Error::ShapeMismatch(format!(
                "initial distribution over {} profiles, game has {}",
                self.initial.len(),
                self.game.num_profiles()
            )));
        }
        Ok(())
    }

    /// Profiles where the agent has at least one better reply, with the
    /// admissible targets `{u} ∪ better replies` in profile order.
    pub fn decision_rows(&self) -> Vec<(ProfileIndex, Vec<ProfileIndex>)> {
        self.game
            .profiles()
            .filter_map(|u| {
                let better = self.game.better_replies(self.agent, u);
                if better.is_empty() {
                    return None;
                }
                let mut targets = better;
                let at = targets.partition_point(|&v| v < u);
                targets.insert(at, u);
                Some((u, targets))
            })
            .collect()
    }

    /// The full policy with `candidate` substituted for the agent's rows.
    pub fn policy_with(&self, candidate: &AgentRows) -> Result<DeviationPolicy> {
        let mut explicit = ExplicitPolicy::with_fallback(self.fixed_policy.clone());
        for (&u, row) in candidate {
            explicit.set_row(self.agent, u, row.iter().copied());
        }
        DeviationPolicy::explicit(&self.game, explicit)
    }
}

/// Average payoff of the agent under `candidate`, via the exact Cesàro limit.
pub fn evaluate_policy(spec: &OptimizationSpec, candidate: &AgentRows) -> Result<f64> {
    spec.game.check_agent(spec.agent)?;
    let policy = spec.policy_with(candidate)?;
    let z = build(&spec.game, &policy, &spec.rule)?;
    let process = DeviationProcess::new(spec.game.clone(), spec.initial.clone(), z)?;
    let limit = cesaro_limit_exact(&process)?;
    average_payoff(&spec.game, spec.agent, &limit)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TracePoint {
    pub evaluation: usize,
    /// Best value seen up to and including this evaluation.
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizationResult {
    pub best_rows: AgentRows,
    /// Complete policy: `best_rows` for the agent, the fixed policy elsewhere.
    pub best_policy: DeviationPolicy,
    pub best_value: f64,
    pub evaluations: usize,
    pub trace: Vec<TracePoint>,
}

struct Search<'a> {
    spec: &'a OptimizationSpec,
    rows: &'a [(ProfileIndex, Vec<ProfileIndex>)],
    budget: usize,
    values: Vec<f64>,
    best: f64,
    best_x: Vec<Vec<f64>>,
}

impl Search<'_> {
    fn new<'a>(
        spec: &'a OptimizationSpec,
        rows: &'a [(ProfileIndex, Vec<ProfileIndex>)],
        budget: usize,
    ) -> Search<'a> {
        Search {
            spec,
            rows,
            budget,
            values: Vec::with_capacity(budget),
            best: f64::NEG_INFINITY,
            best_x: Vec::new(),
        }
    }

    fn candidate(&self, weights: &[Vec<f64>]) -> AgentRows {
        self.rows
            .iter()
            .zip(weights)
            .map(|((u, targets), w)| {
                let total: f64 = w.iter().sum();
                let row = targets
                    .iter()
                    .zip(w)
                    .map(|(&v, &x)| (v, x / total))
                    .collect();
                (*u, row)
            })
            .collect()
    }

    /// Evaluates `weights`, keeping the incumbent equal to the maximum of
    /// every value seen so far (first one on ties).
    fn eval(&mut self, weights: &[Vec<f64>]) -> Result<f64> {
        let value = evaluate_policy(self.spec, &self.candidate(weights))?;
        self.values.push(value);
        if value > self.best {
            self.best = value;
            self.best_x = weights.to_vec();
        }
        Ok(value)
    }

    fn exhausted(&self) -> bool {
        self.values.len() >= self.budget
    }

    /// Pattern search from `start`; the incumbent ends up in `best_x`.
    fn run(&mut self, start: Vec<Vec<f64>>, rng: &mut ChaCha8Rng) -> Result<()> {
        let mut x = start;
        let mut value = self.eval(&x)?;
        let mut step = 0.5;
        'outer: while !self.exhausted() && !self.rows.is_empty() {
            let mut improved = false;
            'sweep: for r in 0..x.len() {
                for j in 0..x[r].len() {
                    for dir in [1.0, -1.0] {
                        if self.exhausted() {
                            break 'outer;
                        }
                        let moved = (x[r][j] + dir * step).max(0.0);
                        if moved == x[r][j] {
                            continue;
                        }
                        let mut trial = x.clone();
                        trial[r][j] = moved;
                        let total: f64 = trial[r].iter().sum();
                        if total <= 0.0 {
                            continue;
                        }
                        trial[r].iter_mut().for_each(|w| *w /= total);
                        let v = self.eval(&trial)?;
                        if v > value + IMPROVEMENT {
                            x = trial;
                            value = v;
                            improved = true;
                            break 'sweep;
                        }
                    }
                }
            }
            if !improved {
                step *= 0.5;
                if step < MIN_STEP {
                    // local optimum: jitter the best point and continue
                    x = jitter(&self.best_x, rng);
                    if self.exhausted() {
                        break;
                    }
                    value = self.eval(&x)?;
                    step = 0.5;
                }
            }
        }
        Ok(())
    }
}

fn jitter(x: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    x.iter()
        .map(|row| {
            let mut r: Vec<f64> = row
                .iter()
                .map(|&w| w * rng.random_range(0.5..1.5) + rng.random_range(0.0..0.1))
                .collect();
            let total: f64 = r.iter().sum();
            r.iter_mut().for_each(|w| *w /= total);
            r
        })
        .collect()
}

fn builtin_weights(
    spec: &OptimizationSpec,
    rows: &[(ProfileIndex, Vec<ProfileIndex>)],
    policy: &DeviationPolicy,
) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|(u, targets)| {
            targets
                .iter()
                .map(|&v| policy.psi(&spec.game, spec.agent, *u, v))
                .collect()
        })
        .collect()
}

struct RestartOutcome {
    values: Vec<f64>,
    weights: Vec<Vec<f64>>,
    best: f64,
}

/// Multi-start search within `spec.budget` evaluations. Restart 0 starts
/// from `UniformBetter(0)`, restart 1 from `ProportionalImprovement(0)`,
/// later restarts from random weights. Deterministic given `spec.seed`.
pub fn optimize(spec: &OptimizationSpec) -> Result<OptimizationResult> {
    spec.check()?;
    let rows = spec.decision_rows();
    let restarts = if rows.is_empty() { 1 } else { spec.restarts };
    let per = spec.budget / restarts;
    let extra = spec.budget % restarts;

    let outcomes = (0..restarts)
        .into_par_iter()
        .map(|k| {
            let budget = per + usize::from(k < extra);
            let mut rng = ChaCha8Rng::seed_from_u64(trajectory_seed(spec.seed, k as u64));
            let start = match k {
                0 => builtin_weights(
                    spec,
                    &rows,
                    &DeviationPolicy::UniformBetter { stay_weight: 0.0 },
                ),
                1 => builtin_weights(
                    spec,
                    &rows,
                    &DeviationPolicy::ProportionalImprovement { stay_weight: 0.0 },
                ),
                _ => rows
                    .iter()
                    .map(|(_, t)| {
                        let mut w: Vec<f64> =
                            t.iter().map(|_| rng.random_range(0.0..1.0)).collect();
                        // keep at least one positive weight
                        let k = rng.random_range(0..w.len());
                        w[k] += 0.5;
                        let total: f64 = w.iter().sum();
                        w.iter_mut().for_each(|x| *x /= total);
                        w
                    })
                    .collect(),
            };
            let mut search = Search::new(spec, &rows, budget);
            search.run(start, &mut rng)?;
            Ok(RestartOutcome {
                values: search.values,
                weights: search.best_x,
                best: search.best,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut trace = Vec::new();
    let mut running = f64::NEG_INFINITY;
    for v in outcomes.iter().flat_map(|o| &o.values) {
        running = running.max(*v);
        trace.push(TracePoint {
            evaluation: trace.len(),
            value: running,
        });
    }
    let winner = outcomes.iter().enumerate().fold(0, |best, (k, o)| {
        if o.best > outcomes[best].best {
            k
        } else {
            best
        }
    });
    let search = Search::new(spec, &rows, 0);
    let best_rows = search.candidate(&outcomes[winner].weights);
    let best_policy = spec.policy_with(&best_rows)?;
    Ok(OptimizationResult {
        best_value: outcomes[winner].best,
        best_rows,
        best_policy,
        evaluations: trace.len(),
        trace,
    })
}

#[derive(Serialize)]
pub struct OptimizationReport {
    pub agent: String,
    pub rule: UpdateRule,
    pub fixed_policy: PolicyConfig,
    pub initial: Distribution,
    pub budget: usize,
    pub restarts: usize,
    pub seed: u64,
    pub evaluations: usize,
    pub best_value: f64,
    pub best_policy: PolicyConfig,
    pub trace: Vec<TracePoint>,
}

impl OptimizationReport {
    pub fn new(spec: &OptimizationSpec, result: &OptimizationResult) -> Self {
        OptimizationReport {
            agent: spec.game.players()[spec.agent].clone(),
            rule: spec.rule.clone(),
            fixed_policy: spec.fixed_policy.to_config(&spec.game),
            initial: spec.initial.clone(),
            budget: spec.budget,
            restarts: spec.restarts,
            seed: spec.seed,
            evaluations: result.evaluations,
            best_value: result.best_value,
            best_policy: result.best_policy.to_config(&spec.game),
            trace: result.trace.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::policy::{validate_policy, AgendaWeights};

    fn selection_spec(budget: usize) -> OptimizationSpec {
        OptimizationSpec {
            game: fixtures::selection_game(),
            agent: 0,
            fixed_policy: DeviationPolicy::default(),
            rule: UpdateRule::Asynchronous(AgendaWeights::uniform(2)),
            initial: Distribution::uniform(9),
            budget,
            restarts: 4,
            seed: 11,
        }
    }

    fn rows_of(spec: &OptimizationSpec, policy: &DeviationPolicy) -> AgentRows {
        spec.decision_rows()
            .into_iter()
            .map(|(u, _)| (u, policy.agent_row(&spec.game, spec.agent, u)))
            .collect()
    }

    #[test]
    fn escape_rows_reach_three() {
        let mut spec = selection_spec(10);
        let policy = fixtures::selection_policy();
        spec.fixed_policy = policy.clone();
        let v = evaluate_policy(&spec, &rows_of(&spec, &policy)).unwrap();
        assert!((v - 3.0).abs() < 1e-9);
    }

    #[test]
    fn confined_cycle_pays_zero() {
        let g = fixtures::selection_game();
        let cycle: Vec<ProfileIndex> = ["U,L", "U,M", "C,L", "C,M"]
            .iter()
            .map(|l| g.parse_profile(l).unwrap())
            .collect();
        let mut spec = selection_spec(10);
        let policy = fixtures::selection_confined_policy();
        spec.fixed_policy = policy.clone();
        spec.initial = Distribution::uniform_over(9, &cycle).unwrap();
        let v = evaluate_policy(&spec, &rows_of(&spec, &policy)).unwrap();
        assert!(v.abs() < 1e-9, "{v}");
    }

    #[test]
    fn pd_objective_is_flat() {
        let g = fixtures::prisoners_dilemma();
        let spec = OptimizationSpec {
            game: g,
            agent: 0,
            fixed_policy: DeviationPolicy::default(),
            rule: UpdateRule::Synchronous,
            initial: Distribution::uniform(4),
            budget: 40,
            restarts: 3,
            seed: 3,
        };
        let stay_heavy: AgentRows = spec
            .decision_rows()
            .into_iter()
            .map(|(u, t)| {
                let n = t.len() as f64;
                (u, t.into_iter().map(|v| (v, 1.0 / n)).collect())
            })
            .collect();
        assert!((evaluate_policy(&spec, &stay_heavy).unwrap() + 2.0).abs() < 1e-9);
        let r = optimize(&spec).unwrap();
        assert!((r.best_value + 2.0).abs() < 1e-9);
        assert_eq!(r.evaluations, 40);
    }

    #[test]
    fn optimizer_on_selection_game() {
        let spec = selection_spec(120);
        let r = optimize(&spec).unwrap();
        assert!(r.best_value >= 3.0 - 1e-6);
        assert!(validate_policy(&r.best_policy, &spec.game).is_valid());
        assert_eq!(evaluate_policy(&spec, &r.best_rows).unwrap(), r.best_value);
        assert!(r.trace.windows(2).all(|w| w[0].value <= w[1].value));
        assert_eq!(r.evaluations, 120);
        assert_eq!(optimize(&spec).unwrap(), r);
    }

    #[test]
    fn trivial_game() {
        let g = GameSpec::from_sizes(&[1, 1], vec![vec![4.0, -1.0]]).unwrap();
        let spec = OptimizationSpec {
            game: g,
            agent: 1,
            fixed_policy: DeviationPolicy::default(),
            rule: UpdateRule::Synchronous,
            initial: Distribution::uniform(1),
            budget: 5,
            restarts: 2,
            seed: 0,
        };
        let r = optimize(&spec).unwrap();
        assert_eq!(r.best_value, -1.0);
        assert!(r.best_rows.is_empty());
        assert_eq!(r.evaluations, 1);
    }

    #[test]
    fn invalid_specs() {
        let mut spec = selection_spec(0);
        assert!(optimize(&spec).is_err());
        spec.budget = 2;
        spec.restarts = 3;
        assert!(optimize(&spec).is_err());
        spec.restarts = 1;
        spec.agent = 5;
        assert!(optimize(&spec).is_err());

        let spec = selection_spec(5);
        let ul = spec.game.parse_profile("U,L").unwrap();
        let um = spec.game.parse_profile("U,M").unwrap();
        let mut bad = AgentRows::new();
        bad.insert(ul, vec![(um, 1.0)]);
        assert!(matches!(
            evaluate_policy(&spec, &bad),
            Err(Error::InvalidPolicy(_))
        ));
    }
}
