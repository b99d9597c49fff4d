//! Monte Carlo sampling of the deviation process.
//!
//! Every trajectory draws from its own `ChaCha8Rng`. For a batch run with
//! master seed `m`, trajectory `k` is seeded with `splitmix64(m + k * GOLDEN)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{cesaro_limit_exact, DeviationProcess, Distribution};
use crate::error::{Error, Result};
use crate::game::ProfileIndex;

pub const GENERATOR: &str = "ChaCha8Rng";
const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(GOLDEN);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn trajectory_seed(master: u64, k: u64) -> u64 {
    splitmix64(master.wrapping_add(k.wrapping_mul(GOLDEN)))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Trajectory {
    pub states: Vec<ProfileIndex>,
    pub seed: u64,
}

/// Inverse-CDF draw over `(target, probability)` pairs in the given order.
/// Round-off past the last cumulative value falls on the last entry.
fn draw(entries: impl Iterator<Item = (usize, f64)>, r: f64) -> usize {
    let mut acc = 0.0;
    let mut last = None;
    for (k, p) in entries {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = Some(k);
        if r < acc {
            return k;
        }
    }
    last.expect("distribution with positive mass")
}

/// Samples `horizon` transitions starting from a draw of `pi0`.
pub fn sample_trajectory(process: &DeviationProcess, horizon: usize, seed: u64) -> Trajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = process.matrix();
    let mut states = Vec::with_capacity(horizon + 1);
    let pi0 = process.initial().probs();
    let mut u = draw(pi0.iter().copied().enumerate(), rng.random::<f64>());
    states.push(ProfileIndex(u));
    for _ in 0..horizon {
        let r: f64 = rng.random();
        u = draw(z.row(ProfileIndex(u)).iter().map(|&(v, p)| (v.0, p)), r);
        states.push(ProfileIndex(u));
    }
    Trajectory { states, seed }
}

/// Pooled visit frequencies of the states at positions `>= burn_in`.
pub fn empirical_occupation(
    trajectories: &[Trajectory],
    size: usize,
    burn_in: usize,
) -> Result<Distribution> {
    if trajectories.is_empty() {
        return Err(Error::Domain("no trajectories to pool".into()));
    }
    let mut counts = vec![0u64; size];
    for t in trajectories {
        if t.states.len() <= burn_in {
            return Err(Error::Domain(format!(
                "trajectory with {} states is not longer than burn-in {burn_in}",
                t.states.len()
            )));
        }
        for u in &t.states[burn_in..] {
            counts[u.0] += 1;
        }
    }
    let total: u64 = counts.iter().sum();
    Distribution::new(
        counts
            .into_iter()
            .map(|c| c as f64 / total as f64)
            .collect(),
    )
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SimulationConfig {
    pub trajectories: usize,
    pub horizon: usize,
    /// Defaults to 1% of the horizon.
    pub burn_in: Option<usize>,
    pub master_seed: u64,
}

impl SimulationConfig {
    pub fn effective_burn_in(&self) -> usize {
        self.burn_in.unwrap_or(self.horizon / 100)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulationReport {
    pub generator: &'static str,
    pub master_seed: u64,
    pub seeds: Vec<u64>,
    pub trajectories: usize,
    pub horizon: usize,
    pub burn_in: usize,
    pub empirical: Distribution,
    pub analytic: Option<Distribution>,
    pub l1_to_analytic: Option<f64>,
}

/// Runs the batch in parallel and compares the pooled occupation with the
/// exact Cesàro limit when that can be computed.
pub fn simulate(process: &DeviationProcess, config: &SimulationConfig) -> Result<SimulationReport> {
    if config.trajectories == 0 {
        return Err(Error::Domain("at least one trajectory is required".into()));
    }
    let burn_in = config.effective_burn_in();
    if burn_in > config.horizon {
        return Err(Error::Domain(format!(
            "burn-in {burn_in} exceeds horizon {}",
            config.horizon
        )));
    }
    let seeds: Vec<u64> = (0..config.trajectories as u64)
        .map(|k| trajectory_seed(config.master_seed, k))
        .collect();
    let size = process.matrix().size();
    let counts = seeds
        .par_iter()
        .map(|&s| {
            let t = sample_trajectory(process, config.horizon, s);
            let mut c = vec![0u64; size];
            for u in &t.states[burn_in..] {
                c[u.0] += 1;
            }
            c
        })
        .reduce(
            || vec![0u64; size],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let total: u64 = counts.iter().sum();
    let empirical = Distribution::new(
        counts
            .into_iter()
            .map(|c| c as f64 / total as f64)
            .collect(),
    )?;
    let analytic = cesaro_limit_exact(process).ok();
    let l1_to_analytic = analytic.as_ref().map(|a| a.l1_distance(&empirical));
    Ok(SimulationReport {
        generator: GENERATOR,
        master_seed: config.master_seed,
        seeds,
        trajectories: config.trajectories,
        horizon: config.horizon,
        burn_in,
        empirical,
        analytic,
        l1_to_analytic,
    })
}
