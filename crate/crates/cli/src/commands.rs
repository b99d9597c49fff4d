use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use devchain::analysis::{DEFAULT_MAX_DOUBLINGS, DEFAULT_TOL};
use devchain::format::distribution_csv;
use devchain::optimizer::OptimizationReport;
use devchain::{
    average_payoffs, cesaro_limit_exact, cesaro_limit_iterative, chain_structure, optimize,
    simulate, stationary_distributions, transition_graph, verify_pure_nash_absorbing, Distribution,
    GameSpec, OptimizationSpec, ProfileIndex, SimulationConfig,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::input::{load_game, load_policy, parse_initial, update_rule, Inputs};

/// Outcome of a command that ran to completion.
#[derive(Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    NotConverged,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    /// Convergence tolerance (L1) for the iterative Cesàro average.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    /// Maximum number of horizon doublings for the iterative Cesàro average.
    #[arg(long, default_value_t = DEFAULT_MAX_DOUBLINGS)]
    pub max_iters: usize,
    /// Also write the transition matrix to matrix.json.
    #[arg(long)]
    pub emit_matrix: bool,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct GraphArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    #[arg(long, default_value_t = 100)]
    pub trajectories: usize,
    /// Transitions per trajectory.
    #[arg(long, default_value_t = 100_000)]
    pub horizon: usize,
    /// States dropped from the start of each trajectory [default: 1% of the horizon].
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Master seed; trajectory seeds are derived from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    /// Identifier of the optimizing player, as listed in the game file.
    #[arg(long)]
    pub agent: String,
    /// Total number of objective evaluations.
    #[arg(long, default_value_t = 2000)]
    pub budget: usize,
    #[arg(long, default_value_t = 8)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(dir, name, &text)
}

fn labels(game: &GameSpec, states: impl IntoIterator<Item = ProfileIndex>) -> Vec<String> {
    states.into_iter().map(|u| game.profile_label(u)).collect()
}

fn payoff_json(game: &GameSpec, dist: &Distribution) -> Result<Value> {
    let payoffs = average_payoffs(game, dist)?;
    Ok(game
        .players()
        .iter()
        .zip(payoffs)
        .map(|(p, v)| json!({ "player": p, "value": v }))
        .collect())
}

pub fn analyze(args: &AnalyzeArgs) -> Result<Status> {
    let loaded = args.inputs.load()?;
    let (game, process) = (&loaded.game, &loaded.process);
    let z = process.matrix();

    let structure = chain_structure(z)?;
    let recurrent: Vec<_> = structure.recurrent_classes().collect();
    let classes: Vec<Value> = structure
        .classes
        .iter()
        .map(|c| {
            json!({
                "states": labels(game, c.states.iter().copied()),
                "recurrent": c.recurrent,
                "period": c.period,
            })
        })
        .collect();
    let absorption: Vec<Value> = structure
        .absorption
        .iter()
        .map(|row| json!({ "state": game.profile_label(row.state), "probs": row.probs }))
        .collect();
    let stationary = stationary_distributions(z)?;
    let limit = cesaro_limit_exact(process)?;
    let estimate = cesaro_limit_iterative(process, args.tol, args.max_iters)?;
    let nash = verify_pure_nash_absorbing(game, z);

    let report = json!({
        "game": args.inputs.game.display().to_string(),
        "chain": loaded.chain,
        "profiles": labels(game, game.profiles()),
        "initial": process.initial(),
        "weakly_acyclic": game.is_weakly_acyclic(),
        "structure": {
            "classes": classes,
            "recurrent_classes": recurrent.len(),
            "irreducible": structure.is_irreducible(),
            "aperiodic": structure.is_aperiodic(),
            "absorption": absorption,
        },
        "stationary": stationary,
        "cesaro_limit": limit,
        "iterative": {
            "tol": args.tol,
            "max_iters": args.max_iters,
            "iterations": estimate.iterations,
            "horizon": estimate.horizon,
            "last_delta": estimate.last_delta,
            "converged": estimate.converged,
            "l1_to_exact": estimate.distribution.l1_distance(&limit),
            "distribution": estimate.distribution,
        },
        "average_payoffs": payoff_json(game, &limit)?,
        "nash_check": nash,
    });
    write_json(&args.out, "analysis.json", &report)?;
    write(&args.out, "limit.csv", &distribution_csv(game, &limit)?)?;
    if args.emit_matrix {
        write_json(&args.out, "matrix.json", &z.to_json_value(Some(game)))?;
    }

    println!(
        "states: {}, recurrent classes: {}",
        z.size(),
        recurrent.len()
    );
    for (label, payoff) in game.players().iter().zip(average_payoffs(game, &limit)?) {
        println!("average payoff of player {label}: {payoff}");
    }
    println!(
        "pure equilibria absorbing: {}",
        if nash.passed { "yes" } else { "no" }
    );
    if !estimate.converged {
        eprintln!(
            "iterative average did not converge: last change {:e} after {} doublings (tol {:e})",
            estimate.last_delta, estimate.iterations, args.tol
        );
        return Ok(Status::NotConverged);
    }
    Ok(Status::Ok)
}

pub fn graph(args: &GraphArgs) -> Result<Status> {
    let loaded = args.inputs.load()?;
    let graph = transition_graph(loaded.process.matrix());
    write(&args.out, "graph.dot", &graph.to_dot(Some(&loaded.game)))?;
    println!(
        "{} vertices, {} arcs -> {}",
        graph.vertices,
        graph.arcs.len(),
        args.out.join("graph.dot").display()
    );
    Ok(Status::Ok)
}

pub fn simulate_cmd(args: &SimulateArgs) -> Result<Status> {
    let loaded = args.inputs.load()?;
    let config = SimulationConfig {
        trajectories: args.trajectories,
        horizon: args.horizon,
        burn_in: args.burn_in,
        master_seed: args.seed,
    };
    let report = simulate(&loaded.process, &config)?;
    write_json(&args.out, "simulation.json", &report)?;
    write(
        &args.out,
        "occupation.csv",
        &distribution_csv(&loaded.game, &report.empirical)?,
    )?;
    match report.l1_to_analytic {
        Some(d) => println!("L1 distance to the analytic limit: {d}"),
        None => println!("analytic limit unavailable"),
    }
    Ok(Status::Ok)
}

pub fn optimize_cmd(args: &OptimizeArgs) -> Result<Status> {
    let inputs = &args.inputs;
    if inputs.matrix.is_some() || inputs.cycle_rho0.is_some() {
        bail!("optimize needs a policy; --matrix and --cycle-rho0 are not accepted");
    }
    let game = load_game(&inputs.game)?;
    let spec = OptimizationSpec {
        agent: game.agent_index(&args.agent)?,
        fixed_policy: load_policy(inputs.policy.as_deref(), &game)?,
        rule: update_rule(inputs.rule, inputs.weights.as_deref(), &game)?,
        initial: parse_initial(&inputs.initial, &game)?,
        budget: args.budget,
        restarts: args.restarts,
        seed: args.seed,
        game,
    };
    let result = optimize(&spec)?;
    write_json(
        &args.out,
        "optimization.json",
        &OptimizationReport::new(&spec, &result),
    )?;
    write_json(
        &args.out,
        "best_policy.json",
        &result.best_policy.to_config(&spec.game),
    )?;
    println!(
        "best average payoff for player {}: {} ({} evaluations)",
        args.agent, result.best_value, result.evaluations
    );
    Ok(Status::Ok)
}
