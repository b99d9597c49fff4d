use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use devchain::format::parse_distribution_csv;
use devchain::policy::PolicyConfig;
use devchain::{
    build, build_cycle_chain_2x2, AgendaWeights, DeviationPolicy, DeviationProcess, Distribution,
    GameSpec, TransitionMatrix, UpdateRule,
};
use serde_json::{json, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Rule {
    Async,
    Sync,
}

/// Where the game, the chain and the initial distribution come from.
#[derive(Args, Debug)]
pub struct Inputs {
    /// Game file (JSON).
    #[arg(long)]
    pub game: PathBuf,

    /// Policy file (JSON). Defaults to uniform_better with stay weight 0.
    #[arg(long, conflicts_with_all = ["matrix", "cycle_rho0"])]
    pub policy: Option<PathBuf>,

    /// Explicit transition matrix (JSON) used instead of a policy.
    #[arg(long, conflicts_with_all = ["rule", "weights", "cycle_rho0"])]
    pub matrix: Option<PathBuf>,

    /// Build the cyclic 2x2 chain with this rate instead of a policy.
    #[arg(long, value_name = "RHO0", conflicts_with_all = ["rule", "weights"])]
    pub cycle_rho0: Option<f64>,

    /// Update rule [default: async].
    #[arg(long, value_enum)]
    pub rule: Option<Rule>,

    /// Agenda weights for the asynchronous rule, comma separated [default: uniform].
    #[arg(long, value_name = "W1,W2,...")]
    pub weights: Option<String>,

    /// Initial distribution: uniform, point:<labels> (e.g. point:C,D) or file:<csv>.
    #[arg(long, default_value = "uniform")]
    pub initial: String,
}

pub struct Loaded {
    pub game: GameSpec,
    pub process: DeviationProcess,
    /// Description of how the chain was obtained, for reports.
    pub chain: Value,
}

fn read(path: &Path, what: &str) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {what} file {}", path.display()))
}

pub fn load_game(path: &Path) -> Result<GameSpec> {
    let text = read(path, "game")?;
    GameSpec::from_json_str(&text).with_context(|| format!("invalid game file {}", path.display()))
}

pub fn load_policy(path: Option<&Path>, game: &GameSpec) -> Result<DeviationPolicy> {
    match path {
        None => Ok(DeviationPolicy::default()),
        Some(path) => {
            let text = read(path, "policy")?;
            DeviationPolicy::from_json_str(&text, game)
                .with_context(|| format!("invalid policy file {}", path.display()))
        }
    }
}

pub fn parse_weights(text: &str) -> Result<AgendaWeights> {
    let weights = text
        .split(',')
        .map(|w| {
            w.trim()
                .parse::<f64>()
                .with_context(|| format!("invalid agenda weight `{w}`"))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AgendaWeights::new(weights)?)
}

pub fn update_rule(
    rule: Option<Rule>,
    weights: Option<&str>,
    game: &GameSpec,
) -> Result<UpdateRule> {
    match (rule.unwrap_or(Rule::Async), weights) {
        (Rule::Sync, Some(_)) => bail!("--weights applies only to --rule async"),
        (Rule::Sync, None) => Ok(UpdateRule::Synchronous),
        (Rule::Async, None) => Ok(UpdateRule::Asynchronous(AgendaWeights::uniform(
            game.num_agents(),
        ))),
        (Rule::Async, Some(text)) => {
            let weights = parse_weights(text)?;
            if weights.len() != game.num_agents() {
                bail!(
                    "{} agenda weights given for a {}-player game",
                    weights.len(),
                    game.num_agents()
                );
            }
            Ok(UpdateRule::Asynchronous(weights))
        }
    }
}

pub fn parse_initial(spec: &str, game: &GameSpec) -> Result<Distribution> {
    let n = game.num_profiles();
    if spec == "uniform" {
        return Ok(Distribution::uniform(n));
    }
    if let Some(labels) = spec.strip_prefix("point:") {
        let u = game
            .parse_profile(labels)
            .with_context(|| format!("invalid --initial profile `{labels}`"))?;
        return Ok(Distribution::point(n, u));
    }
    if let Some(path) = spec.strip_prefix("file:") {
        let text = read(Path::new(path), "initial distribution")?;
        return parse_distribution_csv(&text, game)
            .with_context(|| format!("invalid initial distribution file {path}"));
    }
    bail!("--initial must be uniform, point:<labels> or file:<path>, got `{spec}`")
}

pub fn rule_json(rule: &UpdateRule) -> Value {
    match rule {
        UpdateRule::Synchronous => json!({ "rule": "sync" }),
        UpdateRule::Asynchronous(w) => json!({ "rule": "async", "weights": w.as_slice() }),
    }
}

impl Inputs {
    pub fn load(&self) -> Result<Loaded> {
        let game = load_game(&self.game)?;
        let (z, chain) = if let Some(path) = &self.matrix {
            let text = read(path, "matrix")?;
            let z = TransitionMatrix::from_json_str(&text, Some(&game))
                .with_context(|| format!("invalid matrix file {}", path.display()))?;
            (
                z,
                json!({ "source": "matrix", "path": path.display().to_string() }),
            )
        } else if let Some(rho0) = self.cycle_rho0 {
            let z = build_cycle_chain_2x2(&game, rho0)?;
            (z, json!({ "source": "cycle_2x2", "rho0": rho0 }))
        } else {
            let policy = load_policy(self.policy.as_deref(), &game)?;
            let rule = update_rule(self.rule, self.weights.as_deref(), &game)?;
            let z = build(&game, &policy, &rule)?;
            let config: PolicyConfig = policy.to_config(&game);
            let mut chain = rule_json(&rule);
            chain["source"] = json!("policy");
            chain["policy"] = serde_json::to_value(config)?;
            (z, chain)
        };
        let initial = parse_initial(&self.initial, &game)?;
        let process = DeviationProcess::new(game.clone(), initial, z)?;
        Ok(Loaded {
            game,
            process,
            chain,
        })
    }
}
