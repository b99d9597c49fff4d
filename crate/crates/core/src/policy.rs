//! Individual transition probabilities: how each agent moves within its own
//! deviation set.
//!
//! A policy assigns every agent `i` and profile `u` a probability row over
//! `S^i_u`. Admissible rows sum to one, put mass off `u` only on strict
//! improvements for `i`, and stay put with probability one when no
//! improvement exists.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{GameSpec, ProfileIndex};

/// Tolerance for row normalization of individual transition probabilities.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Sparse probability row sorted by target profile; only positive entries.
pub type Row = Vec<(ProfileIndex, f64)>;

#[derive(Clone, Debug, PartialEq)]
pub enum DeviationPolicy {
    /// Mass `stay_weight` on the current profile, the rest split evenly over
    /// better replies.
    UniformBetter {
        stay_weight: f64,
    },
    /// Mass `stay_weight` on the current profile, the rest split in
    /// proportion to payoff improvement.
    ProportionalImprovement {
        stay_weight: f64,
    },
    Explicit(ExplicitPolicy),
}

impl Default for DeviationPolicy {
    fn default() -> Self {
        DeviationPolicy::UniformBetter { stay_weight: 0.0 }
    }
}

fn check_stay_weight(stay_weight: f64) -> Result<()> {
    if (0.0..1.0).contains(&stay_weight) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "stay_weight must lie in [0,1), got {stay_weight}"
        )))
    }
}

impl DeviationPolicy {
    pub fn uniform_better(stay_weight: f64) -> Result<Self> {
        check_stay_weight(stay_weight)?;
        Ok(DeviationPolicy::UniformBetter { stay_weight })
    }

    pub fn proportional(stay_weight: f64) -> Result<Self> {
        check_stay_weight(stay_weight)?;
        Ok(DeviationPolicy::ProportionalImprovement { stay_weight })
    }

    /// Builds an explicit policy and validates it against `game` eagerly.
    pub fn explicit(game: &GameSpec, policy: ExplicitPolicy) -> Result<Self> {
        let policy = DeviationPolicy::Explicit(policy);
        let report = validate_policy(&policy, game);
        if report.is_valid() {
            Ok(policy)
        } else {
            Err(Error::InvalidPolicy(report))
        }
    }

    pub fn from_json_str(text: &str, game: &GameSpec) -> Result<Self> {
        let config: PolicyConfig = serde_json::from_str(text)?;
        config.resolve(game)
    }

    /// Agent `agent`'s positive-probability row out of `u`, sorted by target.
    pub fn agent_row(&self, game: &GameSpec, agent: usize, u: ProfileIndex) -> Row {
        let better = game.better_replies(agent, u);
        if better.is_empty() {
            return vec![(u, 1.0)];
        }
        match self {
            DeviationPolicy::UniformBetter { stay_weight } => {
                let share = (1.0 - stay_weight) / better.len() as f64;
                spread(u, *stay_weight, better.into_iter().map(|v| (v, share)))
            }
            DeviationPolicy::ProportionalImprovement { stay_weight } => {
                let base = game.payoff(agent, u);
                let total: f64 = better.iter().map(|&v| game.payoff(agent, v) - base).sum();
                let moving = 1.0 - stay_weight;
                spread(
                    u,
                    *stay_weight,
                    better
                        .into_iter()
                        .map(|v| (v, moving * (game.payoff(agent, v) - base) / total)),
                )
            }
            DeviationPolicy::Explicit(explicit) => match explicit.rows.get(&(agent, u)) {
                Some(row) => row
                    .iter()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(&v, &p)| (v, p))
                    .collect(),
                None => match &explicit.fallback {
                    Some(fallback) => fallback.agent_row(game, agent, u),
                    None => vec![(u, 1.0)],
                },
            },
        }
    }

    /// `psi_i(u, v)`: zero outside the agent's deviation set.
    pub fn psi(&self, game: &GameSpec, agent: usize, u: ProfileIndex, v: ProfileIndex) -> f64 {
        self.agent_row(game, agent, u)
            .into_iter()
            .find(|&(w, _)| w == v)
            .map_or(0.0, |(_, p)| p)
    }

    pub fn to_config(&self, game: &GameSpec) -> PolicyConfig {
        match self {
            DeviationPolicy::UniformBetter { stay_weight } => PolicyConfig::UniformBetter {
                stay_weight: *stay_weight,
            },
            DeviationPolicy::ProportionalImprovement { stay_weight } => {
                PolicyConfig::Proportional {
                    stay_weight: *stay_weight,
                }
            }
            DeviationPolicy::Explicit(explicit) => explicit.to_config(game),
        }
    }

    /// Materializes every agent's rows as an explicit policy.
    pub fn to_explicit(&self, game: &GameSpec) -> ExplicitPolicy {
        let mut explicit = ExplicitPolicy::default();
        for i in 0..game.num_agents() {
            for u in game.profiles() {
                explicit.set_row(i, u, self.agent_row(game, i, u));
            }
        }
        explicit
    }
}

fn spread(u: ProfileIndex, stay: f64, moves: impl Iterator<Item = (ProfileIndex, f64)>) -> Row {
    let mut row: Row = moves.collect();
    if stay > 0.0 {
        let at = row.partition_point(|&(v, _)| v < u);
        row.insert(at, (u, stay));
    }
    row
}

/// User-supplied rows keyed by `(agent, source profile)`. Rows not listed
/// defer to `fallback` when present.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExplicitPolicy {
    rows: BTreeMap<(usize, ProfileIndex), BTreeMap<ProfileIndex, f64>>,
    fallback: Option<Box<DeviationPolicy>>,
}

impl ExplicitPolicy {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_fallback(fallback: DeviationPolicy) -> Self {
        ExplicitPolicy {
            rows: BTreeMap::new(),
            fallback: Some(Box::new(fallback)),
        }
    }

    pub fn set_row(
        &mut self,
        agent: usize,
        from: ProfileIndex,
        row: impl IntoIterator<Item = (ProfileIndex, f64)>,
    ) {
        self.rows.insert((agent, from), row.into_iter().collect());
    }

    pub fn row(&self, agent: usize, from: ProfileIndex) -> Option<&BTreeMap<ProfileIndex, f64>> {
        self.rows.get(&(agent, from))
    }

    pub fn rows(
        &self,
    ) -> impl Iterator<Item = ((usize, ProfileIndex), &BTreeMap<ProfileIndex, f64>)> {
        self.rows.iter().map(|(&k, v)| (k, v))
    }

    pub fn fallback(&self) -> Option<&DeviationPolicy> {
        self.fallback.as_deref()
    }

    pub fn to_config(&self, game: &GameSpec) -> PolicyConfig {
        PolicyConfig::Explicit {
            rows: self
                .rows
                .iter()
                .map(|(&(agent, from), targets)| RowConfig {
                    agent: game.players()[agent].clone(),
                    from: game
                        .coords(from)
                        .iter()
                        .enumerate()
                        .map(|(i, &c)| game.strategies(i)[c].clone())
                        .collect(),
                    to: targets
                        .iter()
                        .map(|(&v, &p)| (game.profile_label(v), p))
                        .collect(),
                })
                .collect(),
            fallback: self.fallback.as_ref().map(|f| Box::new(f.to_config(game))),
        }
    }
}

/// Probability of each agent being the one that moves under asynchronous updating.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct AgendaWeights(Vec<f64>);

impl AgendaWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidWeights("no weights given".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(Error::InvalidWeights(format!("weight {w} outside [0,1]")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::InvalidWeights(format!(
                "weights sum to {sum}, not 1"
            )));
        }
        Ok(AgendaWeights(weights))
    }

    pub fn uniform(n: usize) -> Self {
        AgendaWeights(vec![1.0 / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "constraint", rename_all = "snake_case")]
pub enum ViolationKind {
    StayWeightOutOfRange { stay_weight: f64 },
    MissingRow,
    NotNormalized { sum: f64 },
    NonFinite { target: usize },
    NegativeProbability { target: usize, probability: f64 },
    OutsideDeviationSet { target: usize },
    NonImprovingMass { target: usize, probability: f64 },
    AgentOutOfRange,
    ProfileOutOfRange,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationKind::StayWeightOutOfRange { stay_weight } => {
                write!(f, "stay weight {stay_weight} outside [0,1)")
            }
            ViolationKind::MissingRow => write!(f, "row missing while better replies exist"),
            ViolationKind::NotNormalized { sum } => write!(f, "row not normalized (sum {sum})"),
            ViolationKind::NonFinite { target } => {
                write!(f, "non-finite probability toward profile {target}")
            }
            ViolationKind::NegativeProbability {
                target,
                probability,
            } => write!(
                f,
                "negative probability {probability} toward profile {target}"
            ),
            ViolationKind::OutsideDeviationSet { target } => {
                write!(f, "mass on profile {target} outside the deviation set")
            }
            ViolationKind::NonImprovingMass {
                target,
                probability,
            } => write!(
                f,
                "positive mass on non-improving deviation ({probability} toward profile {target})"
            ),
            ViolationKind::AgentOutOfRange => write!(f, "agent index out of range"),
            ViolationKind::ProfileOutOfRange => write!(f, "profile index out of range"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub agent: usize,
    pub profile: ProfileIndex,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "agent #{} at profile {}: {}",
            self.agent + 1,
            self.profile,
            self.kind
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "  {v}")?;
        }
        Ok(())
    }
}

/// Lists every violation of the admissibility constraints. Empty means valid.
pub fn validate_policy(policy: &DeviationPolicy, game: &GameSpec) -> ValidationReport {
    let mut report = ValidationReport::default();
    validate_into(policy, game, &mut report);
    report
}

fn validate_into(policy: &DeviationPolicy, game: &GameSpec, report: &mut ValidationReport) {
    match policy {
        DeviationPolicy::UniformBetter { stay_weight }
        | DeviationPolicy::ProportionalImprovement { stay_weight } => {
            if !(0.0..1.0).contains(stay_weight) {
                report.violations.push(Violation {
                    agent: 0,
                    profile: ProfileIndex(0),
                    kind: ViolationKind::StayWeightOutOfRange {
                        stay_weight: *stay_weight,
                    },
                });
            }
        }
        DeviationPolicy::Explicit(explicit) => {
            for (&(agent, u), row) in &explicit.rows {
                let mut push = |kind| {
                    report.violations.push(Violation {
                        agent,
                        profile: u,
                        kind,
                    })
                };
                if agent >= game.num_agents() {
                    push(ViolationKind::AgentOutOfRange);
                    continue;
                }
                if u.0 >= game.num_profiles() {
                    push(ViolationKind::ProfileOutOfRange);
                    continue;
                }
                check_row(game, agent, u, row, &mut push);
            }
            match &explicit.fallback {
                Some(fallback) => validate_into(fallback, game, report),
                None => {
                    for agent in 0..game.num_agents() {
                        for u in game.profiles() {
                            if !explicit.rows.contains_key(&(agent, u))
                                && game.has_better_reply(agent, u)
                            {
                                report.violations.push(Violation {
                                    agent,
                                    profile: u,
                                    kind: ViolationKind::MissingRow,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
}

fn check_row(
    game: &GameSpec,
    agent: usize,
    u: ProfileIndex,
    row: &BTreeMap<ProfileIndex, f64>,
    push: &mut impl FnMut(ViolationKind),
) {
    let base = game.payoff(agent, u);
    let mut sum = 0.0;
    for (&v, &p) in row {
        if !p.is_finite() {
            push(ViolationKind::NonFinite { target: v.0 });
            continue;
        }
        if p < 0.0 {
            push(ViolationKind::NegativeProbability {
                target: v.0,
                probability: p,
            });
        }
        sum += p;
        if p == 0.0 || v == u {
            continue;
        }
        let in_set = v.0 < game.num_profiles()
            && (0..game.num_agents()).all(|j| j == agent || game.coord(u, j) == game.coord(v, j));
        if !in_set {
            push(ViolationKind::OutsideDeviationSet { target: v.0 });
        } else if game.payoff(agent, v) <= base {
            push(ViolationKind::NonImprovingMass {
                target: v.0,
                probability: p,
            });
        }
    }
    if sum.is_finite() && (sum - 1.0).abs() > ROW_SUM_TOL {
        push(ViolationKind::NotNormalized { sum });
    }
}

/// JSON form of a policy; explicit targets are keyed by comma-joined labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyConfig {
    UniformBetter {
        #[serde(default)]
        stay_weight: f64,
    },
    Proportional {
        #[serde(default)]
        stay_weight: f64,
    },
    Explicit {
        rows: Vec<RowConfig>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fallback: Option<Box<PolicyConfig>>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowConfig {
    pub agent: String,
    pub from: Vec<String>,
    pub to: BTreeMap<String, f64>,
}

impl PolicyConfig {
    pub fn resolve(&self, game: &GameSpec) -> Result<DeviationPolicy> {
        match self {
            PolicyConfig::UniformBetter { stay_weight } => {
                DeviationPolicy::uniform_better(*stay_weight)
            }
            PolicyConfig::Proportional { stay_weight } => {
                DeviationPolicy::proportional(*stay_weight)
            }
            PolicyConfig::Explicit { rows, fallback } => {
                let mut explicit = ExplicitPolicy::new();
                if let Some(fb) = fallback {
                    explicit.fallback = Some(Box::new(fb.resolve(game)?));
                }
                for row in rows {
                    let agent = game.agent_index(&row.agent)?;
                    let from = game.profile_from_labels(&row.from)?;
                    if explicit.rows.contains_key(&(agent, from)) {
                        return Err(Error::Domain(format!(
                            "duplicate explicit row for agent `{}` at `{}`",
                            row.agent,
                            row.from.join(",")
                        )));
                    }
                    let targets = row
                        .to
                        .iter()
                        .map(|(label, &p)| Ok((game.parse_profile(label)?, p)))
                        .collect::<Result<Vec<_>>>()?;
                    explicit.set_row(agent, from, targets);
                }
                DeviationPolicy::explicit(game, explicit)
            }
        }
    }
}
