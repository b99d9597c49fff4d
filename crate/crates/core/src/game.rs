//! Finite static games: players, strategy sets, and a dense payoff tensor.
//!
//! Strategy profiles are encoded as a single mixed-radix integer with the
//! last agent's strategy varying fastest, so a 3x3 game enumerates
//! `(U,L), (U,M), (U,R), (C,L), ...` in that order.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Canonical integer encoding of a strategy profile.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProfileIndex(pub usize);

impl ProfileIndex {
    #[inline]
    pub fn get(self) -> usize {
        self.0
    }
}

impl fmt::Display for ProfileIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<usize> for ProfileIndex {
    fn from(value: usize) -> Self {
        ProfileIndex(value)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GameSpec {
    players: Vec<String>,
    strategies: Vec<Vec<String>>,
    /// `strides[i]` is the index step for a unit change of agent `i`'s coordinate.
    strides: Vec<usize>,
    /// Row-major `|S| x n` payoffs.
    payoffs: Vec<f64>,
}

impl GameSpec {
    /// Builds a game from per-profile payoff vectors listed in canonical order.
    pub fn new(
        players: Vec<String>,
        strategies: Vec<Vec<String>>,
        payoffs: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = players.len();
        if n == 0 {
            return Err(Error::InvalidGame(
                "a game needs at least one player".into(),
            ));
        }
        if strategies.len() != n {
            return Err(Error::InvalidGame(format!(
                "{} players but {} strategy sets",
                n,
                strategies.len()
            )));
        }
        let mut seen_players = HashSet::new();
        for p in &players {
            if !seen_players.insert(p.as_str()) {
                return Err(Error::InvalidGame(format!("duplicate player `{p}`")));
            }
        }
        for (i, set) in strategies.iter().enumerate() {
            if set.is_empty() {
                return Err(Error::InvalidGame(format!(
                    "player `{}` has an empty strategy set",
                    players[i]
                )));
            }
            let mut seen = HashSet::new();
            for s in set {
                if !seen.insert(s.as_str()) {
                    return Err(Error::InvalidGame(format!(
                        "player `{}` lists strategy `{s}` twice",
                        players[i]
                    )));
                }
            }
        }

        let mut strides = vec![1usize; n];
        let mut size = 1usize;
        for i in (0..n).rev() {
            strides[i] = size;
            size = size
                .checked_mul(strategies[i].len())
                .ok_or_else(|| Error::InvalidGame("profile space overflows usize".into()))?;
        }

        if payoffs.len() != size {
            return Err(Error::InvalidGame(format!(
                "expected {size} payoff vectors, found {}",
                payoffs.len()
            )));
        }
        let mut flat = Vec::with_capacity(size * n);
        for (k, p) in payoffs.iter().enumerate() {
            if p.len() != n {
                return Err(Error::InvalidGame(format!(
                    "payoff vector of profile {k} has {} components, expected {n}",
                    p.len()
                )));
            }
            if let Some(bad) = p.iter().find(|x| !x.is_finite()) {
                return Err(Error::InvalidGame(format!(
                    "payoff vector of profile {k} contains non-finite value {bad}"
                )));
            }
            flat.extend_from_slice(p);
        }

        Ok(GameSpec {
            players,
            strategies,
            strides,
            payoffs: flat,
        })
    }

    /// Convenience constructor with players named `1..n` and strategies `0..k`.
    pub fn from_sizes(sizes: &[usize], payoffs: Vec<Vec<f64>>) -> Result<Self> {
        let players = (1..=sizes.len()).map(|i| i.to_string()).collect();
        let strategies = sizes
            .iter()
            .map(|&k| (0..k).map(|s| s.to_string()).collect())
            .collect();
        GameSpec::new(players, strategies, payoffs)
    }

    pub fn num_agents(&self) -> usize {
        self.players.len()
    }

    pub fn num_strategies(&self, agent: usize) -> usize {
        self.strategies[agent].len()
    }

    pub fn num_profiles(&self) -> usize {
        self.payoffs.len() / self.players.len()
    }

    pub fn players(&self) -> &[String] {
        &self.players
    }

    pub fn strategies(&self, agent: usize) -> &[String] {
        &self.strategies[agent]
    }

    pub fn profiles(&self) -> impl Iterator<Item = ProfileIndex> {
        (0..self.num_profiles()).map(ProfileIndex)
    }

    pub fn agent_index(&self, id: &str) -> Result<usize> {
        self.players
            .iter()
            .position(|p| p == id)
            .ok_or_else(|| Error::UnknownLabel {
                what: "player",
                label: id.to_string(),
            })
    }

    pub fn check_agent(&self, agent: usize) -> Result<()> {
        if agent < self.num_agents() {
            Ok(())
        } else {
            Err(Error::AgentOutOfRange {
                agent,
                players: self.num_agents(),
            })
        }
    }

    pub fn check_profile(&self, u: ProfileIndex) -> Result<()> {
        if u.0 < self.num_profiles() {
            Ok(())
        } else {
            Err(Error::ProfileOutOfRange {
                index: u.0,
                size: self.num_profiles(),
            })
        }
    }

    /// Mixed-radix encoding of per-agent strategy indices.
    pub fn profile_index(&self, coords: &[usize]) -> Result<ProfileIndex> {
        if coords.len() != self.num_agents() {
            return Err(Error::ShapeMismatch(format!(
                "profile has {} coordinates, game has {} players",
                coords.len(),
                self.num_agents()
            )));
        }
        let mut index = 0;
        for (i, (&c, &stride)) in coords.iter().zip(&self.strides).enumerate() {
            let size = self.num_strategies(i);
            if c >= size {
                return Err(Error::StrategyOutOfRange {
                    agent: i,
                    index: c,
                    size,
                });
            }
            index += c * stride;
        }
        Ok(ProfileIndex(index))
    }

    pub fn coords(&self, u: ProfileIndex) -> Vec<usize> {
        (0..self.num_agents()).map(|i| self.coord(u, i)).collect()
    }

    #[inline]
    pub fn coord(&self, u: ProfileIndex, agent: usize) -> usize {
        (u.0 / self.strides[agent]) % self.strategies[agent].len()
    }

    /// `u` with agent `agent`'s strategy replaced by `strategy`.
    #[inline]
    pub fn with_coord(&self, u: ProfileIndex, agent: usize, strategy: usize) -> ProfileIndex {
        let stride = self.strides[agent];
        let current = self.coord(u, agent);
        ProfileIndex(u.0 - current * stride + strategy * stride)
    }

    #[inline]
    pub fn payoff(&self, agent: usize, u: ProfileIndex) -> f64 {
        self.payoffs[u.0 * self.num_agents() + agent]
    }

    pub fn payoff_vector(&self, u: ProfileIndex) -> &[f64] {
        let n = self.num_agents();
        &self.payoffs[u.0 * n..(u.0 + 1) * n]
    }

    /// The agent's payoff over all profiles in canonical order.
    pub fn agent_payoffs(&self, agent: usize) -> Vec<f64> {
        self.profiles().map(|u| self.payoff(agent, u)).collect()
    }

    /// Comma-joined strategy labels, e.g. `"D,C"`.
    pub fn profile_label(&self, u: ProfileIndex) -> String {
        self.coords(u)
            .iter()
            .enumerate()
            .map(|(i, &c)| self.strategies[i][c].as_str())
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn profile_from_labels<S: AsRef<str>>(&self, labels: &[S]) -> Result<ProfileIndex> {
        if labels.len() != self.num_agents() {
            return Err(Error::ShapeMismatch(format!(
                "profile lists {} strategies, game has {} players",
                labels.len(),
                self.num_agents()
            )));
        }
        let coords = labels
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let l = l.as_ref().trim();
                self.strategies[i]
                    .iter()
                    .position(|s| s == l)
                    .ok_or_else(|| Error::UnknownLabel {
                        what: "strategy",
                        label: format!("{l} (player `{}`)", self.players[i]),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        self.profile_index(&coords)
    }

    /// Parses a comma-joined label such as `"D,R"`.
    pub fn parse_profile(&self, label: &str) -> Result<ProfileIndex> {
        let parts: Vec<&str> = label.split(',').collect();
        self.profile_from_labels(&parts)
    }

    /// `S^i_u`: `u` and every profile differing from it only in agent `i`'s
    /// coordinate, in strategy order.
    pub fn deviation_set(&self, agent: usize, u: ProfileIndex) -> Vec<ProfileIndex> {
        (0..self.num_strategies(agent))
            .map(|s| self.with_coord(u, agent, s))
            .collect()
    }

    /// Members of the deviation set with a strictly greater payoff for `agent`.
    pub fn better_replies(&self, agent: usize, u: ProfileIndex) -> Vec<ProfileIndex> {
        let base = self.payoff(agent, u);
        self.deviation_set(agent, u)
            .into_iter()
            .filter(|&v| self.payoff(agent, v) > base)
            .collect()
    }

    pub fn has_better_reply(&self, agent: usize, u: ProfileIndex) -> bool {
        let base = self.payoff(agent, u);
        (0..self.num_strategies(agent))
            .any(|s| self.payoff(agent, self.with_coord(u, agent, s)) > base)
    }

    pub fn profile_distance(&self, u: ProfileIndex, v: ProfileIndex) -> Result<usize> {
        self.check_profile(u)?;
        self.check_profile(v)?;
        Ok((0..self.num_agents())
            .filter(|&i| self.coord(u, i) != self.coord(v, i))
            .count())
    }

    /// Profiles at which every agent's payoff is maximal over its own strategy column.
    pub fn pure_nash_equilibria(&self) -> Vec<ProfileIndex> {
        self.profiles()
            .filter(|&u| {
                (0..self.num_agents()).all(|i| {
                    let best = (0..self.num_strategies(i))
                        .map(|s| self.payoff(i, self.with_coord(u, i, s)))
                        .fold(f64::NEG_INFINITY, f64::max);
                    self.payoff(i, u) >= best
                })
            })
            .collect()
    }

    /// True iff from every profile some path of single-agent better replies
    /// reaches a pure Nash equilibrium.
    pub fn is_weakly_acyclic(&self) -> bool {
        let size = self.num_profiles();
        let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); size];
        for u in self.profiles() {
            for i in 0..self.num_agents() {
                for v in self.better_replies(i, u) {
                    reverse[v.0].push(u.0);
                }
            }
        }
        let mut reached = vec![false; size];
        let mut queue: VecDeque<usize> = VecDeque::new();
        for u in self.pure_nash_equilibria() {
            reached[u.0] = true;
            queue.push_back(u.0);
        }
        while let Some(v) = queue.pop_front() {
            for &u in &reverse[v] {
                if !reached[u] {
                    reached[u] = true;
                    queue.push_back(u);
                }
            }
        }
        reached.into_iter().all(|r| r)
    }

    /// For each agent, the other agents whose strategy choice can change its payoff.
    pub fn neighbor_graph(&self) -> NeighborGraph {
        let n = self.num_agents();
        let mut neighbors = vec![BTreeSet::new(); n];
        for (i, set) in neighbors.iter_mut().enumerate() {
            for j in (0..n).filter(|&j| j != i) {
                let affects = self.profiles().any(|u| {
                    let base = self.payoff(i, u);
                    (0..self.num_strategies(j))
                        .any(|s| self.payoff(i, self.with_coord(u, j, s)) != base)
                });
                if affects {
                    set.insert(j);
                }
            }
        }
        NeighborGraph { neighbors }
    }

    /// Parses the JSON game format.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: GameFile = serde_json::from_str(text)?;
        file.into_game()
    }

    pub fn to_json_value(&self) -> Value {
        fn nest(game: &GameSpec, agent: usize, prefix: usize) -> Value {
            if agent == game.num_agents() {
                return Value::from(game.payoff_vector(ProfileIndex(prefix)).to_vec());
            }
            Value::Array(
                (0..game.num_strategies(agent))
                    .map(|s| nest(game, agent + 1, prefix + s * game.strides[agent]))
                    .collect(),
            )
        }
        serde_json::json!({
            "players": self.players,
            "strategies": self.strategies,
            "payoffs": nest(self, 0, 0),
        })
    }
}

/// Hamming distance between two coordinate vectors.
pub fn profile_distance(u: &[usize], v: &[usize]) -> Result<usize> {
    if u.len() != v.len() {
        return Err(Error::ShapeMismatch(format!(
            "profiles of length {} and {} come from different games",
            u.len(),
            v.len()
        )));
    }
    Ok(u.iter().zip(v).filter(|(a, b)| a != b).count())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NeighborGraph {
    neighbors: Vec<BTreeSet<usize>>,
}

impl NeighborGraph {
    pub fn neighbors(&self, agent: usize) -> &BTreeSet<usize> {
        &self.neighbors[agent]
    }

    pub fn contains(&self, agent: usize, other: usize) -> bool {
        self.neighbors[agent].contains(&other)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GameFile {
    players: Vec<String>,
    strategies: Vec<Vec<String>>,
    payoffs: Value,
}

impl GameFile {
    fn into_game(self) -> Result<GameSpec> {
        let n = self.players.len();
        if self.strategies.len() != n {
            return Err(Error::InvalidGame(format!(
                "\"strategies\" has {} entries, \"players\" has {n}",
                self.strategies.len()
            )));
        }
        let sizes: Vec<usize> = self.strategies.iter().map(Vec::len).collect();
        let mut flat = Vec::new();
        collect_payoffs(&self.payoffs, &sizes, n, "payoffs".to_string(), &mut flat)?;
        GameSpec::new(self.players, self.strategies, flat)
    }
}

fn collect_payoffs(
    node: &Value,
    sizes: &[usize],
    n: usize,
    path: String,
    out: &mut Vec<Vec<f64>>,
) -> Result<()> {
    let arr = node
        .as_array()
        .ok_or_else(|| Error::InvalidGame(format!("{path}: expected an array")))?;
    match sizes.split_first() {
        Some((&k, rest)) => {
            if arr.len() != k {
                return Err(Error::InvalidGame(format!(
                    "{path}: expected {k} entries, found {}",
                    arr.len()
                )));
            }
            for (s, child) in arr.iter().enumerate() {
                collect_payoffs(child, rest, n, format!("{path}[{s}]"), out)?;
            }
        }
        None => {
            if arr.len() != n {
                return Err(Error::InvalidGame(format!(
                    "{path}: expected a payoff vector of {n} numbers, found {} entries",
                    arr.len()
                )));
            }
            let v = arr
                .iter()
                .enumerate()
                .map(|(i, x)| {
                    x.as_f64().ok_or_else(|| {
                        Error::InvalidGame(format!("{path}[{i}]: expected a number, found {x}"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            out.push(v);
        }
    }
    Ok(())
}
