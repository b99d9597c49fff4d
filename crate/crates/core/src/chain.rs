//! Aggregation of individual policies into the profile transition matrix `Z`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::sig;
use crate::game::{GameSpec, ProfileIndex};
use crate::policy::{validate_policy, AgendaWeights, DeviationPolicy, Row};

/// Tolerance on row sums of a transition matrix.
pub const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "mode", content = "weights", rename_all = "snake_case")]
pub enum UpdateRule {
    /// One agent, drawn with the given agenda weights, moves per step.
    Asynchronous(AgendaWeights),
    /// All agents move at once, each assuming the others stay put.
    Synchronous,
}

/// Where a transition matrix came from.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum Provenance {
    Rule { rule: UpdateRule },
    Explicit,
    Cycle2x2 { rho: [f64; 4] },
}

/// Row-stochastic matrix over strategy profiles, stored as sparse rows of
/// strictly positive entries sorted by target.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix {
    rows: Vec<Row>,
    provenance: Provenance,
}

impl TransitionMatrix {
    /// Validates and wraps sparse rows. Zero entries are dropped and duplicate
    /// targets rejected.
    pub fn from_rows(rows: Vec<Vec<(ProfileIndex, f64)>>, provenance: Provenance) -> Result<Self> {
        let size = rows.len();
        if size == 0 {
            return Err(Error::InvalidMatrix("matrix has no rows".into()));
        }
        let mut clean = Vec::with_capacity(size);
        for (u, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|&(v, _)| v);
            let mut sum = 0.0;
            for w in row.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(Error::InvalidMatrix(format!(
                        "row {u} lists target {} twice",
                        w[0].0
                    )));
                }
            }
            for &(v, p) in &row {
                if v.0 >= size {
                    return Err(Error::InvalidMatrix(format!(
                        "row {u} has target {v} outside 0..{size}"
                    )));
                }
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidMatrix(format!(
                        "entry ({u},{v}) = {p} outside [0,1]"
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidMatrix(format!("row {u} sums to {sum}")));
            }
            row.retain(|&(_, p)| p > 0.0);
            clean.push(row);
        }
        Ok(TransitionMatrix {
            rows: clean,
            provenance,
        })
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let size = rows.len();
        let sparse = rows
            .iter()
            .enumerate()
            .map(|(u, r)| {
                if r.len() != size {
                    return Err(Error::InvalidMatrix(format!(
                        "row {u} has {} entries, expected {size}",
                        r.len()
                    )));
                }
                Ok(r.iter()
                    .enumerate()
                    .filter(|(_, &p)| p != 0.0)
                    .map(|(v, &p)| (ProfileIndex(v), p))
                    .collect())
            })
            .collect::<Result<Vec<_>>>()?;
        TransitionMatrix::from_rows(sparse, Provenance::Explicit)
    }

    /// Parses `{"rows": [[...], ...]}` with numeric or `"p/q"` entries. When
    /// `game` is given the size must match its profile count, and an optional
    /// `"profiles"` label list must match its canonical order.
    pub fn from_json_str(text: &str, game: Option<&GameSpec>) -> Result<Self> {
        let file: MatrixFile = serde_json::from_str(text)?;
        let dense = file
            .rows
            .iter()
            .enumerate()
            .map(|(u, row)| {
                row.iter()
                    .enumerate()
                    .map(|(v, e)| {
                        e.value()
                            .map_err(|msg| Error::InvalidMatrix(format!("rows[{u}][{v}]: {msg}")))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(game) = game {
            if dense.len() != game.num_profiles() {
                return Err(Error::InvalidMatrix(format!(
                    "matrix has {} rows, game has {} profiles",
                    dense.len(),
                    game.num_profiles()
                )));
            }
            if let Some(labels) = &file.profiles {
                if labels.len() != dense.len() {
                    return Err(Error::InvalidMatrix(format!(
                        "{} profile labels for {} rows",
                        labels.len(),
                        dense.len()
                    )));
                }
                for (k, label) in labels.iter().enumerate() {
                    if game.parse_profile(label)? != ProfileIndex(k) {
                        return Err(Error::InvalidMatrix(format!(
                            "profile label `{label}` at row {k} is out of canonical order"
                        )));
                    }
                }
            }
        }
        TransitionMatrix::from_dense(&dense)
    }

    /// Dense JSON in the format read by [`TransitionMatrix::from_json_str`].
    pub fn to_json_value(&self, game: Option<&GameSpec>) -> serde_json::Value {
        let mut out = serde_json::Map::new();
        if let Some(game) = game {
            let labels = (0..self.size()).map(|k| game.profile_label(ProfileIndex(k)));
            out.insert("profiles".into(), labels.collect());
        }
        out.insert("rows".into(), serde_json::json!(self.to_dense_rows()));
        serde_json::Value::Object(out)
    }

    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn row(&self, u: ProfileIndex) -> &[(ProfileIndex, f64)] {
        &self.rows[u.0]
    }

    pub fn rows(&self) -> impl Iterator<Item = (ProfileIndex, &[(ProfileIndex, f64)])> {
        self.rows
            .iter()
            .enumerate()
            .map(|(u, r)| (ProfileIndex(u), r.as_slice()))
    }

    pub fn get(&self, u: ProfileIndex, v: ProfileIndex) -> f64 {
        let row = &self.rows[u.0];
        match row.binary_search_by_key(&v, |&(w, _)| w) {
            Ok(k) => row[k].1,
            Err(_) => 0.0,
        }
    }

    /// True iff row `u` is exactly the unit vector `e_u`.
    pub fn is_absorbing(&self, u: ProfileIndex) -> bool {
        self.rows[u.0].as_slice() == [(u, 1.0)]
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// `x Z` for a row vector `x`.
    pub fn left_mul(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.size(), "vector length must match matrix size");
        let mut out = vec![0.0; self.size()];
        for (row, &xu) in self.rows.iter().zip(x) {
            if xu == 0.0 {
                continue;
            }
            for &(v, p) in row {
                out[v.0] += xu * p;
            }
        }
        out
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.size();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for (u, row) in self.rows.iter().enumerate() {
            for &(v, p) in row {
                m[(u, v.0)] = p;
            }
        }
        m
    }

    pub fn to_dense_rows(&self) -> Vec<Vec<f64>> {
        let n = self.size();
        self.rows
            .iter()
            .map(|row| {
                let mut r = vec![0.0; n];
                for &(v, p) in row {
                    r[v.0] = p;
                }
                r
            })
            .collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(_, p)| p).sum())
            .collect()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixFile {
    #[serde(default)]
    profiles: Option<Vec<String>>,
    rows: Vec<Vec<Entry>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Entry {
    Number(f64),
    Text(String),
}

impl Entry {
    fn value(&self) -> std::result::Result<f64, String> {
        match self {
            Entry::Number(x) => Ok(*x),
            Entry::Text(s) => parse_fraction(s),
        }
    }
}

fn parse_fraction(s: &str) -> std::result::Result<f64, String> {
    let parse = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| format!("cannot parse `{s}` as a probability"))
    };
    match s.split_once('/') {
        Some((num, den)) => {
            let den = parse(den)?;
            if den == 0.0 {
                return Err(format!("zero denominator in `{s}`"));
            }
            Ok(parse(num)? / den)
        }
        None => parse(s),
    }
}

fn ensure_valid(game: &GameSpec, policy: &DeviationPolicy) -> Result<()> {
    let report = validate_policy(policy, game);
    if report.is_valid() {
        Ok(())
    } else {
        Err(Error::InvalidPolicy(report))
    }
}

/// Asynchronous aggregation: `zeta_uv = sum_i a_i psi_i(u,v)`.
///
/// The diagonal is stored as the complement of the off-diagonal mass, which
/// equals `sum_i a_i psi_i(u,u)` for normalized inputs and keeps rows at
/// pure equilibria exactly equal to `e_u`.
pub fn build_async(
    game: &GameSpec,
    policy: &DeviationPolicy,
    weights: &AgendaWeights,
) -> Result<TransitionMatrix> {
    ensure_valid(game, policy)?;
    if weights.len() != game.num_agents() {
        return Err(Error::InvalidWeights(format!(
            "{} weights for {} agents",
            weights.len(),
            game.num_agents()
        )));
    }
    let rows: Vec<Row> = (0..game.num_profiles())
        .into_par_iter()
        .map(|u| {
            let u = ProfileIndex(u);
            let mut acc: BTreeMap<ProfileIndex, f64> = BTreeMap::new();
            for (i, &a) in weights.as_slice().iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (v, p) in policy.agent_row(game, i, u) {
                    if v != u {
                        *acc.entry(v).or_insert(0.0) += a * p;
                    }
                }
            }
            let off: f64 = acc.values().sum();
            let stay = 1.0 - off;
            if stay > 0.0 {
                acc.insert(u, stay);
            }
            acc.into_iter().collect()
        })
        .collect();
    TransitionMatrix::from_rows(
        rows,
        Provenance::Rule {
            rule: UpdateRule::Asynchronous(weights.clone()),
        },
    )
}

/// Synchronous aggregation: `zeta_uv = prod_i psi_i(u, v^i_u)`, enumerated
/// over the Cartesian product of the agents' positive supports.
pub fn build_sync(game: &GameSpec, policy: &DeviationPolicy) -> Result<TransitionMatrix> {
    ensure_valid(game, policy)?;
    let n = game.num_agents();
    let rows: Vec<Row> = (0..game.num_profiles())
        .into_par_iter()
        .map(|u| {
            let u = ProfileIndex(u);
            // (strategy chosen by agent i, psi_i(u, v^i_u))
            let supports: Vec<Vec<(usize, f64)>> = (0..n)
                .map(|i| {
                    policy
                        .agent_row(game, i, u)
                        .into_iter()
                        .map(|(v, p)| (game.coord(v, i), p))
                        .collect()
                })
                .collect();
            let mut row = Vec::with_capacity(supports.iter().map(Vec::len).product());
            let mut pick = vec![0usize; n];
            loop {
                let mut v = u;
                for (i, &k) in pick.iter().enumerate() {
                    v = game.with_coord(v, i, supports[i][k].0);
                }
                let p = pick
                    .iter()
                    .enumerate()
                    .fold(1.0, |acc, (i, &k)| acc * supports[i][k].1);
                if p > 0.0 {
                    row.push((v, p));
                }
                // odometer over the supports, last agent fastest
                let mut i = n;
                loop {
                    if i == 0 {
                        row.sort_by_key(|&(v, _)| v);
                        return row;
                    }
                    i -= 1;
                    pick[i] += 1;
                    if pick[i] < supports[i].len() {
                        break;
                    }
                    pick[i] = 0;
                }
            }
        })
        .collect();
    TransitionMatrix::from_rows(
        rows,
        Provenance::Rule {
            rule: UpdateRule::Synchronous,
        },
    )
}

pub fn build(
    game: &GameSpec,
    policy: &DeviationPolicy,
    rule: &UpdateRule,
) -> Result<TransitionMatrix> {
    match rule {
        UpdateRule::Asynchronous(w) => build_async(game, policy, w),
        UpdateRule::Synchronous => build_sync(game, policy),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Arc {
    pub from: ProfileIndex,
    pub to: ProfileIndex,
    pub weight: f64,
}

/// Directed weighted graph of positive transitions between profiles.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransitionGraph {
    pub vertices: usize,
    pub arcs: Vec<Arc>,
}

impl TransitionGraph {
    pub fn successors(&self, u: ProfileIndex) -> impl Iterator<Item = &Arc> {
        self.arcs.iter().filter(move |a| a.from == u)
    }

    pub fn has_arc(&self, u: ProfileIndex, v: ProfileIndex) -> bool {
        self.arcs.iter().any(|a| a.from == u && a.to == v)
    }

    /// Graphviz rendering. Vertices are labelled with comma-joined strategy
    /// labels when a game is supplied; arc weights use 6 significant digits.
    pub fn to_dot(&self, game: Option<&GameSpec>) -> String {
        let mut out = String::from("digraph H {\n");
        for u in 0..self.vertices {
            let label = match game {
                Some(g) => g.profile_label(ProfileIndex(u)),
                None => u.to_string(),
            };
            let _ = writeln!(out, "  {u} [label=\"{}\"];", escape(&label));
        }
        for a in &self.arcs {
            let _ = writeln!(
                out,
                "  {} -> {} [label=\"{}\"];",
                a.from,
                a.to,
                sig(a.weight, 6)
            );
        }
        out.push_str("}\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

pub fn transition_graph(z: &TransitionMatrix) -> TransitionGraph {
    let arcs = z
        .rows()
        .flat_map(|(u, row)| {
            row.iter()
                .filter(|&&(_, p)| p > 0.0)
                .map(move |&(v, p)| Arc {
                    from: u,
                    to: v,
                    weight: p,
                })
        })
        .collect();
    TransitionGraph {
        vertices: z.size(),
        arcs,
    }
}

/// Payoff gaps of a 2x2 game whose better replies cycle
/// `(U,L) -> (D,L) -> (D,R) -> (U,R) -> (U,L)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CycleGaps {
    /// `p1(D,L) - p1(U,L)`
    pub row_left: f64,
    /// `p1(U,R) - p1(D,R)`
    pub row_right: f64,
    /// `p2(U,L) - p2(U,R)`
    pub col_up: f64,
    /// `p2(D,R) - p2(D,L)`
    pub col_down: f64,
}

impl CycleGaps {
    pub fn of(game: &GameSpec) -> Result<Self> {
        if game.num_agents() != 2 || game.num_strategies(0) != 2 || game.num_strategies(1) != 2 {
            return Err(Error::NotCyclic("the game must be two-player 2x2".into()));
        }
        let (ul, ur, dl, dr) = (
            ProfileIndex(0),
            ProfileIndex(1),
            ProfileIndex(2),
            ProfileIndex(3),
        );
        let gaps = CycleGaps {
            row_left: game.payoff(0, dl) - game.payoff(0, ul),
            row_right: game.payoff(0, ur) - game.payoff(0, dr),
            col_up: game.payoff(1, ul) - game.payoff(1, ur),
            col_down: game.payoff(1, dr) - game.payoff(1, dl),
        };
        let checks = [
            (gaps.row_left, "p1(D,L) > p1(U,L)"),
            (gaps.row_right, "p1(U,R) > p1(D,R)"),
            (gaps.col_up, "p2(U,L) > p2(U,R)"),
            (gaps.col_down, "p2(D,R) > p2(D,L)"),
        ];
        for (gap, what) in checks {
            if gap.is_nan() || gap <= 0.0 {
                return Err(Error::NotCyclic(format!("{what} fails")));
            }
        }
        Ok(gaps)
    }

    /// Unscaled `rho_1..rho_4`.
    pub fn rho_weights(&self) -> [f64; 4] {
        [
            self.row_left * self.col_up,
            self.row_right * self.col_up,
            self.row_left * self.col_down,
            self.row_right * self.col_down,
        ]
    }

    /// Supremum of admissible `rho0`; every `rho_k` stays below 1 strictly under it.
    pub fn max_rho0(&self) -> f64 {
        1.0 / self.rho_weights().into_iter().fold(0.0, f64::max)
    }
}

/// The 4-state cyclic chain over `(U,L),(U,R),(D,L),(D,R)` with each
/// `rho_k` proportional to the product of the two payoff gaps it spans.
pub fn build_cycle_chain_2x2(game: &GameSpec, rho0: f64) -> Result<TransitionMatrix> {
    let gaps = CycleGaps::of(game)?;
    if !rho0.is_finite() || rho0 <= 0.0 {
        return Err(Error::Domain(format!("rho0 must be positive, got {rho0}")));
    }
    let rho = gaps.rho_weights().map(|w| w * rho0);
    if rho.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
        return Err(Error::RhoTooLarge {
            rho0,
            max: gaps.max_rho0(),
        });
    }
    let p = ProfileIndex;
    let rows = vec![
        vec![(p(0), 1.0 - rho[0]), (p(2), rho[0])],
        vec![(p(0), rho[1]), (p(1), 1.0 - rho[1])],
        vec![(p(2), 1.0 - rho[2]), (p(3), rho[2])],
        vec![(p(1), rho[3]), (p(3), 1.0 - rho[3])],
    ];
    TransitionMatrix::from_rows(rows, Provenance::Cycle2x2 { rho })
}
