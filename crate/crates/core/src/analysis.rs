//! Long-run analysis of the deviation process `(game, pi0, Z)`.
//!
//! The exact Cesàro limit is assembled from the chain's recurrent classes:
//! each closed class contributes its own stationary vector, weighted by the
//! probability that the initial distribution ends up in it. The iterative
//! path averages powers of `Z` directly and serves as an independent check.

use nalgebra::{DMatrix, DVector, RowDVector};
use serde::Serialize;

use crate::chain::{build_cycle_chain_2x2, CycleGaps, TransitionMatrix};
use crate::error::{Error, Result};
use crate::game::{GameSpec, ProfileIndex};

/// Largest system the dense linear-algebra paths will factor or square.
pub const DENSE_LIMIT: usize = 4096;
pub const DEFAULT_TOL: f64 = 1e-10;
/// Default cap on doublings of the averaging horizon (`2^64` steps).
pub const DEFAULT_MAX_DOUBLINGS: usize = 64;
/// Tolerance on the total mass of a distribution.
pub const MASS_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Distribution(Vec<f64>);

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty distribution".into()));
        }
        if let Some((k, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(Error::InvalidDistribution(format!(
                "entry {k} is {p}, expected a nonnegative number"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidDistribution(format!(
                "entries sum to {sum}, not 1"
            )));
        }
        Ok(Distribution(probs))
    }

    pub fn uniform(n: usize) -> Self {
        Distribution(vec![1.0 / n as f64; n])
    }

    pub fn point(n: usize, u: ProfileIndex) -> Self {
        let mut v = vec![0.0; n];
        v[u.0] = 1.0;
        Distribution(v)
    }

    pub fn uniform_over(n: usize, support: &[ProfileIndex]) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        let mut v = vec![0.0; n];
        for u in support {
            if u.0 >= n {
                return Err(Error::InvalidDistribution(format!(
                    "profile {u} out of range"
                )));
            }
            v[u.0] = 1.0;
        }
        let k = v.iter().sum::<f64>();
        Ok(Distribution(v.into_iter().map(|x| x / k).collect()))
    }

    /// Clamps round-off negatives and rescales to unit mass.
    fn normalized(mut probs: Vec<f64>) -> Self {
        for p in probs.iter_mut() {
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        let sum: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= sum);
        Distribution(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn l1_distance(&self, other: &Distribution) -> f64 {
        l1(&self.0, &other.0)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

pub fn l1(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "vectors of different length");
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// `||pi Z - pi||_1`.
pub fn stationary_residual(z: &TransitionMatrix, pi: &[f64]) -> f64 {
    l1(&z.left_mul(pi), pi)
}

#[derive(Clone, Debug)]
pub struct DeviationProcess {
    game: GameSpec,
    initial: Distribution,
    z: TransitionMatrix,
}

impl DeviationProcess {
    pub fn new(game: GameSpec, initial: Distribution, z: TransitionMatrix) -> Result<Self> {
        if initial.len() != game.num_profiles() || z.size() != game.num_profiles() {
            return Err(Error::ShapeMismatch(format!(
                "game has {} profiles, initial distribution {}, matrix {}",
                game.num_profiles(),
                initial.len(),
                z.size()
            )));
        }
        Ok(DeviationProcess { game, initial, z })
    }

    pub fn game(&self) -> &GameSpec {
        &self.game
    }

    pub fn initial(&self) -> &Distribution {
        &self.initial
    }

    pub fn matrix(&self) -> &TransitionMatrix {
        &self.z
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CommunicatingClass {
    pub states: Vec<ProfileIndex>,
    /// Closed classes are recurrent; all others are transient.
    pub recurrent: bool,
    /// gcd of cycle lengths inside the class; 0 when the class has no cycle.
    pub period: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AbsorptionRow {
    pub state: ProfileIndex,
    /// Probability of ending in each recurrent class, in the order of
    /// [`ChainStructure::recurrent_classes`].
    pub probs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainStructure {
    pub classes: Vec<CommunicatingClass>,
    /// One row per transient state.
    pub absorption: Vec<AbsorptionRow>,
}

impl ChainStructure {
    pub fn recurrent_classes(&self) -> impl Iterator<Item = &CommunicatingClass> {
        self.classes.iter().filter(|c| c.recurrent)
    }

    pub fn is_irreducible(&self) -> bool {
        self.classes.len() == 1
    }

    pub fn is_aperiodic(&self) -> bool {
        self.recurrent_classes().all(|c| c.period == 1)
    }
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Tarjan's algorithm over the positive-entry graph of `z`, iteratively.
fn strongly_connected(z: &TransitionMatrix) -> Vec<Vec<usize>> {
    const UNSEEN: usize = usize::MAX;
    let n = z.size();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut counter = 0;
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        call.push((root, 0));
        while let Some(&(v, pos)) = call.last() {
            let row = z.row(ProfileIndex(v));
            if pos < row.len() {
                call.last_mut().unwrap().1 += 1;
                let w = row[pos].0 .0;
                if index[w] == UNSEEN {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    comps.push(comp);
                }
            }
        }
    }
    comps.sort_by_key(|c| c[0]);
    comps
}

fn class_period(z: &TransitionMatrix, states: &[usize], member: &[usize], id: usize) -> usize {
    let mut level = std::collections::HashMap::with_capacity(states.len());
    let mut queue = std::collections::VecDeque::new();
    level.insert(states[0], 0usize);
    queue.push_back(states[0]);
    let mut g = 0;
    while let Some(u) = queue.pop_front() {
        let lu = level[&u];
        for &(v, _) in z.row(ProfileIndex(u)) {
            if member[v.0] != id {
                continue;
            }
            match level.get(&v.0) {
                Some(&lv) => g = gcd(g, lu + 1 - lv),
                None => {
                    level.insert(v.0, lu + 1);
                    queue.push_back(v.0);
                }
            }
        }
    }
    g
}

/// Communicating classes ordered by smallest member, with recurrence and period.
pub fn communicating_classes(z: &TransitionMatrix) -> Vec<CommunicatingClass> {
    let comps = strongly_connected(z);
    let mut member = vec![0; z.size()];
    for (id, comp) in comps.iter().enumerate() {
        for &u in comp {
            member[u] = id;
        }
    }
    comps
        .iter()
        .enumerate()
        .map(|(id, comp)| {
            let closed = comp.iter().all(|&u| {
                z.row(ProfileIndex(u))
                    .iter()
                    .all(|&(v, _)| member[v.0] == id)
            });
            CommunicatingClass {
                states: comp.iter().map(|&u| ProfileIndex(u)).collect(),
                recurrent: closed,
                period: class_period(z, comp, &member, id),
            }
        })
        .collect()
}

fn check_dense(size: usize) -> Result<()> {
    if size > DENSE_LIMIT {
        Err(Error::TooLarge {
            size,
            limit: DENSE_LIMIT,
        })
    } else {
        Ok(())
    }
}

/// Stationary vector of one closed class, solved from `pi (Z_CC - I) = 0`
/// with the last equation replaced by `sum(pi) = 1`. Returned over all states.
fn class_stationary(z: &TransitionMatrix, class: &CommunicatingClass) -> Result<Distribution> {
    let m = class.states.len();
    check_dense(m)?;
    let mut pos = std::collections::HashMap::with_capacity(m);
    for (k, u) in class.states.iter().enumerate() {
        pos.insert(*u, k);
    }
    // rows of A are equations: A[j][k] = Z[k][j] - delta_jk
    let mut a = DMatrix::<f64>::zeros(m, m);
    for (k, &u) in class.states.iter().enumerate() {
        a[(k, k)] -= 1.0;
        for &(v, p) in z.row(u) {
            if let Some(&j) = pos.get(&v) {
                a[(j, k)] += p;
            }
        }
    }
    for k in 0..m {
        a[(m - 1, k)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(m);
    b[m - 1] = 1.0;
    let x = a.lu().solve(&b).ok_or_else(|| Error::Singular {
        what: "stationary vector",
        class: class.states.iter().map(|u| u.0).collect(),
    })?;
    let mut full = vec![0.0; z.size()];
    for (k, u) in class.states.iter().enumerate() {
        full[u.0] = x[k];
    }
    Ok(Distribution::normalized(full))
}

/// One stationary distribution per recurrent class; every stationary
/// distribution of `z` is a convex combination of these.
pub fn stationary_distributions(z: &TransitionMatrix) -> Result<Vec<Distribution>> {
    communicating_classes(z)
        .iter()
        .filter(|c| c.recurrent)
        .map(|c| class_stationary(z, c))
        .collect()
}

/// Class decomposition plus absorption probabilities from every transient
/// state, via the fundamental matrix `(I - Q)^-1 R`.
pub fn chain_structure(z: &TransitionMatrix) -> Result<ChainStructure> {
    let classes = communicating_classes(z);
    let n = z.size();
    let mut recurrent_of = vec![usize::MAX; n];
    let mut r = 0;
    for class in classes.iter().filter(|c| c.recurrent) {
        for u in &class.states {
            recurrent_of[u.0] = r;
        }
        r += 1;
    }
    let transient: Vec<usize> = (0..n).filter(|&u| recurrent_of[u] == usize::MAX).collect();
    let t = transient.len();
    let mut absorption = Vec::with_capacity(t);
    if t > 0 {
        check_dense(t)?;
        let mut tpos = vec![usize::MAX; n];
        for (k, &u) in transient.iter().enumerate() {
            tpos[u] = k;
        }
        let mut m = DMatrix::<f64>::identity(t, t);
        let mut rhs = DMatrix::<f64>::zeros(t, r);
        for (k, &u) in transient.iter().enumerate() {
            for &(v, p) in z.row(ProfileIndex(u)) {
                if tpos[v.0] != usize::MAX {
                    m[(k, tpos[v.0])] -= p;
                } else {
                    rhs[(k, recurrent_of[v.0])] += p;
                }
            }
        }
        let x = m.lu().solve(&rhs).ok_or_else(|| Error::Singular {
            what: "absorption probabilities",
            class: transient.clone(),
        })?;
        for (k, &u) in transient.iter().enumerate() {
            absorption.push(AbsorptionRow {
                state: ProfileIndex(u),
                probs: (0..r).map(|c| x[(k, c)].max(0.0)).collect(),
            });
        }
    }
    Ok(ChainStructure {
        classes,
        absorption,
    })
}

/// Exact Cesàro limit `lim (1/n) sum_{k=1..n} pi0 Z^k`.
pub fn cesaro_limit_exact(process: &DeviationProcess) -> Result<Distribution> {
    let z = process.matrix();
    let structure = chain_structure(z)?;
    let recurrent: Vec<&CommunicatingClass> = structure.recurrent_classes().collect();
    let stationary = recurrent
        .iter()
        .map(|c| class_stationary(z, c))
        .collect::<Result<Vec<_>>>()?;
    let pi0 = process.initial().probs();
    let mut mass: Vec<f64> = recurrent
        .iter()
        .map(|c| c.states.iter().map(|u| pi0[u.0]).sum())
        .collect();
    for row in &structure.absorption {
        let w = pi0[row.state.0];
        if w > 0.0 {
            for (m, p) in mass.iter_mut().zip(&row.probs) {
                *m += w * p;
            }
        }
    }
    let mut limit = vec![0.0; z.size()];
    for (m, pi) in mass.iter().zip(&stationary) {
        for (l, p) in limit.iter_mut().zip(pi.probs()) {
            *l += m * p;
        }
    }
    Ok(Distribution::normalized(limit))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CesaroEstimate {
    pub distribution: Distribution,
    /// Number of horizon doublings performed.
    pub iterations: usize,
    /// Number of powers of `Z` in the final average, `2^iterations`.
    pub horizon: f64,
    /// L1 change between the last two averages.
    pub last_delta: f64,
    pub converged: bool,
}

/// Running Cesàro average evaluated on the horizons `N = 1, 2, 4, ...`
/// through `A_2N = (A_N + A_N Z^N) / 2`, with `Z^N` kept by repeated
/// squaring. Stops once consecutive averages differ by less than `tol` in
/// L1, or after `max_iters` doublings with `converged = false`.
pub fn cesaro_limit_iterative(
    process: &DeviationProcess,
    tol: f64,
    max_iters: usize,
) -> Result<CesaroEstimate> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::Domain(format!("tol must be positive, got {tol}")));
    }
    let z = process.matrix();
    check_dense(z.size())?;
    let mut power = z.to_dense();
    let mut avg = RowDVector::from_vec(z.left_mul(process.initial().probs()));
    let mut iterations = 0;
    let mut last_delta = f64::INFINITY;
    while iterations < max_iters {
        let next = (&avg + &avg * &power) * 0.5;
        last_delta = (&next - &avg).iter().map(|x| x.abs()).sum();
        avg = next;
        iterations += 1;
        if last_delta < tol {
            break;
        }
        power = &power * &power;
        // Squaring amplifies row-sum drift geometrically; rows of Z^N are stochastic.
        for mut row in power.row_iter_mut() {
            let sum: f64 = row.iter().sum();
            row /= sum;
        }
    }
    Ok(CesaroEstimate {
        distribution: Distribution::normalized(avg.iter().copied().collect()),
        iterations,
        horizon: 2f64.powi(iterations as i32),
        last_delta,
        converged: last_delta < tol,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NashCheck {
    pub profile: ProfileIndex,
    pub label: String,
    /// `e_k Z == e_k` exactly.
    pub absorbing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NashReport {
    pub checks: Vec<NashCheck>,
    pub passed: bool,
}

/// Checks that each pure Nash equilibrium is an absorbing state of `z`.
pub fn verify_pure_nash_absorbing(game: &GameSpec, z: &TransitionMatrix) -> NashReport {
    let checks: Vec<NashCheck> = game
        .pure_nash_equilibria()
        .into_iter()
        .map(|u| NashCheck {
            profile: u,
            label: game.profile_label(u),
            absorbing: u.0 < z.size() && z.is_absorbing(u),
        })
        .collect();
    let passed = checks.iter().all(|c| c.absorbing);
    NashReport { checks, passed }
}

/// Mixed equilibrium of a cyclic 2x2 game: agent 1 plays `U` with
/// probability `a`, agent 2 plays `L` with probability `b`.
pub fn mixed_equilibrium_2x2(game: &GameSpec) -> Result<(f64, f64)> {
    let g = CycleGaps::of(game)?;
    let a = g.col_down / (g.col_down + g.col_up);
    let b = g.row_right / (g.row_right + g.row_left);
    Ok((a, b))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CycleReport {
    pub a: f64,
    pub b: f64,
    pub rho: [f64; 4],
    /// `[ab, a(1-b), (1-a)b, (1-a)(1-b)]`
    pub closed_form: Vec<f64>,
    /// `||pi Z - pi||_1` of the closed form.
    pub residual: f64,
    /// Stationary vector solved independently from `Z`.
    pub solved: Vec<f64>,
    /// L1 distance between `closed_form` and `solved`.
    pub solved_gap: f64,
    pub irreducible: bool,
    pub aperiodic: bool,
    pub passed: bool,
}

/// Builds the cyclic chain and checks the product-form stationary
/// distribution against it.
pub fn verify_cycle_stationary(game: &GameSpec, rho0: f64, tol: f64) -> Result<CycleReport> {
    let z = build_cycle_chain_2x2(game, rho0)?;
    let (a, b) = mixed_equilibrium_2x2(game)?;
    let rho = match z.provenance() {
        crate::chain::Provenance::Cycle2x2 { rho } => *rho,
        _ => unreachable!("cycle chain provenance"),
    };
    let closed_form = vec![a * b, a * (1.0 - b), (1.0 - a) * b, (1.0 - a) * (1.0 - b)];
    let residual = stationary_residual(&z, &closed_form);
    let classes = communicating_classes(&z);
    let irreducible = classes.len() == 1;
    let aperiodic = classes.iter().all(|c| c.period == 1);
    let solved = stationary_distributions(&z)?
        .into_iter()
        .next()
        .expect("a finite chain has a recurrent class")
        .into_vec();
    let solved_gap = l1(&solved, &closed_form);
    Ok(CycleReport {
        a,
        b,
        rho,
        passed: residual < tol && irreducible && aperiodic,
        closed_form,
        residual,
        solved,
        solved_gap,
        irreducible,
        aperiodic,
    })
}

/// Long-run average payoff `p^i . limit`.
pub fn average_payoff(game: &GameSpec, agent: usize, limit: &Distribution) -> Result<f64> {
    game.check_agent(agent)?;
    if limit.len() != game.num_profiles() {
        return Err(Error::ShapeMismatch(format!(
            "distribution over {} profiles, game has {}",
            limit.len(),
            game.num_profiles()
        )));
    }
    Ok(game
        .profiles()
        .zip(limit.probs())
        .map(|(u, p)| game.payoff(agent, u) * p)
        .sum())
}

pub fn average_payoffs(game: &GameSpec, limit: &Distribution) -> Result<Vec<f64>> {
    (0..game.num_agents())
        .map(|i| average_payoff(game, i, limit))
        .collect()
}
