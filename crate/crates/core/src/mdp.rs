//! Finite communicating MDPs with vector-valued stochastic outcomes.
//!
//! States and actions are dense indices. Every state-action pair carries a
//! transition vector over all states and an outcome model in `[0,1]^K`. The
//! simulator draws the next state first and the outcome second from the same
//! stream, independently given `(s, a)`; a [`JointSampler`] can be attached to
//! a pair when the two must be correlated.
//!
//! The module also builds the standard test instances (star, bandit, cycle)
//! and computes exact structural quantities for desk-scale instances:
//! the diameter via stochastic-shortest-path value iteration, and the
//! recurrent classes of a Markov chain with their stationary distributions.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};

/// The random stream owned by one run.
pub type RunRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> RunRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Tolerance on row sums of transition vectors.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Default cap on the number of states for exact structural computations.
pub const DEFAULT_STATE_CAP: usize = 64;

// ── Outcome models ───────────────────────────────────────────────────────

/// User-supplied outcome distribution with known mean.
pub trait OutcomeSampler: Send + Sync + fmt::Debug {
    fn mean(&self) -> &[f64];
    /// Must return a vector in `[0,1]^K`.
    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64>;
}

/// Draws `(next_state, outcome)` jointly, for pairs whose outcome and
/// transition are correlated.
pub trait JointSampler: Send + Sync + fmt::Debug {
    fn sample(&self, rng: &mut dyn RngCore) -> (usize, Vec<f64>);
}

#[derive(Clone, Debug)]
pub enum OutcomeModel {
    Deterministic(Vec<f64>),
    /// Independent Bernoulli coordinates with the given means.
    Bernoulli(Vec<f64>),
    Custom(Arc<dyn OutcomeSampler>),
}

impl OutcomeModel {
    pub fn mean(&self) -> &[f64] {
        match self {
            OutcomeModel::Deterministic(v) | OutcomeModel::Bernoulli(v) => v,
            OutcomeModel::Custom(s) => s.mean(),
        }
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        match self {
            OutcomeModel::Deterministic(v) => v.clone(),
            OutcomeModel::Bernoulli(p) => p
                .iter()
                .map(|&pk| if rng.gen::<f64>() < pk { 1.0 } else { 0.0 })
                .collect(),
            OutcomeModel::Custom(s) => s.sample(rng),
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            OutcomeModel::Deterministic(_) => "deterministic",
            OutcomeModel::Bernoulli(_) => "bernoulli",
            OutcomeModel::Custom(_) => "custom",
        }
    }
}

/// One action available at a state.
#[derive(Clone, Debug)]
pub struct Action {
    pub name: String,
    /// Dense distribution over next states.
    pub transition: Vec<f64>,
    pub outcome: OutcomeModel,
    pub joint: Option<Arc<dyn JointSampler>>,
}

impl Action {
    pub fn new(name: impl Into<String>, transition: Vec<f64>, outcome: OutcomeModel) -> Self {
        Self {
            name: name.into(),
            transition,
            outcome,
            joint: None,
        }
    }

    fn deterministic(name: impl Into<String>, num_states: usize, to: usize, outcome: Vec<f64>) -> Self {
        let mut transition = vec![0.0; num_states];
        transition[to] = 1.0;
        Self::new(name, transition, OutcomeModel::Deterministic(outcome))
    }
}

// ── Instance ─────────────────────────────────────────────────────────────

/// A finite MDP with `K`-dimensional outcomes. Immutable after construction.
#[derive(Clone, Debug)]
pub struct MdpInstance {
    state_names: Vec<String>,
    start: usize,
    dim: usize,
    actions: Vec<Vec<Action>>,
    offsets: Vec<usize>,
    null_actions: Option<Vec<usize>>,
}

impl MdpInstance {
    pub fn new(state_names: Vec<String>, start: usize, dim: usize, actions: Vec<Vec<Action>>) -> Result<Self> {
        let s_count = state_names.len();
        if s_count == 0 {
            return usage("instance needs at least one state");
        }
        if dim == 0 {
            return usage("outcome dimension K must be positive");
        }
        if start >= s_count {
            return usage(format!("start state {start} out of range"));
        }
        if actions.len() != s_count {
            return usage("one action list per state is required");
        }
        for (s, acts) in actions.iter().enumerate() {
            if acts.is_empty() {
                return usage(format!("state {} has no actions", state_names[s]));
            }
            for a in acts {
                let ctx = format!("({}, {})", state_names[s], a.name);
                if a.transition.len() != s_count {
                    return usage(format!("transition of {ctx} has wrong length"));
                }
                if a.transition.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                    return usage(format!("transition of {ctx} has a negative entry"));
                }
                let total: f64 = a.transition.iter().sum();
                if (total - 1.0).abs() > STOCHASTIC_TOL {
                    return usage(format!("transition of {ctx} sums to {total}"));
                }
                let mean = a.outcome.mean();
                if mean.len() != dim {
                    return usage(format!("outcome mean of {ctx} has dimension {} != {dim}", mean.len()));
                }
                if mean.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                    return usage(format!("outcome mean of {ctx} leaves [0,1]^K"));
                }
            }
        }
        let mut offsets = Vec::with_capacity(s_count + 1);
        let mut acc = 0;
        for acts in &actions {
            offsets.push(acc);
            acc += acts.len();
        }
        offsets.push(acc);
        Ok(Self {
            state_names,
            start,
            dim,
            actions,
            offsets,
            null_actions: None,
        })
    }

    /// Declares a null action per state. Null actions must have outcome `0_K`
    /// with certainty.
    pub fn with_null_actions(mut self, null_actions: Vec<usize>) -> Result<Self> {
        if null_actions.len() != self.num_states() {
            return usage("one null action per state is required");
        }
        for (s, &a) in null_actions.iter().enumerate() {
            let act = self.actions.get(s).and_then(|acts| acts.get(a));
            match act {
                Some(Action {
                    outcome: OutcomeModel::Deterministic(v),
                    joint: None,
                    ..
                }) if v.iter().all(|&x| x == 0.0) => {}
                _ => {
                    return Err(Error::Config(format!(
                        "null action {a} at state {} must be deterministic with outcome 0",
                        self.state_names[s]
                    )))
                }
            }
        }
        self.null_actions = Some(null_actions);
        Ok(self)
    }

    pub fn num_states(&self) -> usize {
        self.state_names.len()
    }

    pub fn start(&self) -> usize {
        self.start
    }

    /// Same instance with a different start state.
    pub fn with_start(mut self, start: usize) -> Result<Self> {
        if start >= self.num_states() {
            return usage(format!("start state {start} out of range"));
        }
        self.start = start;
        Ok(self)
    }

    /// Outcome dimension `K`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_actions(&self, s: usize) -> usize {
        self.actions[s].len()
    }

    /// Total number of state-action pairs (`S·A` with `A` the average action count).
    pub fn num_pairs(&self) -> usize {
        self.offsets[self.num_states()]
    }

    pub fn pair_index(&self, s: usize, a: usize) -> usize {
        self.offsets[s] + a
    }

    /// Inverse of [`pair_index`](Self::pair_index).
    pub fn pair_of(&self, idx: usize) -> (usize, usize) {
        let s = self.offsets.partition_point(|&o| o <= idx) - 1;
        (s, idx - self.offsets[s])
    }

    pub fn state_name(&self, s: usize) -> &str {
        &self.state_names[s]
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.state_names.iter().position(|n| n == name)
    }

    pub fn action(&self, s: usize, a: usize) -> &Action {
        &self.actions[s][a]
    }

    pub fn transition(&self, s: usize, a: usize) -> &[f64] {
        &self.actions[s][a].transition
    }

    pub fn mean(&self, s: usize, a: usize) -> &[f64] {
        self.actions[s][a].outcome.mean()
    }

    pub fn null_action(&self, s: usize) -> Option<usize> {
        self.null_actions.as_ref().map(|n| n[s])
    }

    pub fn has_null_actions(&self) -> bool {
        self.null_actions.is_some()
    }

    pub fn check_pair(&self, s: usize, a: usize) -> Result<()> {
        if s >= self.num_states() {
            return usage(format!("state {s} out of range"));
        }
        if a >= self.num_actions(s) {
            return usage(format!("action {a} not valid at state {}", self.state_names[s]));
        }
        Ok(())
    }

    /// Simulates one transition from `(s, a)`.
    pub fn step(&self, s: usize, a: usize, rng: &mut dyn RngCore) -> Result<(usize, Vec<f64>)> {
        self.check_pair(s, a)?;
        let act = &self.actions[s][a];
        if let Some(joint) = &act.joint {
            return Ok(joint.sample(rng));
        }
        let next = sample_index(&act.transition, rng);
        let outcome = act.outcome.sample(rng);
        Ok((next, outcome))
    }

    /// Transition matrix of the Markov chain induced by a deterministic policy.
    pub fn policy_chain(&self, policy: &[usize]) -> Vec<Vec<f64>> {
        policy
            .iter()
            .enumerate()
            .map(|(s, &a)| self.actions[s][a].transition.clone())
            .collect()
    }

    // ── file format ──────────────────────────────────────────────────────

    pub fn from_json(text: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(text)?;
        file.into_instance()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut actions = Vec::new();
        for (s, acts) in self.actions.iter().enumerate() {
            for (a, act) in acts.iter().enumerate() {
                let kind = act.outcome.kind();
                if kind == "custom" || act.joint.is_some() {
                    return usage("custom samplers cannot be serialized");
                }
                let p = act
                    .transition
                    .iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(j, &p)| (self.state_names[j].clone(), p))
                    .collect();
                actions.push(ActionEntry {
                    state: self.state_names[s].clone(),
                    name: act.name.clone(),
                    p,
                    outcome: OutcomeEntry {
                        kind: kind.to_string(),
                        mean: act.outcome.mean().to_vec(),
                    },
                    null: (self.null_action(s) == Some(a)).then_some(true),
                });
            }
        }
        let file = InstanceFile {
            states: self.state_names.clone(),
            start: self.state_names[self.start].clone(),
            k: self.dim,
            actions,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }
}

fn sample_index(probs: &[f64], rng: &mut dyn RngCore) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    states: Vec<String>,
    start: String,
    #[serde(rename = "K")]
    k: usize,
    actions: Vec<ActionEntry>,
}

#[derive(Serialize, Deserialize)]
struct ActionEntry {
    state: String,
    name: String,
    p: BTreeMap<String, f64>,
    outcome: OutcomeEntry,
    /// Marks the null action of its state (knapsack problems).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    null: Option<bool>,
}

#[derive(Serialize, Deserialize)]
struct OutcomeEntry {
    kind: String,
    mean: Vec<f64>,
}

impl InstanceFile {
    fn into_instance(self) -> Result<MdpInstance> {
        let index: HashMap<&str, usize> = self.states.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        if index.len() != self.states.len() {
            return usage("duplicate state names");
        }
        let lookup = |name: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| Error::Usage(format!("unknown state '{name}'")))
        };
        let s_count = self.states.len();
        let mut actions: Vec<Vec<Action>> = vec![Vec::new(); s_count];
        let mut nulls: Vec<Option<usize>> = vec![None; s_count];
        for entry in self.actions {
            let s = lookup(&entry.state)?;
            let mut transition = vec![0.0; s_count];
            for (to, p) in &entry.p {
                transition[lookup(to)?] += p;
            }
            let outcome = match entry.outcome.kind.as_str() {
                "deterministic" => OutcomeModel::Deterministic(entry.outcome.mean),
                "bernoulli" => OutcomeModel::Bernoulli(entry.outcome.mean),
                other => return usage(format!("unknown outcome kind '{other}'")),
            };
            if entry.null == Some(true) {
                nulls[s] = Some(actions[s].len());
            }
            actions[s].push(Action::new(entry.name, transition, outcome));
        }
        let start = lookup(&self.start)?;
        let inst = MdpInstance::new(self.states, start, self.k, actions)?;
        if nulls.iter().any(Option::is_some) {
            let nulls: Option<Vec<usize>> = nulls.into_iter().collect();
            match nulls {
                Some(n) => inst.with_null_actions(n),
                None => Err(Error::Config(
                    "null actions must be declared for every state or none".into(),
                )),
            }
        } else {
            Ok(inst)
        }
    }
}

// ── Builders ─────────────────────────────────────────────────────────────

fn unit(k: usize, dim: usize) -> Vec<f64> {
    let mut e = vec![0.0; dim];
    e[k] = 1.0;
    e
}

/// Star graph with `k` branches whose leaves are `d` steps apart.
///
/// State 0 is the center `c`. Branch `k` is the path `b{k}_1 .. b{k}_{d/2-1}`
/// ending at leaf `leaf{k}`. Arcs are two-way and deterministic; action names
/// are `in` (toward the center), `out` (toward the leaf), `to{k}` at the
/// center, and at a leaf `loop` (outcome `e_k`) and `exit` (toward the center).
pub fn build_star(k: usize, d: usize) -> Result<MdpInstance> {
    if k < 2 {
        return usage("star needs K >= 2 branches");
    }
    if d < 2 || !d.is_multiple_of(2) {
        return usage(format!("star diameter D must be even and >= 2, got {d}"));
    }
    let half = d / 2;
    let s_count = 1 + k * half;
    // branch b, depth 1..=half; depth `half` is the leaf
    let node = |b: usize, depth: usize| 1 + b * half + (depth - 1);
    let mut names = vec!["c".to_string()];
    for b in 0..k {
        for depth in 1..half {
            names.push(format!("b{}_{}", b + 1, depth));
        }
        names.push(format!("leaf{}", b + 1));
    }
    let zero = vec![0.0; k];
    let mut actions = vec![Vec::new(); s_count];
    actions[0] = (0..k)
        .map(|b| Action::deterministic(format!("to{}", b + 1), s_count, node(b, 1), zero.clone()))
        .collect();
    for b in 0..k {
        for depth in 1..=half {
            let s = node(b, depth);
            let inward = if depth == 1 { 0 } else { node(b, depth - 1) };
            if depth < half {
                actions[s].push(Action::deterministic("in", s_count, inward, zero.clone()));
                actions[s].push(Action::deterministic("out", s_count, node(b, depth + 1), zero.clone()));
            } else {
                actions[s].push(Action::deterministic("loop", s_count, s, unit(b, k)));
                actions[s].push(Action::deterministic("exit", s_count, inward, zero.clone()));
            }
        }
    }
    MdpInstance::new(names, 0, k, actions)
}

/// Single state with `k` self-loops; loop `k` yields `e_k`.
pub fn build_bandit(k: usize) -> Result<MdpInstance> {
    if k < 1 {
        return usage("bandit needs K >= 1");
    }
    let actions = vec![(0..k)
        .map(|j| Action::deterministic(format!("loop{}", j + 1), 1, 0, unit(j, k)))
        .collect()];
    MdpInstance::new(vec!["c".into()], 0, k, actions)
}

/// Deterministic directed cycle `1 -> 2 -> .. -> d -> 1` with a single action
/// per state and scalar outcome 1 at state `1`, 0 elsewhere.
pub fn build_cycle(d: usize) -> Result<MdpInstance> {
    if d < 2 {
        return usage("cycle needs D >= 2");
    }
    let names = (1..=d).map(|i| i.to_string()).collect();
    let actions = (0..d)
        .map(|i| {
            let reward = if i == 0 { 1.0 } else { 0.0 };
            vec![Action::deterministic("a", d, (i + 1) % d, vec![reward])]
        })
        .collect();
    MdpInstance::new(names, 0, 1, actions)
}

// ── Trajectory ───────────────────────────────────────────────────────────

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub t: u64,
    pub state: usize,
    pub action: usize,
    pub outcome: Vec<f64>,
    pub next_state: usize,
}

/// Step list with the running outcome sum.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    steps: Vec<Step>,
    sum: Vec<f64>,
}

impl Trajectory {
    pub fn new(dim: usize) -> Self {
        Self {
            steps: Vec::new(),
            sum: vec![0.0; dim],
        }
    }

    pub fn push(&mut self, step: Step) {
        for (acc, v) in self.sum.iter_mut().zip(&step.outcome) {
            *acc += v;
        }
        self.steps.push(step);
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Running average of outcomes; `0_K` before the first step.
    pub fn average(&self) -> Vec<f64> {
        let n = self.steps.len().max(1) as f64;
        self.sum.iter().map(|s| s / n).collect()
    }
}

// ── Diameter ─────────────────────────────────────────────────────────────

/// Max over ordered state pairs of the minimal expected hitting time.
pub fn diameter(instance: &MdpInstance) -> Result<f64> {
    diameter_with_cap(instance, DEFAULT_STATE_CAP)
}

pub fn diameter_with_cap(instance: &MdpInstance, state_cap: usize) -> Result<f64> {
    const TOL: f64 = 1e-9;
    const MAX_ITERS: usize = 10_000_000;
    const MAGNITUDE_CAP: f64 = 1e9;

    let n = instance.num_states();
    if n > state_cap {
        return usage(format!(
            "diameter is exact only up to {state_cap} states, instance has {n}"
        ));
    }
    let mut best: f64 = 0.0;
    for target in 0..n {
        let reach = backward_reachable(instance, target);
        if let Some(s) = reach.iter().position(|&r| !r) {
            return Err(Error::NotCommunicating(format!(
                "state {} cannot reach {}",
                instance.state_name(s),
                instance.state_name(target)
            )));
        }
        let mut h = vec![0.0; n];
        let mut next = vec![0.0; n];
        let mut iters = 0;
        loop {
            let mut delta: f64 = 0.0;
            for s in 0..n {
                if s == target {
                    next[s] = 0.0;
                    continue;
                }
                let mut best_a = f64::INFINITY;
                for a in 0..instance.num_actions(s) {
                    let v: f64 = instance.transition(s, a).iter().zip(&h).map(|(p, hv)| p * hv).sum();
                    best_a = best_a.min(v);
                }
                next[s] = 1.0 + best_a;
                delta = delta.max((next[s] - h[s]).abs());
            }
            std::mem::swap(&mut h, &mut next);
            iters += 1;
            if delta < TOL {
                break;
            }
            if iters >= MAX_ITERS || h.iter().any(|&v| v > MAGNITUDE_CAP) {
                return Err(Error::NotCommunicating(format!(
                    "hitting times to {} diverge",
                    instance.state_name(target)
                )));
            }
        }
        best = best.max(h.iter().cloned().fold(0.0, f64::max));
    }
    Ok(best)
}

fn backward_reachable(instance: &MdpInstance, target: usize) -> Vec<bool> {
    let n = instance.num_states();
    let mut reach = vec![false; n];
    reach[target] = true;
    let mut changed = true;
    while changed {
        changed = false;
        for s in 0..n {
            if reach[s] {
                continue;
            }
            let hit = (0..instance.num_actions(s)).any(|a| {
                instance
                    .transition(s, a)
                    .iter()
                    .enumerate()
                    .any(|(j, &p)| p > 0.0 && reach[j])
            });
            if hit {
                reach[s] = true;
                changed = true;
            }
        }
    }
    reach
}

// ── Stationary distributions ─────────────────────────────────────────────

/// A closed communicating class of a Markov chain.
#[derive(Clone, Debug, PartialEq)]
pub struct RecurrentClass {
    /// Member states in increasing order.
    pub states: Vec<usize>,
    /// Stationary distribution, aligned with `states`.
    pub distribution: Vec<f64>,
}

/// Recurrent classes of a finite chain, ordered by smallest member.
pub fn stationary_distributions(chain: &[Vec<f64>]) -> Result<Vec<RecurrentClass>> {
    let n = chain.len();
    for (i, row) in chain.iter().enumerate() {
        if row.len() != n {
            return usage(format!("row {i} of the chain has wrong length"));
        }
        let total: f64 = row.iter().sum();
        if row.iter().any(|&p| p < 0.0) || (total - 1.0).abs() > 1e-9 {
            return usage(format!("row {i} of the chain is not a distribution"));
        }
    }
    let mut graph = DiGraph::<(), ()>::with_capacity(n, n * n);
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for (i, row) in chain.iter().enumerate() {
        for (j, &p) in row.iter().enumerate() {
            if p > 0.0 {
                graph.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let mut classes = Vec::new();
    for scc in tarjan_scc(&graph) {
        let mut members: Vec<usize> = scc.iter().map(|ix| ix.index()).collect();
        members.sort_unstable();
        let mut inside = vec![false; n];
        for &m in &members {
            inside[m] = true;
        }
        let closed = members
            .iter()
            .all(|&i| chain[i].iter().enumerate().all(|(j, &p)| p <= 0.0 || inside[j]));
        if closed {
            let distribution = solve_stationary(chain, &members)?;
            classes.push(RecurrentClass {
                states: members,
                distribution,
            });
        }
    }
    classes.sort_by_key(|c| c.states[0]);
    Ok(classes)
}

fn solve_stationary(chain: &[Vec<f64>], members: &[usize]) -> Result<Vec<f64>> {
    let m = members.len();
    if m == 1 {
        return Ok(vec![1.0]);
    }
    // (P^T - I) pi = 0 with the last equation replaced by sum(pi) = 1
    let mut a = DMatrix::<f64>::zeros(m, m);
    for (r, &i) in members.iter().enumerate() {
        for (c, &j) in members.iter().enumerate() {
            a[(c, r)] = chain[i][j];
        }
    }
    for d in 0..m {
        a[(d, d)] -= 1.0;
    }
    for c in 0..m {
        a[(m - 1, c)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(m);
    b[m - 1] = 1.0;
    let pi = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Internal("singular stationary system".into()))?;
    let mut pi: Vec<f64> = pi.iter().map(|&x| x.max(0.0)).collect();
    let total: f64 = pi.iter().sum();
    for x in &mut pi {
        *x /= total;
    }
    Ok(pi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(chain: &[Vec<f64>], class: &RecurrentClass) -> f64 {
        let mut worst: f64 = 0.0;
        for (c, &j) in class.states.iter().enumerate() {
            let inflow: f64 = class
                .states
                .iter()
                .zip(&class.distribution)
                .map(|(&i, &pi)| pi * chain[i][j])
                .sum();
            worst = worst.max((inflow - class.distribution[c]).abs());
        }
        worst
    }

    #[test]
    fn cycle_step_pays_at_state_one() {
        let inst = build_cycle(4).unwrap();
        let mut rng = seeded_rng(1);
        let (next, v) = inst.step(0, 0, &mut rng).unwrap();
        assert_eq!(next, 1);
        assert_eq!(v, vec![1.0]);
        let (_, v) = inst.step(1, 0, &mut rng).unwrap();
        assert_eq!(v, vec![0.0]);
    }

    #[test]
    fn star_leaf_loop_yields_unit_vector() {
        let inst = build_star(3, 4).unwrap();
        let leaf = inst.state_index("leaf2").unwrap();
        let lp = (0..inst.num_actions(leaf))
            .find(|&a| inst.action(leaf, a).name == "loop")
            .unwrap();
        let mut rng = seeded_rng(3);
        let (next, v) = inst.step(leaf, lp, &mut rng).unwrap();
        assert_eq!(next, leaf);
        assert_eq!(v, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn zero_outcome_model_ignores_rng() {
        let inst = build_star(2, 2).unwrap();
        for seed in 0..5 {
            let mut rng = seeded_rng(seed);
            let (_, v) = inst.step(0, 1, &mut rng).unwrap();
            assert_eq!(v, vec![0.0, 0.0]);
        }
    }

    #[test]
    fn step_rejects_bad_indices() {
        let inst = build_bandit(2).unwrap();
        let mut rng = seeded_rng(0);
        assert!(matches!(inst.step(1, 0, &mut rng), Err(Error::Usage(_))));
        assert!(matches!(inst.step(0, 2, &mut rng), Err(Error::Usage(_))));
    }

    #[test]
    fn star_sizes() {
        let inst = build_star(3, 4).unwrap();
        assert_eq!(inst.num_states(), 7);
        let leaves: Vec<_> = (0..7).filter(|&s| inst.state_name(s).starts_with("leaf")).collect();
        assert_eq!(leaves.len(), 3);
        for &l in &leaves {
            let loops = (0..inst.num_actions(l))
                .filter(|&a| inst.transition(l, a)[l] == 1.0)
                .count();
            assert_eq!(loops, 1);
        }
        assert_eq!(build_star(2, 2).unwrap().num_states(), 3);
        assert!(matches!(build_star(3, 3), Err(Error::Usage(_))));
        assert!(matches!(build_star(1, 4), Err(Error::Usage(_))));
    }

    #[test]
    fn bandit_round_robin_is_uniform() {
        let inst = build_bandit(3).unwrap();
        assert_eq!(inst.mean(0, 1), &[0.0, 1.0, 0.0]);
        let mut rng = seeded_rng(0);
        let mut traj = Trajectory::new(3);
        for t in 0..3 {
            let (next, v) = inst.step(0, t, &mut rng).unwrap();
            traj.push(Step {
                t: t as u64 + 1,
                state: 0,
                action: t,
                outcome: v,
                next_state: next,
            });
        }
        for x in traj.average() {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        let single = build_bandit(1).unwrap();
        assert_eq!(single.step(0, 0, &mut rng).unwrap().1, vec![1.0]);
    }

    #[test]
    fn cycle_average_rewards() {
        for (d, t_len, expect) in [(4usize, 4usize, 0.25), (5, 11, 3.0 / 11.0), (2, 6, 0.5)] {
            let inst = build_cycle(d).unwrap();
            let mut rng = seeded_rng(0);
            let mut s = inst.start();
            let mut total = 0.0;
            for _ in 0..t_len {
                let (next, v) = inst.step(s, 0, &mut rng).unwrap();
                total += v[0];
                s = next;
            }
            assert!((total / t_len as f64 - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn diameters_of_builders() {
        assert_eq!(diameter(&build_cycle(4).unwrap()).unwrap(), 3.0);
        assert_eq!(diameter(&build_star(2, 4).unwrap()).unwrap(), 4.0);
        assert_eq!(diameter(&build_bandit(3).unwrap()).unwrap(), 0.0);
        for k in 2..=4 {
            for d in [2, 4, 6, 8] {
                assert_eq!(diameter(&build_star(k, d).unwrap()).unwrap(), d as f64, "K={k} D={d}");
            }
        }
    }

    #[test]
    fn diameter_rejects_non_communicating() {
        let actions = vec![
            vec![Action::deterministic("stay", 2, 0, vec![0.0])],
            vec![Action::deterministic("go", 2, 0, vec![0.0])],
        ];
        let inst = MdpInstance::new(vec!["a".into(), "b".into()], 0, 1, actions).unwrap();
        assert!(matches!(diameter(&inst), Err(Error::NotCommunicating(_))));
        assert!(matches!(
            diameter_with_cap(&build_star(3, 4).unwrap(), 5),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn diameter_of_stochastic_chain() {
        // from a: success w.p. 1/2 each try, so expected hitting time 2
        let actions = vec![
            vec![Action::new(
                "try",
                vec![0.5, 0.5],
                OutcomeModel::Deterministic(vec![0.0]),
            )],
            vec![Action::deterministic("back", 2, 0, vec![0.0])],
        ];
        let inst = MdpInstance::new(vec!["a".into(), "b".into()], 0, 1, actions).unwrap();
        assert!((diameter(&inst).unwrap() - 2.0).abs() < 1e-8);
    }

    #[test]
    fn stationary_examples() {
        let two_cycle = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let classes = stationary_distributions(&two_cycle).unwrap();
        assert_eq!(classes.len(), 1);
        assert_eq!(classes[0].states, vec![0, 1]);
        for p in &classes[0].distribution {
            assert!((p - 0.5).abs() < 1e-12);
        }

        let identity = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let classes = stationary_distributions(&identity).unwrap();
        assert_eq!(classes.len(), 3);
        for (i, c) in classes.iter().enumerate() {
            assert_eq!(c.states, vec![i]);
            assert_eq!(c.distribution, vec![1.0]);
        }

        let absorbing = vec![vec![0.3, 0.7], vec![0.0, 1.0]];
        let classes = stationary_distributions(&absorbing).unwrap();
        assert_eq!(classes.len(), 1);
        assert_eq!(classes[0].states, vec![1]);
        assert_eq!(classes[0].distribution, vec![1.0]);
    }

    #[test]
    fn stationary_rejects_bad_rows() {
        assert!(stationary_distributions(&[vec![0.5, 0.4], vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn json_round_trip_preserves_structure() {
        let inst = build_star(2, 4).unwrap();
        let text = inst.to_json().unwrap();
        let back = MdpInstance::from_json(&text).unwrap();
        assert_eq!(back.num_states(), inst.num_states());
        assert_eq!(back.num_pairs(), inst.num_pairs());
        for s in 0..inst.num_states() {
            for a in 0..inst.num_actions(s) {
                assert_eq!(back.transition(s, a), inst.transition(s, a));
                assert_eq!(back.mean(s, a), inst.mean(s, a));
            }
        }
    }

    #[test]
    fn json_reads_null_actions_and_bernoulli() {
        let text = r#"{
            "states": ["x", "y"], "start": "y", "K": 2,
            "actions": [
                {"state": "x", "name": "rest", "p": {"x": 1.0}, "outcome": {"kind": "deterministic", "mean": [0, 0]}, "null": true},
                {"state": "x", "name": "work", "p": {"y": 1.0}, "outcome": {"kind": "bernoulli", "mean": [0.5, 0.5]}},
                {"state": "y", "name": "rest", "p": {"x": 0.5, "y": 0.5}, "outcome": {"kind": "deterministic", "mean": [0, 0]}, "null": true}
            ]}"#;
        let inst = MdpInstance::from_json(text).unwrap();
        assert_eq!(inst.start(), 1);
        assert_eq!(inst.null_action(0), Some(0));
        assert_eq!(inst.null_action(1), Some(0));
        assert_eq!(inst.num_pairs(), 3);
        assert_eq!(inst.pair_of(2), (1, 0));
    }

    #[test]
    fn constructor_validates_kernel_and_means() {
        let bad_p = vec![vec![Action::new(
            "a",
            vec![0.6],
            OutcomeModel::Deterministic(vec![0.0]),
        )]];
        assert!(MdpInstance::new(vec!["s".into()], 0, 1, bad_p).is_err());
        let bad_v = vec![vec![Action::new(
            "a",
            vec![1.0],
            OutcomeModel::Deterministic(vec![1.5]),
        )]];
        assert!(MdpInstance::new(vec!["s".into()], 0, 1, bad_v).is_err());
    }

    #[test]
    fn stationary_residual_small_on_random_chain() {
        let mut rng = seeded_rng(9);
        for _ in 0..50 {
            let n = rng.gen_range(2..7);
            let chain: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    let raw: Vec<f64> = (0..n)
                        .map(|_| if rng.gen::<f64>() < 0.4 { 0.0 } else { rng.gen::<f64>() })
                        .collect();
                    let tot: f64 = raw.iter().sum();
                    if tot == 0.0 {
                        let mut r = vec![0.0; n];
                        r[0] = 1.0;
                        r
                    } else {
                        raw.iter().map(|x| x / tot).collect()
                    }
                })
                .collect();
            for class in stationary_distributions(&chain).unwrap() {
                let total: f64 = class.distribution.iter().sum();
                assert!((total - 1.0).abs() < 1e-10);
                assert!(residual(&chain, &class) <= 1e-10);
            }
        }
    }
}
