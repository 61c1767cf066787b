//! Ground-truth tabular MDPs, the synthetic benchmark environments, behavior
//! policies and trajectory simulation.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::rng::{derive_seed, rng_from_seed};

const STOCHASTIC_TOL: f64 = 1e-9;

/// Distribution of a single sampled reward.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RewardDist {
    Constant {
        value: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// A uniform draw on `[lo, hi]` clamped into `[min, max]`.
    ClippedUniform {
        lo: f64,
        hi: f64,
        min: f64,
        max: f64,
    },
}

impl RewardDist {
    pub fn mean(&self) -> f64 {
        match *self {
            RewardDist::Constant { value } => value,
            RewardDist::Uniform { lo, hi } => 0.5 * (lo + hi),
            RewardDist::ClippedUniform { lo, hi, min, max } => {
                if hi <= lo {
                    return lo.clamp(min, max);
                }
                let width = hi - lo;
                let below = (min.min(hi) - lo).max(0.0) / width;
                let above = (hi - max.max(lo)).max(0.0) / width;
                let a = lo.max(min);
                let b = hi.min(max);
                let inside = if b > a { (b * b - a * a) / (2.0 * width) } else { 0.0 };
                below * min + above * max + inside
            }
        }
    }

    /// Smallest and largest value a draw can take.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            RewardDist::Constant { value } => (value, value),
            RewardDist::Uniform { lo, hi } => (lo, hi),
            RewardDist::ClippedUniform { lo, hi, min, max } => (lo.clamp(min, max), hi.clamp(min, max)),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            RewardDist::Constant { value } => value,
            RewardDist::Uniform { lo, hi } => lo + (hi - lo) * rng.gen::<f64>(),
            RewardDist::ClippedUniform { lo, hi, min, max } => (lo + (hi - lo) * rng.gen::<f64>()).clamp(min, max),
        }
    }
}

/// Rewards keyed by `(state, action)`, with optional per-destination
/// overrides: a transition into `s'` whose `on_arrival[s']` is set draws from
/// that distribution instead of the pair's own.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardSpec {
    pub per_pair: Vec<RewardDist>,
    pub on_arrival: Vec<Option<RewardDist>>,
}

impl RewardSpec {
    pub fn uniform_pairs(num_states: usize, num_actions: usize, dist: RewardDist) -> Self {
        Self { per_pair: vec![dist; num_states * num_actions], on_arrival: vec![None; num_states] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabularMdp {
    pub name: String,
    pub num_states: usize,
    pub num_actions: usize,
    /// Row-major `[state][action][next_state]`.
    transitions: Vec<f64>,
    rewards: RewardSpec,
    pub gamma: f64,
    pub start_state: usize,
    terminal: Vec<bool>,
    pub r_max: f64,
}

impl TabularMdp {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        num_states: usize,
        num_actions: usize,
        transitions: Vec<f64>,
        rewards: RewardSpec,
        gamma: f64,
        start_state: usize,
        terminal_states: &[usize],
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(config_err("an MDP needs at least one state and one action"));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(config_err(format!("discount {gamma} outside [0, 1)")));
        }
        if transitions.len() != num_states * num_actions * num_states {
            return Err(config_err("transition tensor has the wrong size"));
        }
        if rewards.per_pair.len() != num_states * num_actions || rewards.on_arrival.len() != num_states {
            return Err(config_err("reward spec has the wrong size"));
        }
        if start_state >= num_states {
            return Err(Error::OutOfRange { what: "start state", index: start_state, limit: num_states });
        }
        let mut terminal = vec![false; num_states];
        for &t in terminal_states {
            if t >= num_states {
                return Err(Error::OutOfRange { what: "terminal state", index: t, limit: num_states });
            }
            terminal[t] = true;
        }
        if terminal[start_state] {
            return Err(config_err("start state must not be terminal"));
        }
        for (pair, row) in transitions.chunks(num_states).enumerate() {
            if row.iter().any(|&p| !(p >= 0.0)) {
                return Err(config_err(format!("negative transition probability in pair {pair}")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > STOCHASTIC_TOL {
                return Err(config_err(format!("transition row of pair {pair} sums to {total}")));
            }
        }
        let mut r_max: f64 = 0.0;
        let dists = rewards.per_pair.iter().chain(rewards.on_arrival.iter().flatten());
        for d in dists {
            let (lo, hi) = d.support();
            if !(lo >= 0.0) || !hi.is_finite() {
                return Err(config_err(format!("reward distribution {d:?} leaves [0, inf)")));
            }
            r_max = r_max.max(hi);
        }
        Ok(Self {
            name: name.into(),
            num_states,
            num_actions,
            transitions,
            rewards,
            gamma,
            start_state,
            terminal,
            r_max,
        })
    }

    pub fn transition_row(&self, state: usize, action: usize) -> &[f64] {
        let start = (state * self.num_actions + action) * self.num_states;
        &self.transitions[start..start + self.num_states]
    }

    pub fn is_terminal(&self, state: usize) -> bool {
        self.terminal[state]
    }

    pub fn terminal_states(&self) -> BTreeSet<usize> {
        (0..self.num_states).filter(|&s| self.terminal[s]).collect()
    }

    pub fn reward_dist(&self, state: usize, action: usize, next: usize) -> RewardDist {
        self.rewards.on_arrival[next].unwrap_or(self.rewards.per_pair[state * self.num_actions + action])
    }

    /// Expected one-step reward of taking `action` in `state`.
    pub fn expected_reward(&self, state: usize, action: usize) -> f64 {
        self.transition_row(state, action)
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(next, &p)| p * self.reward_dist(state, action, next).mean())
            .sum()
    }

    /// Upper bound on any state value, `R_max / (1 - gamma)`.
    pub fn v_max(&self) -> f64 {
        self.r_max / (1.0 - self.gamma)
    }

    pub fn step<R: Rng + ?Sized>(&self, state: usize, action: usize, rng: &mut R) -> (usize, f64) {
        let next = sample_index(self.transition_row(state, action), rng);
        let reward = self.reward_dist(state, action, next).sample(rng);
        (next, reward)
    }
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Optimal action values by value iteration, row-major `[state][action]`.
/// Terminal states have value zero.
pub fn optimal_q_values(mdp: &TabularMdp) -> Vec<f64> {
    let (ns, na) = (mdp.num_states, mdp.num_actions);
    let rewards: Vec<f64> = (0..ns * na).map(|i| mdp.expected_reward(i / na, i % na)).collect();
    let sparse: Vec<Vec<(usize, f64)>> = (0..ns * na)
        .map(|i| {
            mdp.transition_row(i / na, i % na)
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0.0)
                .map(|(j, &p)| (j, p))
                .collect()
        })
        .collect();
    let mut v = vec![0.0; ns];
    let mut q = vec![0.0; ns * na];
    for _ in 0..1_000_000 {
        for i in 0..ns * na {
            q[i] = if mdp.is_terminal(i / na) {
                0.0
            } else {
                rewards[i] + mdp.gamma * sparse[i].iter().map(|&(j, p)| p * v[j]).sum::<f64>()
            };
        }
        let mut delta: f64 = 0.0;
        for s in 0..ns {
            let best = q[s * na..(s + 1) * na].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            delta = delta.max((best - v[s]).abs());
            v[s] = best;
        }
        if delta < 1e-13 {
            break;
        }
    }
    q
}

const TIE_TOL: f64 = 1e-10;

/// Index of the largest entry; entries within `1e-10` of the best count as
/// ties and the lowest index wins.
pub fn greedy_action(row: &[f64]) -> usize {
    let best = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    row.iter().position(|&q| q >= best - TIE_TOL).unwrap_or(0)
}

/// Index of the smallest entry, lowest index on ties.
pub fn worst_action(row: &[f64]) -> usize {
    let worst = row.iter().cloned().fold(f64::INFINITY, f64::min);
    row.iter().position(|&q| q <= worst + TIE_TOL).unwrap_or(0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorKind {
    TabularStochastic,
    CarelessExpert,
}

/// Stochastic behavior policy, one distribution per state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BehaviorPolicy {
    pub kind: BehaviorKind,
    pub name: String,
    pub num_states: usize,
    pub num_actions: usize,
    probs: Vec<f64>,
}

impl BehaviorPolicy {
    pub fn new(
        kind: BehaviorKind,
        name: impl Into<String>,
        num_states: usize,
        num_actions: usize,
        probs: Vec<f64>,
    ) -> Result<Self> {
        if probs.len() != num_states * num_actions {
            return Err(config_err("behavior table has the wrong size"));
        }
        validate_rows(&probs, num_actions)?;
        Ok(Self { kind, name: name.into(), num_states, num_actions, probs })
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        Self {
            kind: BehaviorKind::TabularStochastic,
            name: "uniform".into(),
            num_states,
            num_actions,
            probs: vec![1.0 / num_actions as f64; num_states * num_actions],
        }
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.probs[state * self.num_actions..(state + 1) * self.num_actions]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn sample<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> usize {
        sample_index(self.row(state), rng)
    }
}

pub(crate) fn validate_rows(probs: &[f64], num_actions: usize) -> Result<()> {
    for (state, row) in probs.chunks(num_actions).enumerate() {
        if row.iter().any(|&p| !(p >= 0.0)) {
            return Err(config_err(format!("negative action probability at state {state}")));
        }
        let total: f64 = row.iter().sum();
        if (total - 1.0).abs() > STOCHASTIC_TOL {
            return Err(config_err(format!("action distribution at state {state} sums to {total}")));
        }
    }
    Ok(())
}

/// A ground-truth MDP together with the behavior policy that generates data in it.
#[derive(Clone, Debug)]
pub struct Environment {
    pub mdp: TabularMdp,
    pub behavior: BehaviorPolicy,
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(0.0..=0.5).contains(&epsilon) {
        return Err(config_err(format!("epsilon {epsilon} outside [0, 1/2]")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub num_chains: usize,
    pub depth: usize,
    pub epsilon: f64,
    pub gamma: f64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self { num_chains: 10, depth: 3, epsilon: 0.1, gamma: 0.99 }
    }
}

/// State layout of the forest MDP.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ForestLayout {
    pub num_chains: usize,
    pub depth: usize,
}

impl ForestLayout {
    pub const ROOT: usize = 0;

    pub fn good(&self, chain: usize, level: usize) -> usize {
        1 + chain * self.depth + level
    }

    pub fn middle(&self, level: usize) -> usize {
        1 + self.num_chains * self.depth + level
    }

    pub fn bad(&self, chain: usize, level: usize) -> usize {
        1 + self.num_chains * self.depth + self.depth + chain * self.depth + level
    }

    pub fn terminal(&self) -> usize {
        1 + 2 * self.num_chains * self.depth + self.depth
    }

    pub fn num_states(&self) -> usize {
        self.terminal() + 1
    }
}

/// Forest MDP: from the root, `a0` enters one of `num_chains` good chains,
/// `a1` the single middle chain and `a2` one of `num_chains` bad chains. Every
/// chain is deterministic with `depth` states; acting in the last state of a
/// chain pays its reward and ends the episode.
pub fn build_forest_mdp(config: &ForestConfig) -> Result<Environment> {
    let ForestConfig { num_chains, depth, epsilon, gamma } = *config;
    if num_chains == 0 || depth == 0 {
        return Err(config_err("forest needs at least one chain of depth one"));
    }
    check_epsilon(epsilon)?;
    let layout = ForestLayout { num_chains, depth };
    let ns = layout.num_states();
    let na = 3;
    let mut p = vec![0.0; ns * na * ns];
    let mut set = |s: usize, a: usize, next: usize, prob: f64| p[(s * na + a) * ns + next] += prob;
    let zero = RewardDist::Constant { value: 0.0 };
    let mut rewards = RewardSpec::uniform_pairs(ns, na, zero);

    let share = 1.0 / num_chains as f64;
    for c in 0..num_chains {
        set(ForestLayout::ROOT, 0, layout.good(c, 0), share);
        set(ForestLayout::ROOT, 2, layout.bad(c, 0), share);
    }
    set(ForestLayout::ROOT, 1, layout.middle(0), 1.0);

    let good_end = RewardDist::Uniform { lo: 0.65, hi: 0.75 };
    let middle_end = RewardDist::Constant { value: 0.55 };
    let bad_end = RewardDist::Uniform { lo: 0.0, hi: 1.0 };
    let mut chain = |state_at: &dyn Fn(usize) -> usize, end: RewardDist| {
        for level in 0..depth {
            let s = state_at(level);
            let next = if level + 1 < depth { state_at(level + 1) } else { layout.terminal() };
            for a in 0..na {
                set(s, a, next, 1.0);
                if level + 1 == depth {
                    rewards.per_pair[s * na + a] = end;
                }
            }
        }
    };
    for c in 0..num_chains {
        chain(&|l| layout.good(c, l), good_end);
        chain(&|l| layout.bad(c, l), bad_end);
    }
    chain(&|l| layout.middle(l), middle_end);
    let term = layout.terminal();
    for a in 0..na {
        set(term, a, term, 1.0);
    }

    let name = format!("forest(chains={num_chains},depth={depth},epsilon={epsilon},gamma={gamma})");
    let mdp = TabularMdp::new(name, ns, na, p, rewards, gamma, ForestLayout::ROOT, &[term])?;

    let mut probs = vec![1.0 / na as f64; ns * na];
    probs[..na].copy_from_slice(&[epsilon, 1.0 - 2.0 * epsilon, epsilon]);
    let behavior = BehaviorPolicy::new(
        BehaviorKind::TabularStochastic,
        format!("forest-behavior(epsilon={epsilon})"),
        ns,
        na,
        probs,
    )?;
    Ok(Environment { mdp, behavior })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CqlConfig {
    pub num_risky: usize,
    pub epsilon: f64,
    pub gamma: f64,
}

impl Default for CqlConfig {
    fn default() -> Self {
        Self { num_risky: 8, epsilon: 0.1, gamma: 0.99 }
    }
}

/// One-step MDP: action 0 reaches `b1` (reward `Unif[0.5, 0.9]`), action 1
/// reaches `b2` (reward 0.55), and action `2 + k` reaches risky state `c_k`
/// (reward `Unif[0, 1]`). States: `s0 = 0`, `b1 = 1`, `b2 = 2`, `c_k = 3 + k`.
pub fn build_cql_mdp(config: &CqlConfig) -> Result<Environment> {
    let CqlConfig { num_risky, epsilon, gamma } = *config;
    if num_risky == 0 {
        return Err(config_err("CQL MDP needs at least one risky action"));
    }
    check_epsilon(epsilon)?;
    let ns = num_risky + 3;
    let na = num_risky + 2;
    let mut p = vec![0.0; ns * na * ns];
    let mut rewards = RewardSpec::uniform_pairs(ns, na, RewardDist::Constant { value: 0.0 });
    for a in 0..na {
        let next = a + 1;
        p[a * ns + next] = 1.0;
        rewards.per_pair[a] = match a {
            0 => RewardDist::Uniform { lo: 0.5, hi: 0.9 },
            1 => RewardDist::Constant { value: 0.55 },
            _ => RewardDist::Uniform { lo: 0.0, hi: 1.0 },
        };
    }
    for s in 1..ns {
        for a in 0..na {
            p[(s * na + a) * ns + s] = 1.0;
        }
    }
    let terminals: Vec<usize> = (1..ns).collect();
    let name = format!("cql(risky={num_risky},epsilon={epsilon},gamma={gamma})");
    let mdp = TabularMdp::new(name, ns, na, p, rewards, gamma, 0, &terminals)?;

    let mut probs = vec![1.0 / na as f64; ns * na];
    probs[0] = epsilon;
    probs[1] = 1.0 - 2.0 * epsilon;
    for p in &mut probs[2..na] {
        *p = epsilon / num_risky as f64;
    }
    let behavior = BehaviorPolicy::new(
        BehaviorKind::TabularStochastic,
        format!("cql-behavior(epsilon={epsilon})"),
        ns,
        na,
        probs,
    )?;
    Ok(Environment { mdp, behavior })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridworldConfig {
    pub side: usize,
    /// Probability that the intended move is executed; otherwise a uniformly
    /// random action (possibly the intended one) is.
    pub noise: f64,
    /// `None` selects [`default_careless_states`].
    pub careless_states: Option<Vec<usize>>,
    pub gamma: f64,
    /// Half-width of the zero-mean uniform noise added to every reward.
    pub reward_noise: f64,
}

impl Default for GridworldConfig {
    fn default() -> Self {
        Self { side: 10, noise: 0.9, careless_states: None, gamma: 0.95, reward_noise: 0.05 }
    }
}

pub mod grid_actions {
    pub const UP: usize = 0;
    pub const RIGHT: usize = 1;
    pub const DOWN: usize = 2;
    pub const LEFT: usize = 3;
}

fn grid_move(side: usize, state: usize, action: usize) -> usize {
    let (row, col) = (state / side, state % side);
    let (row, col) = match action {
        grid_actions::UP if row + 1 < side => (row + 1, col),
        grid_actions::RIGHT if col + 1 < side => (row, col + 1),
        grid_actions::DOWN if row > 0 => (row - 1, col),
        grid_actions::LEFT if col > 0 => (row, col - 1),
        _ => (row, col),
    };
    row * side + col
}

/// Grid without a behavior policy. States are `row * side + col` with row 0
/// at the bottom; the start is the bottom-left cell and the goal (terminal)
/// the top-right cell. Entering the goal pays 1, every other step pays 0,
/// both perturbed by clipped uniform noise.
pub fn build_gridworld_mdp(config: &GridworldConfig) -> Result<TabularMdp> {
    let GridworldConfig { side, noise, gamma, reward_noise, .. } = *config;
    if side < 2 {
        return Err(config_err("gridworld side must be at least 2"));
    }
    if !(0.0..=1.0).contains(&noise) {
        return Err(config_err(format!("gridworld noise {noise} outside [0, 1]")));
    }
    if !(reward_noise >= 0.0) {
        return Err(config_err("reward noise must be nonnegative"));
    }
    let ns = side * side;
    let na = 4;
    let goal = ns - 1;
    let mut p = vec![0.0; ns * na * ns];
    for s in 0..ns {
        for a in 0..na {
            let base = (s * na + a) * ns;
            if s == goal {
                p[base + s] = 1.0;
                continue;
            }
            p[base + grid_move(side, s, a)] += noise;
            for executed in 0..na {
                p[base + grid_move(side, s, executed)] += (1.0 - noise) / na as f64;
            }
        }
    }
    let step = RewardDist::ClippedUniform { lo: -reward_noise, hi: reward_noise, min: 0.0, max: 1.0 };
    let arrive = RewardDist::ClippedUniform { lo: 1.0 - reward_noise, hi: 1.0 + reward_noise, min: 0.0, max: 1.0 };
    let mut rewards = RewardSpec::uniform_pairs(ns, na, step);
    rewards.on_arrival[goal] = Some(arrive);
    let name = format!("gridworld(side={side},noise={noise},gamma={gamma})");
    TabularMdp::new(name, ns, na, p, rewards, gamma, 0, &[goal])
}

/// Five cells spread evenly along the path that the optimal policy would
/// follow from the start if every move succeeded (fewer on tiny grids).
pub fn default_careless_states(mdp: &TabularMdp, side: usize) -> Vec<usize> {
    let q = optimal_q_values(mdp);
    let na = mdp.num_actions;
    let mut path = Vec::new();
    let mut s = mdp.start_state;
    let mut seen = BTreeSet::new();
    while !mdp.is_terminal(s) && seen.insert(s) {
        if s != mdp.start_state {
            path.push(s);
        }
        s = grid_move(side, s, greedy_action(&q[s * na..(s + 1) * na]));
    }
    let want = 5.min(path.len());
    let mut picked: Vec<usize> = (0..want).map(|i| path[((i + 1) * path.len()) / (want + 1)]).collect();
    picked.dedup();
    picked
}

/// GridWorld with its careless-expert behavior policy: optimal everywhere
/// except at the careless states, where the worst action is taken with
/// probability 0.9 and the optimal one with probability 0.1.
pub fn build_gridworld(config: &GridworldConfig) -> Result<Environment> {
    let mdp = build_gridworld_mdp(config)?;
    let ns = mdp.num_states;
    let na = mdp.num_actions;
    let careless = match &config.careless_states {
        Some(states) => states.clone(),
        None => default_careless_states(&mdp, config.side),
    };
    let mut careless_mask = vec![false; ns];
    for &c in &careless {
        if c >= ns {
            return Err(Error::OutOfRange { what: "careless state", index: c, limit: ns });
        }
        careless_mask[c] = true;
    }
    let q = optimal_q_values(&mdp);
    let mut probs = vec![0.0; ns * na];
    for s in 0..ns {
        let row = &q[s * na..(s + 1) * na];
        let best = greedy_action(row);
        if careless_mask[s] && !mdp.is_terminal(s) {
            let worst = worst_action(row);
            probs[s * na + worst] += 0.9;
            probs[s * na + best] += 0.1;
        } else {
            probs[s * na + best] = 1.0;
        }
    }
    let behavior = BehaviorPolicy::new(
        BehaviorKind::CarelessExpert,
        format!("careless-expert(states={careless:?})"),
        ns,
        na,
        probs,
    )?;
    Ok(Environment { mdp, behavior })
}

/// One logged step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "(usize, usize, f64)", into = "(usize, usize, f64)")]
pub struct Step {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
}

impl From<(usize, usize, f64)> for Step {
    fn from((state, action, reward): (usize, usize, f64)) -> Self {
        Self { state, action, reward }
    }
}

impl From<Step> for (usize, usize, f64) {
    fn from(s: Step) -> Self {
        (s.state, s.action, s.reward)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trajectory {
    pub seed: u64,
    pub steps: Vec<Step>,
}

impl Trajectory {
    /// Discounted return from every time step, `G_t = sum_k gamma^(k-t) R_k`.
    pub fn suffix_returns(&self, gamma: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.steps.len()];
        let mut acc = 0.0;
        for (t, step) in self.steps.iter().enumerate().rev() {
            acc = step.reward + gamma * acc;
            out[t] = acc;
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryDataset {
    pub trajectories: Vec<Trajectory>,
    pub mdp_descriptor: String,
    pub behavior_descriptor: String,
    pub master_seed: u64,
}

impl TrajectoryDataset {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn num_steps(&self) -> usize {
        self.trajectories.iter().map(|t| t.steps.len()).sum()
    }

    /// Checks every index against the given state/action counts.
    pub fn validate(&self, num_states: usize, num_actions: usize) -> Result<()> {
        for traj in &self.trajectories {
            if traj.steps.is_empty() {
                return Err(Error::Empty("trajectory"));
            }
            for step in &traj.steps {
                if step.state >= num_states {
                    return Err(Error::OutOfRange { what: "state", index: step.state, limit: num_states });
                }
                if step.action >= num_actions {
                    return Err(Error::OutOfRange { what: "action", index: step.action, limit: num_actions });
                }
            }
        }
        Ok(())
    }

    /// Line-delimited JSON, one `{"seed":..,"steps":[[s,a,r],..]}` per trajectory.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for traj in &self.trajectories {
            serde_json::to_writer(&mut out, traj)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(
        input: R,
        mdp_descriptor: impl Into<String>,
        behavior_descriptor: impl Into<String>,
        master_seed: u64,
    ) -> std::io::Result<Self> {
        let mut trajectories = Vec::new();
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            trajectories.push(serde_json::from_str(&line)?);
        }
        Ok(Self {
            trajectories,
            mdp_descriptor: mdp_descriptor.into(),
            behavior_descriptor: behavior_descriptor.into(),
            master_seed,
        })
    }
}

/// Rolls out `policy` from the start state. Trajectory `i` uses the seed
/// `derive_seed(master_seed, i)`, so each can be regenerated on its own.
pub fn simulate(
    mdp: &TabularMdp,
    policy: &BehaviorPolicy,
    num_trajectories: usize,
    horizon: usize,
    master_seed: u64,
) -> Result<TrajectoryDataset> {
    if horizon == 0 {
        return Err(config_err("horizon must be at least 1"));
    }
    if policy.num_states != mdp.num_states || policy.num_actions != mdp.num_actions {
        return Err(config_err("behavior policy does not match the MDP"));
    }
    let trajectories = (0..num_trajectories)
        .into_par_iter()
        .map(|i| simulate_one(mdp, policy, horizon, derive_seed(master_seed, i as u64)))
        .collect();
    Ok(TrajectoryDataset {
        trajectories,
        mdp_descriptor: mdp.name.clone(),
        behavior_descriptor: policy.name.clone(),
        master_seed,
    })
}

pub fn simulate_one(mdp: &TabularMdp, policy: &BehaviorPolicy, horizon: usize, seed: u64) -> Trajectory {
    let mut rng = rng_from_seed(seed);
    let mut steps = Vec::new();
    let mut state = mdp.start_state;
    for _ in 0..horizon {
        let action = policy.sample(state, &mut rng);
        let (next, reward) = mdp.step(state, action, &mut rng);
        steps.push(Step { state, action, reward });
        if mdp.is_terminal(next) {
            break;
        }
        state = next;
    }
    Trajectory { seed, steps }
}
