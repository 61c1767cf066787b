//! Tabular reference learners: SPIBB, PQI-style density filtering and
//! behavior cloning.
//!
//! SPIBB and PQI plan on the maximum-likelihood model of the dataset. The
//! model has one extra absorbing state, `END`, with value 0: the last logged
//! step of every trajectory moves there, and so does every pair without data.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::linalg::solve_dense;
use crate::mdp::{validate_rows, TrajectoryDataset};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Spibb,
    Pqi,
    BehaviorClone,
}

/// Which behavior SPIBB bootstraps on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorSource {
    True,
    Estimated,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_wedge: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub behavior: Option<BehaviorSource>,
}

/// Stochastic policy produced by a baseline learner.
#[derive(Clone, Debug, PartialEq)]
pub struct BaselinePolicy {
    pub kind: BaselineKind,
    pub params: BaselineParams,
    pub num_states: usize,
    pub num_actions: usize,
    probs: Vec<f64>,
}

impl BaselinePolicy {
    pub fn new(
        kind: BaselineKind,
        params: BaselineParams,
        num_states: usize,
        num_actions: usize,
        probs: Vec<f64>,
    ) -> Result<Self> {
        if num_actions == 0 || probs.len() != num_states * num_actions {
            return Err(config_err("policy table has the wrong size"));
        }
        validate_rows(&probs, num_actions)?;
        Ok(Self { kind, params, num_states, num_actions, probs })
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.probs[state * self.num_actions..(state + 1) * self.num_actions]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Maximum-likelihood model with every-visit counts.
#[derive(Clone, Debug, PartialEq)]
pub struct MleModel {
    pub num_states: usize,
    pub num_actions: usize,
    pub gamma: f64,
    counts: Vec<u64>,
    reward: Vec<f64>,
    /// Sparse successor distribution per pair; `num_states` denotes `END`.
    next: Vec<Vec<(usize, f64)>>,
    total_steps: u64,
}

impl MleModel {
    pub fn fit(dataset: &TrajectoryDataset, num_states: usize, num_actions: usize, gamma: f64) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::Empty("dataset"));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(config_err(format!("discount {gamma} outside [0, 1)")));
        }
        dataset.validate(num_states, num_actions)?;
        let pairs = num_states * num_actions;
        let mut counts = vec![0u64; pairs];
        let mut reward_sum = vec![0.0; pairs];
        let mut next_counts: Vec<std::collections::BTreeMap<usize, u64>> = vec![Default::default(); pairs];
        let mut total_steps = 0;
        for traj in &dataset.trajectories {
            for (t, step) in traj.steps.iter().enumerate() {
                let i = step.state * num_actions + step.action;
                counts[i] += 1;
                reward_sum[i] += step.reward;
                let succ = traj.steps.get(t + 1).map_or(num_states, |n| n.state);
                *next_counts[i].entry(succ).or_default() += 1;
                total_steps += 1;
            }
        }
        let reward = reward_sum.iter().zip(&counts).map(|(&r, &n)| if n > 0 { r / n as f64 } else { 0.0 }).collect();
        let next = next_counts
            .iter()
            .zip(&counts)
            .map(|(m, &n)| m.iter().map(|(&s, &k)| (s, k as f64 / n as f64)).collect())
            .collect();
        Ok(Self { num_states, num_actions, gamma, counts, reward, next, total_steps })
    }

    pub fn count(&self, state: usize, action: usize) -> u64 {
        self.counts[state * self.num_actions + action]
    }

    pub fn total_steps(&self) -> u64 {
        self.total_steps
    }

    /// Empirical state-action density `n(s,a) / total steps`.
    pub fn density(&self, state: usize, action: usize) -> f64 {
        self.count(state, action) as f64 / self.total_steps as f64
    }

    pub fn reward(&self, state: usize, action: usize) -> f64 {
        self.reward[state * self.num_actions + action]
    }

    /// One-step lookahead; unobserved pairs are worth 0.
    pub fn q_value(&self, state: usize, action: usize, values: &[f64]) -> f64 {
        let i = state * self.num_actions + action;
        let future: f64 = self.next[i].iter().map(|&(s, p)| p * values.get(s).copied().unwrap_or(0.0)).sum();
        self.reward[i] + self.gamma * future
    }

    /// Exact value of a stochastic policy on the model (without `END`).
    pub fn evaluate(&self, probs: &[f64]) -> Result<Vec<f64>> {
        let (ns, na) = (self.num_states, self.num_actions);
        let mut matrix = vec![0.0; ns * ns];
        let mut rhs = vec![0.0; ns];
        for s in 0..ns {
            matrix[s * ns + s] = 1.0;
            for a in 0..na {
                let p = probs[s * na + a];
                if p == 0.0 {
                    continue;
                }
                let i = s * na + a;
                rhs[s] += p * self.reward[i];
                for &(succ, q) in &self.next[i] {
                    if succ < ns {
                        matrix[s * ns + succ] -= self.gamma * p * q;
                    }
                }
            }
        }
        solve_dense(matrix, rhs)
    }
}

/// Empirical action frequencies per state; unseen states are uniform.
pub fn estimate_behavior(dataset: &TrajectoryDataset, num_states: usize, num_actions: usize) -> Result<Vec<f64>> {
    if dataset.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    dataset.validate(num_states, num_actions)?;
    let mut counts = vec![0u64; num_states * num_actions];
    for step in dataset.trajectories.iter().flat_map(|t| &t.steps) {
        counts[step.state * num_actions + step.action] += 1;
    }
    let mut probs = vec![0.0; num_states * num_actions];
    for (row, c) in probs.chunks_mut(num_actions).zip(counts.chunks(num_actions)) {
        let total: u64 = c.iter().sum();
        for (p, &k) in row.iter_mut().zip(c) {
            *p = if total == 0 { 1.0 / num_actions as f64 } else { k as f64 / total as f64 };
        }
    }
    Ok(probs)
}

pub fn train_behavior_clone(
    dataset: &TrajectoryDataset,
    num_states: usize,
    num_actions: usize,
) -> Result<BaselinePolicy> {
    let probs = estimate_behavior(dataset, num_states, num_actions)?;
    BaselinePolicy::new(BaselineKind::BehaviorClone, BaselineParams::default(), num_states, num_actions, probs)
}

const SPIBB_MAX_ITERS: usize = 10_000;
const IMPROVE_TOL: f64 = 1e-12;

/// Pi_b-SPIBB policy iteration on the MLE model.
///
/// Pairs with fewer than `n_wedge` visits keep the behavior's probability;
/// the remaining mass of each state goes to its best well-observed action.
/// `n_wedge = u64::MAX` returns the behavior unchanged.
pub fn train_spibb(model: &MleModel, behavior: &[f64], source: BehaviorSource, n_wedge: u64) -> Result<BaselinePolicy> {
    let (ns, na) = (model.num_states, model.num_actions);
    if behavior.len() != ns * na {
        return Err(config_err("behavior table has the wrong size"));
    }
    validate_rows(behavior, na)?;
    let params = BaselineParams { n_wedge: Some(n_wedge), density_threshold: None, behavior: Some(source) };
    let free: Vec<Vec<usize>> = (0..ns).map(|s| (0..na).filter(|&a| model.count(s, a) >= n_wedge).collect()).collect();
    let mut chosen: Vec<Option<usize>> = vec![None; ns];
    let mut probs = behavior.to_vec();
    for _ in 0..SPIBB_MAX_ITERS {
        let values = model.evaluate(&probs)?;
        let mut changed = false;
        for s in 0..ns {
            if free[s].is_empty() {
                continue;
            }
            let q = |a: usize| model.q_value(s, a, &values);
            let mut best = free[s][0];
            for &a in &free[s][1..] {
                if q(a) > q(best) {
                    best = a;
                }
            }
            if let Some(cur) = chosen[s] {
                if q(best) <= q(cur) + IMPROVE_TOL {
                    best = cur;
                }
            }
            if chosen[s] != Some(best) {
                changed = true;
                chosen[s] = Some(best);
            }
        }
        probs = spibb_projection(behavior, na, &free, &chosen);
        if !changed {
            return BaselinePolicy::new(BaselineKind::Spibb, params, ns, na, probs);
        }
    }
    BaselinePolicy::new(BaselineKind::Spibb, params, ns, na, probs)
}

fn spibb_projection(behavior: &[f64], na: usize, free: &[Vec<usize>], chosen: &[Option<usize>]) -> Vec<f64> {
    let mut probs = behavior.to_vec();
    for (s, target) in chosen.iter().enumerate() {
        if let Some(target) = *target {
            let row = &mut probs[s * na..(s + 1) * na];
            let mass: f64 = free[s].iter().map(|&a| row[a]).sum();
            for &a in &free[s] {
                row[a] = 0.0;
            }
            row[target] = mass;
        }
    }
    probs
}

const PQI_TOL: f64 = 1e-11;
const PQI_MAX_ITERS: usize = 200_000;

/// PQI-style pessimistic value iteration.
///
/// Pairs with empirical density below `b` are worth 0; each state acts
/// greedily over its surviving pairs. States with no survivor fall back to
/// their empirically most frequent action; unseen states are uniform.
pub fn train_pqi(model: &MleModel, b: f64) -> Result<BaselinePolicy> {
    if !(b > 0.0 && b < 1.0) {
        return Err(config_err(format!("density threshold {b} outside (0, 1)")));
    }
    let (ns, na) = (model.num_states, model.num_actions);
    let survives = |s: usize, a: usize| model.count(s, a) > 0 && model.density(s, a) >= b;
    let mut values = vec![0.0; ns];
    for _ in 0..PQI_MAX_ITERS {
        let mut delta = 0.0f64;
        let next: Vec<f64> = (0..ns)
            .map(|s| (0..na).filter(|&a| survives(s, a)).map(|a| model.q_value(s, a, &values)).fold(0.0, f64::max))
            .collect();
        for (v, n) in values.iter().zip(&next) {
            delta = delta.max((v - n).abs());
        }
        values = next;
        if delta <= PQI_TOL {
            break;
        }
    }
    let mut probs = vec![0.0; ns * na];
    for s in 0..ns {
        let row = &mut probs[s * na..(s + 1) * na];
        let alive: Vec<usize> = (0..na).filter(|&a| survives(s, a)).collect();
        let pick = if alive.is_empty() {
            let seen = (0..na).map(|a| model.count(s, a)).max().unwrap_or(0);
            (seen > 0).then(|| (0..na).find(|&a| model.count(s, a) == seen).unwrap())
        } else {
            let mut best = alive[0];
            for &a in &alive[1..] {
                if model.q_value(s, a, &values) > model.q_value(s, best, &values) {
                    best = a;
                }
            }
            Some(best)
        };
        match pick {
            Some(a) => row[a] = 1.0,
            None => row.fill(1.0 / na as f64),
        }
    }
    let params = BaselineParams { n_wedge: None, density_threshold: Some(b), behavior: None };
    BaselinePolicy::new(BaselineKind::Pqi, params, ns, na, probs)
}
