//! Decision-point RL for continuous states.
//!
//! The dataset itself is the model: every logged step is stored with its
//! discounted suffix return, and a query state is judged from the returns of
//! its radius-`r` neighbors under a weighted Euclidean metric. Neighbors only
//! match on the action dimension when actions are equal.

pub mod ball_tree;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::policy::Verdict;
use ball_tree::{weighted_sq_dist, BallTree};

/// One logged step of a continuous-state trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuousStep {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexedPoint {
    pub state: Vec<f64>,
    pub action: usize,
    #[serde(rename = "return")]
    pub ret: f64,
    pub trajectory: usize,
    pub time: usize,
}

/// Serialized form of a [`NeighborIndex`]; the tree is rebuilt on load.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexSnapshot {
    pub metric_weights: Vec<f64>,
    pub radius: f64,
    pub num_actions: usize,
    pub points: Vec<IndexedPoint>,
}

#[derive(Clone, Debug)]
pub struct NeighborIndex {
    points: Vec<IndexedPoint>,
    metric_weights: Vec<f64>,
    radius: f64,
    num_actions: usize,
    tree: BallTree,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborMode {
    #[default]
    All,
    /// Keep only the earliest in-ball point of each trajectory.
    FirstPerTrajectory,
}

/// Stores every step of every trajectory with its discounted suffix return.
pub fn build_index(
    trajectories: &[Vec<ContinuousStep>],
    num_actions: usize,
    gamma: f64,
    metric_weights: Vec<f64>,
    radius: f64,
) -> Result<NeighborIndex> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(config_err(format!("discount {gamma} outside [0, 1)")));
    }
    let mut points = Vec::new();
    for (n, traj) in trajectories.iter().enumerate() {
        let mut acc = 0.0;
        let mut returns = vec![0.0; traj.len()];
        for (t, step) in traj.iter().enumerate().rev() {
            acc = step.reward + gamma * acc;
            returns[t] = acc;
        }
        for (t, (step, ret)) in traj.iter().zip(returns).enumerate() {
            points.push(IndexedPoint { state: step.state.clone(), action: step.action, ret, trajectory: n, time: t });
        }
    }
    NeighborIndex::from_points(points, num_actions, metric_weights, radius)
}

impl NeighborIndex {
    pub fn from_points(
        points: Vec<IndexedPoint>,
        num_actions: usize,
        metric_weights: Vec<f64>,
        radius: f64,
    ) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(config_err("radius must be positive"));
        }
        if num_actions == 0 {
            return Err(config_err("need at least one action"));
        }
        let dim = metric_weights.len();
        if dim == 0 {
            return Err(config_err("metric weights must be non-empty"));
        }
        if metric_weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(config_err("metric weights must be finite and nonnegative"));
        }
        let mut flat = Vec::with_capacity(points.len() * dim);
        for p in &points {
            if p.state.len() != dim {
                return Err(config_err(format!(
                    "state of dimension {} does not match {dim} metric weights",
                    p.state.len()
                )));
            }
            if p.action >= num_actions {
                return Err(Error::OutOfRange { what: "action", index: p.action, limit: num_actions });
            }
            flat.extend_from_slice(&p.state);
        }
        let tree = BallTree::new(flat, dim, metric_weights.clone());
        Ok(Self { points, metric_weights, radius, num_actions, tree })
    }

    pub fn from_snapshot(snapshot: IndexSnapshot) -> Result<Self> {
        Self::from_points(snapshot.points, snapshot.num_actions, snapshot.metric_weights, snapshot.radius)
    }

    pub fn snapshot(&self) -> IndexSnapshot {
        IndexSnapshot {
            metric_weights: self.metric_weights.clone(),
            radius: self.radius,
            num_actions: self.num_actions,
            points: self.points.clone(),
        }
    }

    pub fn points(&self) -> &[IndexedPoint] {
        &self.points
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn metric_weights(&self) -> &[f64] {
        &self.metric_weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Indices of stored points within the radius of `state`, any action.
    pub fn state_neighbors(&self, state: &[f64]) -> Vec<usize> {
        self.tree.within(state, self.radius)
    }

    /// Indices of stored points within the radius of `state` that took `action`.
    pub fn pair_neighbors(&self, state: &[f64], action: usize) -> Vec<usize> {
        let mut hits = self.state_neighbors(state);
        hits.retain(|&i| self.points[i].action == action);
        hits
    }

    fn within(&self, a: &[f64], b: &[f64]) -> bool {
        weighted_sq_dist(&self.metric_weights, a, b) <= self.radius * self.radius
    }
}

/// Keeps the earliest point of each trajectory.
fn first_per_trajectory(points: &[IndexedPoint], hits: &[usize]) -> Vec<usize> {
    let mut best: std::collections::BTreeMap<usize, usize> = std::collections::BTreeMap::new();
    for &i in hits {
        let p = &points[i];
        best.entry(p.trajectory)
            .and_modify(|j| {
                if points[*j].time > p.time {
                    *j = i;
                }
            })
            .or_insert(i);
    }
    let mut out: Vec<usize> = best.into_values().collect();
    out.sort_unstable();
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuousVerdict {
    pub decision: Verdict,
    pub q_estimates: Vec<Option<f64>>,
    pub v_estimate: Option<f64>,
    pub action_counts: Vec<usize>,
    pub state_count: usize,
    /// Actions passing `n(s,a) >= n_wedge && q(s,a) >= v(s)`, ascending;
    /// computed even when the state-level count forces a deferral.
    pub advantageous: Vec<usize>,
}

fn mean_return(points: &[IndexedPoint], hits: &[usize]) -> Option<f64> {
    (!hits.is_empty()).then(|| hits.iter().map(|&i| points[i].ret).sum::<f64>() / hits.len() as f64)
}

/// Deferral decision for one query state.
///
/// Defers when `n(s) <= n_wedge` or when no action is advantageous;
/// otherwise returns the advantageous action with the largest `Q` estimate
/// (lowest index on ties).
pub fn query(index: &NeighborIndex, state: &[f64], n_wedge: u64, mode: NeighborMode) -> Result<ContinuousVerdict> {
    if n_wedge == 0 {
        return Err(config_err("n_wedge must be at least 1"));
    }
    if state.len() != index.metric_weights.len() {
        return Err(config_err("query state has the wrong dimension"));
    }
    let hits = index.state_neighbors(state);
    let state_hits = match mode {
        NeighborMode::All => hits.clone(),
        NeighborMode::FirstPerTrajectory => first_per_trajectory(&index.points, &hits),
    };
    let v_estimate = mean_return(&index.points, &state_hits);
    let mut q_estimates = vec![None; index.num_actions];
    let mut action_counts = vec![0; index.num_actions];
    for a in 0..index.num_actions {
        let pair_hits: Vec<usize> = hits.iter().copied().filter(|&i| index.points[i].action == a).collect();
        let pair_hits = match mode {
            NeighborMode::All => pair_hits,
            NeighborMode::FirstPerTrajectory => first_per_trajectory(&index.points, &pair_hits),
        };
        action_counts[a] = pair_hits.len();
        q_estimates[a] = mean_return(&index.points, &pair_hits);
    }
    let advantageous: Vec<usize> = match v_estimate {
        Some(v) => (0..index.num_actions)
            .filter(|&a| action_counts[a] as u64 >= n_wedge && q_estimates[a].is_some_and(|q| q >= v))
            .collect(),
        None => Vec::new(),
    };
    let state_count = state_hits.len();
    let decision = if state_count as u64 <= n_wedge || advantageous.is_empty() {
        Verdict::Defer
    } else {
        let mut best = advantageous[0];
        for &a in &advantageous[1..] {
            if q_estimates[a] > q_estimates[best] {
                best = a;
            }
        }
        Verdict::Act(best)
    };
    Ok(ContinuousVerdict { decision, q_estimates, v_estimate, action_counts, state_count, advantageous })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverEstimate {
    /// Balls covering the dense (core) points.
    pub m_dense: usize,
    /// Balls covering every stored point.
    pub m_total: usize,
}

/// Greedy leader cover of `candidates` (in the given order) in state-action
/// space; returns the chosen centers.
fn greedy_cover(index: &NeighborIndex, candidates: &[usize]) -> Vec<usize> {
    let mut centers: Vec<usize> = Vec::new();
    for &i in candidates {
        let p = &index.points[i];
        let covered = centers.iter().any(|&c| {
            let q = &index.points[c];
            q.action == p.action && index.within(&q.state, &p.state)
        });
        if !covered {
            centers.push(i);
        }
    }
    centers
}

/// Covering-number estimate over state-action space.
///
/// Core points are stored points with at least `n_wedge` same-action points
/// (themselves included) within the radius. `m_total` is the size of a greedy
/// radius-`r` cover of all points. `m_dense` is the smaller of a greedy cover
/// of the core points and the number of `m_total` balls touching a core
/// point, so `m_dense <= m_total` always holds.
pub fn estimate_covering_number(index: &NeighborIndex, n_wedge: u64) -> Result<CoverEstimate> {
    if index.is_empty() {
        return Err(Error::Empty("neighbor index"));
    }
    let all: Vec<usize> = (0..index.len()).collect();
    let core: Vec<usize> = all
        .iter()
        .copied()
        .filter(|&i| {
            let p = &index.points[i];
            index.pair_neighbors(&p.state, p.action).len() as u64 >= n_wedge
        })
        .collect();
    let total_centers = greedy_cover(index, &all);
    let touching = total_centers
        .iter()
        .filter(|&&c| {
            let q = &index.points[c];
            core.iter().any(|&i| {
                let p = &index.points[i];
                p.action == q.action && index.within(&q.state, &p.state)
            })
        })
        .count();
    let m_dense = greedy_cover(index, &core).len().min(touching);
    Ok(CoverEstimate { m_dense, m_total: total_centers.len() })
}
