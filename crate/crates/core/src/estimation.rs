//! Visit counts and Monte-Carlo estimates of the behavior policy's values.
//!
//! First-visit estimates average, per trajectory, the discounted return from
//! the first time a state is seen (for `V`) or the first time an action is
//! taken in that state (for `Q`). Every-visit estimates average over all
//! occurrences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::TrajectoryDataset;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisitMode {
    #[default]
    FirstVisit,
    EveryVisit,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountTable {
    pub num_states: usize,
    pub num_actions: usize,
    pub mode: VisitMode,
    n_sa: Vec<u64>,
    n_s: Vec<u64>,
}

impl CountTable {
    /// Builds a table directly from pair counts; state counts are their row sums.
    pub fn from_pair_counts(num_states: usize, num_actions: usize, mode: VisitMode, n_sa: Vec<u64>) -> Self {
        assert_eq!(n_sa.len(), num_states * num_actions);
        let n_s = n_sa.chunks(num_actions).map(|row| row.iter().sum()).collect();
        Self { num_states, num_actions, mode, n_sa, n_s }
    }

    pub fn pair(&self, state: usize, action: usize) -> u64 {
        self.n_sa[state * self.num_actions + action]
    }

    /// Sum of the pair counts of `state` under this table's mode.
    pub fn state(&self, state: usize) -> u64 {
        self.n_s[state]
    }

    pub fn pairs(&self) -> &[u64] {
        &self.n_sa
    }
}

/// Counts `(state, action)` occurrences. In first-visit mode a pair counts at
/// most once per trajectory.
pub fn count_visits(
    dataset: &TrajectoryDataset,
    num_states: usize,
    num_actions: usize,
    mode: VisitMode,
) -> Result<CountTable> {
    if dataset.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    dataset.validate(num_states, num_actions)?;
    let mut n_sa = vec![0u64; num_states * num_actions];
    let mut seen = vec![usize::MAX; num_states * num_actions];
    for (n, traj) in dataset.trajectories.iter().enumerate() {
        for step in &traj.steps {
            let idx = step.state * num_actions + step.action;
            if mode == VisitMode::FirstVisit {
                if seen[idx] == n {
                    continue;
                }
                seen[idx] = n;
            }
            n_sa[idx] += 1;
        }
    }
    Ok(CountTable::from_pair_counts(num_states, num_actions, mode, n_sa))
}

/// Behavior value estimates; entries without data are flagged, never zeroed
/// into the average.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueEstimates {
    pub num_states: usize,
    pub num_actions: usize,
    pub mode: VisitMode,
    v_hat: Vec<f64>,
    q_hat: Vec<f64>,
    state_support: Vec<bool>,
    support_mask: Vec<bool>,
}

impl ValueEstimates {
    pub fn v(&self, state: usize) -> Option<f64> {
        self.state_support[state].then(|| self.v_hat[state])
    }

    pub fn q(&self, state: usize, action: usize) -> Option<f64> {
        let i = state * self.num_actions + action;
        self.support_mask[i].then(|| self.q_hat[i])
    }

    pub fn support_mask(&self) -> &[bool] {
        &self.support_mask
    }

    /// States with a defined value estimate.
    pub fn observed_states(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_states).filter(|&s| self.state_support[s])
    }
}

/// First-visit Monte-Carlo estimates of `V` and `Q` under the behavior policy.
pub fn mc_first_visit_estimates(
    dataset: &TrajectoryDataset,
    num_states: usize,
    num_actions: usize,
    gamma: f64,
) -> Result<ValueEstimates> {
    mc_estimates(dataset, num_states, num_actions, gamma, VisitMode::FirstVisit)
}

pub fn mc_estimates(
    dataset: &TrajectoryDataset,
    num_states: usize,
    num_actions: usize,
    gamma: f64,
    mode: VisitMode,
) -> Result<ValueEstimates> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::Config(format!("discount {gamma} outside [0, 1)")));
    }
    dataset.validate(num_states, num_actions)?;
    let mut v_sum = vec![0.0; num_states];
    let mut v_n = vec![0u64; num_states];
    let mut q_sum = vec![0.0; num_states * num_actions];
    let mut q_n = vec![0u64; num_states * num_actions];
    let mut seen_s = vec![usize::MAX; num_states];
    let mut seen_sa = vec![usize::MAX; num_states * num_actions];
    for (n, traj) in dataset.trajectories.iter().enumerate() {
        let returns = traj.suffix_returns(gamma);
        for (step, &g) in traj.steps.iter().zip(&returns) {
            let s = step.state;
            let sa = s * num_actions + step.action;
            let first_s = seen_s[s] != n;
            let first_sa = seen_sa[sa] != n;
            seen_s[s] = n;
            seen_sa[sa] = n;
            if mode == VisitMode::EveryVisit || first_s {
                v_sum[s] += g;
                v_n[s] += 1;
            }
            if mode == VisitMode::EveryVisit || first_sa {
                q_sum[sa] += g;
                q_n[sa] += 1;
            }
        }
    }
    let mean = |sum: &[f64], n: &[u64]| -> Vec<f64> {
        sum.iter().zip(n).map(|(&x, &k)| if k > 0 { x / k as f64 } else { 0.0 }).collect()
    };
    Ok(ValueEstimates {
        num_states,
        num_actions,
        mode,
        v_hat: mean(&v_sum, &v_n),
        q_hat: mean(&q_sum, &q_n),
        state_support: v_n.iter().map(|&k| k > 0).collect(),
        support_mask: q_n.iter().map(|&k| k > 0).collect(),
    })
}
