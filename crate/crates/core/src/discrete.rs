//! Decision-point RL for discrete states.
//!
//! 1. [`identify_decision_points`] keeps, per state, the actions seen at least
//!    `n_wedge` times whose estimated `Q` is at least the estimated `V`.
//! 2. [`make_smdp`] builds a semi-MDP whose states are the decision points,
//!    with per-transition effective discounts.
//! 3. [`smdp_policy_iteration`] optimises over policies restricted to the
//!    advantageous actions; every other state defers to the behavior policy.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::estimation::{count_visits, mc_first_visit_estimates, CountTable, ValueEstimates, VisitMode};
use crate::linalg::solve_dense;
use crate::mdp::TrajectoryDataset;
use crate::policy::Verdict;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionPointSets {
    pub n_wedge: u64,
    pub num_states: usize,
    pub num_actions: usize,
    /// Advantageous actions per state, ascending.
    pub advantageous: Vec<Vec<usize>>,
    pub decision_states: Vec<usize>,
    /// Observed states without an advantageous action.
    pub defer_states: Vec<usize>,
}

impl DecisionPointSets {
    pub fn is_decision_point(&self, state: usize) -> bool {
        self.advantageous.get(state).is_some_and(|a| !a.is_empty())
    }
}

/// Applies the advantage gate `n(s,a) >= n_wedge && q(s,a) >= v(s)`. Ties
/// between `q` and `v` pass.
pub fn identify_decision_points(
    counts: &CountTable,
    estimates: &ValueEstimates,
    n_wedge: u64,
) -> Result<DecisionPointSets> {
    if n_wedge == 0 {
        return Err(config_err("n_wedge must be at least 1"));
    }
    if counts.num_states != estimates.num_states || counts.num_actions != estimates.num_actions {
        return Err(config_err("counts and estimates disagree on dimensions"));
    }
    let (ns, na) = (counts.num_states, counts.num_actions);
    let mut advantageous = vec![Vec::new(); ns];
    let mut decision_states = Vec::new();
    let mut defer_states = Vec::new();
    for (s, adv) in advantageous.iter_mut().enumerate() {
        let Some(v) = estimates.v(s) else { continue };
        for a in 0..na {
            if counts.pair(s, a) < n_wedge {
                continue;
            }
            if let Some(q) = estimates.q(s, a) {
                if q >= v {
                    adv.push(a);
                }
            }
        }
        if adv.is_empty() {
            defer_states.push(s);
        } else {
            decision_states.push(s);
        }
    }
    Ok(DecisionPointSets { n_wedge, num_states: ns, num_actions: na, advantageous, decision_states, defer_states })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailMode {
    /// Discard reward collected after a trajectory's last decision point.
    Drop,
    /// Route it into a zero-value absorbing state.
    #[default]
    Absorb,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmdpNext {
    DecisionPoint(usize),
    Absorbing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmdpTransition {
    pub next: SmdpNext,
    pub count: u64,
    pub probability: f64,
    /// Mean of `gamma^k` over the segments, `k` the steps taken.
    pub discount: f64,
    /// Mean discounted reward collected along the segments.
    pub reward: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmdpRow {
    pub transitions: Vec<SmdpTransition>,
    pub expected_reward: f64,
}

impl SmdpRow {
    pub fn total_count(&self) -> u64 {
        self.transitions.iter().map(|t| t.count).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmdpModel {
    pub states: Vec<usize>,
    pub tail_mode: TailMode,
    pub rows: BTreeMap<(usize, usize), SmdpRow>,
}

impl SmdpModel {
    pub fn row(&self, state: usize, action: usize) -> Option<&SmdpRow> {
        self.rows.get(&(state, action))
    }
}

#[derive(Default)]
struct SegmentStats {
    count: u64,
    discount_sum: f64,
    reward_sum: f64,
}

/// Estimates the semi-MDP over decision points.
///
/// For every trajectory the first visit time of each decision point is
/// recorded; each pair of consecutive first visits `(t, t')` is one segment
/// keyed by `(S_t, A_t, S_t')`, contributing `gamma^(t'-t)` to the discount
/// sum and `sum_{k=t}^{t'-1} gamma^(k-t) R_k` to the reward sum.
pub fn make_smdp(
    dataset: &TrajectoryDataset,
    dp: &DecisionPointSets,
    gamma: f64,
    tail_mode: TailMode,
) -> Result<SmdpModel> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(config_err(format!("discount {gamma} outside [0, 1)")));
    }
    dataset.validate(dp.num_states, dp.num_actions)?;
    let mut stats: BTreeMap<(usize, usize, SmdpNext), SegmentStats> = BTreeMap::new();
    let mut first_seen = vec![usize::MAX; dp.num_states];
    for (n, traj) in dataset.trajectories.iter().enumerate() {
        let mut visits = Vec::new();
        for (t, step) in traj.steps.iter().enumerate() {
            if dp.is_decision_point(step.state) && first_seen[step.state] != n {
                first_seen[step.state] = n;
                visits.push(t);
            }
        }
        let mut segment = |from: usize, to: usize, next: SmdpNext| {
            let step = traj.steps[from];
            let reward: f64 =
                traj.steps[from..to].iter().enumerate().map(|(k, s)| gamma.powi(k as i32) * s.reward).sum();
            let entry = stats.entry((step.state, step.action, next)).or_default();
            entry.count += 1;
            entry.discount_sum += gamma.powi((to - from) as i32);
            entry.reward_sum += reward;
        };
        for pair in visits.windows(2) {
            let (t, t_next) = (pair[0], pair[1]);
            segment(t, t_next, SmdpNext::DecisionPoint(traj.steps[t_next].state));
        }
        if tail_mode == TailMode::Absorb {
            if let Some(&last) = visits.last() {
                segment(last, traj.steps.len(), SmdpNext::Absorbing);
            }
        }
    }

    let mut rows: BTreeMap<(usize, usize), SmdpRow> = BTreeMap::new();
    for ((s, a, next), st) in stats {
        let n = st.count as f64;
        rows.entry((s, a))
            .or_insert_with(|| SmdpRow { transitions: Vec::new(), expected_reward: 0.0 })
            .transitions
            .push(SmdpTransition {
                next,
                count: st.count,
                probability: 0.0,
                discount: st.discount_sum / n,
                reward: st.reward_sum / n,
            });
    }
    for row in rows.values_mut() {
        let total = row.total_count() as f64;
        for t in &mut row.transitions {
            t.probability = t.count as f64 / total;
        }
        row.expected_reward = row.transitions.iter().map(|t| t.reward * t.probability).sum();
    }
    Ok(SmdpModel { states: dp.decision_states.clone(), tail_mode, rows })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionPointPolicy {
    pub n_wedge: u64,
    pub num_actions: usize,
    verdicts: Vec<Verdict>,
    pub decision_states: Vec<usize>,
    pub iterations: usize,
}

impl DecisionPointPolicy {
    pub fn from_parts(
        n_wedge: u64,
        num_actions: usize,
        verdicts: Vec<Verdict>,
        decision_states: Vec<usize>,
        iterations: usize,
    ) -> Self {
        Self { n_wedge, num_actions, verdicts, decision_states, iterations }
    }

    /// Policy that defers in every state.
    pub fn defer_everywhere(num_states: usize, num_actions: usize, n_wedge: u64) -> Self {
        Self::from_parts(n_wedge, num_actions, vec![Verdict::Defer; num_states], Vec::new(), 0)
    }

    pub fn num_states(&self) -> usize {
        self.verdicts.len()
    }

    pub fn verdicts(&self) -> &[Verdict] {
        &self.verdicts
    }

    /// Verdict for `state`; states outside the table defer.
    pub fn act(&self, state: usize) -> Verdict {
        self.verdicts.get(state).copied().unwrap_or(Verdict::Defer)
    }

    pub fn defer_count(&self) -> usize {
        self.verdicts.iter().filter(|v| v.is_defer()).count()
    }
}

/// Free-standing form of [`DecisionPointPolicy::act`].
pub fn act(policy: &DecisionPointPolicy, state: usize) -> Verdict {
    policy.act(state)
}

/// Iterates visited during policy iteration, for auditing.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IterationTrace {
    /// Action per decision point (ordered as `model.states`) for each evaluated policy.
    pub policies: Vec<Vec<usize>>,
    pub values: Vec<Vec<f64>>,
}

/// Exact evaluation and greedy improvement on the decision-point SMDP.
pub struct SmdpSolver<'a> {
    model: &'a SmdpModel,
    dp: &'a DecisionPointSets,
    estimates: &'a ValueEstimates,
    position: BTreeMap<usize, usize>,
}

impl<'a> SmdpSolver<'a> {
    pub fn new(model: &'a SmdpModel, dp: &'a DecisionPointSets, estimates: &'a ValueEstimates) -> Result<Self> {
        let position: BTreeMap<usize, usize> = model.states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        for &s in &model.states {
            if !dp.is_decision_point(s) {
                return Err(config_err(format!("SMDP state {s} is not a decision point")));
            }
            for &a in &dp.advantageous[s] {
                if model.row(s, a).is_none() && estimates.q(s, a).is_none() {
                    return Err(config_err(format!("no model row or estimate for ({s}, {a})")));
                }
            }
        }
        Ok(Self { model, dp, estimates, position })
    }

    pub fn states(&self) -> &[usize] {
        &self.model.states
    }

    /// One-step lookahead value of `(state, action)` given decision-point values.
    /// Pairs without a model row fall back to their `Q` estimate.
    pub fn action_value(&self, state: usize, action: usize, values: &[f64]) -> f64 {
        match self.model.row(state, action) {
            Some(row) => {
                row.expected_reward
                    + row
                        .transitions
                        .iter()
                        .map(|t| match t.next {
                            SmdpNext::DecisionPoint(j) => {
                                t.probability * t.discount * self.position.get(&j).map_or(0.0, |&i| values[i])
                            }
                            SmdpNext::Absorbing => 0.0,
                        })
                        .sum::<f64>()
            }
            None => self.estimates.q(state, action).unwrap_or(0.0),
        }
    }

    /// Solves `V = R~ + sum P~ gamma~ V` for a fixed policy.
    pub fn evaluate(&self, policy: &[usize]) -> Result<Vec<f64>> {
        let m = self.model.states.len();
        let mut matrix = vec![0.0; m * m];
        let mut rhs = vec![0.0; m];
        for (i, &s) in self.model.states.iter().enumerate() {
            matrix[i * m + i] = 1.0;
            let a = policy[i];
            match self.model.row(s, a) {
                Some(row) => {
                    rhs[i] = row.expected_reward;
                    for t in &row.transitions {
                        if let SmdpNext::DecisionPoint(j) = t.next {
                            if let Some(&col) = self.position.get(&j) {
                                matrix[i * m + col] -= t.probability * t.discount;
                            }
                        }
                    }
                }
                None => rhs[i] = self.estimates.q(s, a).unwrap_or(0.0),
            }
        }
        solve_dense(matrix, rhs).map_err(|e| match e {
            Error::Singular { state } => Error::Singular { state: self.model.states[state] },
            other => other,
        })
    }

    /// Greedy improvement over the advantageous actions; lowest index on ties.
    pub fn improve(&self, values: &[f64]) -> Vec<usize> {
        self.model
            .states
            .iter()
            .map(|&s| {
                let mut best = None::<(usize, f64)>;
                for &a in &self.dp.advantageous[s] {
                    let q = self.action_value(s, a, values);
                    if best.is_none_or(|(_, b)| q > b) {
                        best = Some((a, q));
                    }
                }
                best.map(|(a, _)| a).expect("decision points have advantageous actions")
            })
            .collect()
    }

    /// Argmax of the `Q` estimate over advantageous actions; lowest index on ties.
    pub fn initial_policy(&self) -> Vec<usize> {
        self.model
            .states
            .iter()
            .map(|&s| {
                let mut best = None::<(usize, f64)>;
                for &a in &self.dp.advantageous[s] {
                    let q = self.estimates.q(s, a).unwrap_or(f64::NEG_INFINITY);
                    if best.is_none_or(|(_, b)| q > b) {
                        best = Some((a, q));
                    }
                }
                best.map(|(a, _)| a).expect("decision points have advantageous actions")
            })
            .collect()
    }
}

/// Policy iteration on the SMDP, started from the `Q`-estimate argmax and
/// `V^(1) = V_hat`. Stops once the sup-norm change between successive value
/// vectors is at most `tol` or the greedy policy is stable.
pub fn smdp_policy_iteration(
    model: &SmdpModel,
    dp: &DecisionPointSets,
    estimates: &ValueEstimates,
    tol: f64,
) -> Result<DecisionPointPolicy> {
    smdp_policy_iteration_traced(model, dp, estimates, tol).map(|(p, _)| p)
}

const MAX_POLICY_ITERATIONS: usize = 100_000;

pub fn smdp_policy_iteration_traced(
    model: &SmdpModel,
    dp: &DecisionPointSets,
    estimates: &ValueEstimates,
    tol: f64,
) -> Result<(DecisionPointPolicy, IterationTrace)> {
    if !(tol > 0.0) {
        return Err(config_err("tolerance must be positive"));
    }
    let solver = SmdpSolver::new(model, dp, estimates)?;
    let mut trace = IterationTrace::default();
    let mut policy = solver.initial_policy();
    let mut previous: Vec<f64> = model.states.iter().map(|&s| estimates.v(s).unwrap_or(0.0)).collect();
    let mut iterations = 0;
    loop {
        let values = solver.evaluate(&policy)?;
        iterations += 1;
        let improved = solver.improve(&values);
        let delta = values.iter().zip(&previous).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        trace.policies.push(policy.clone());
        trace.values.push(values.clone());
        let stable = improved == policy;
        policy = improved;
        if stable || delta <= tol || iterations >= MAX_POLICY_ITERATIONS {
            break;
        }
        previous = values;
    }
    let mut verdicts = vec![Verdict::Defer; dp.num_states];
    for (&s, &a) in model.states.iter().zip(&policy) {
        verdicts[s] = Verdict::Act(a);
    }
    let policy =
        DecisionPointPolicy::from_parts(dp.n_wedge, dp.num_actions, verdicts, model.states.clone(), iterations);
    Ok((policy, trace))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DprlParams {
    pub n_wedge: u64,
    pub tail_mode: TailMode,
    pub tol: f64,
    pub count_mode: VisitMode,
}

impl Default for DprlParams {
    fn default() -> Self {
        Self { n_wedge: 20, tail_mode: TailMode::Absorb, tol: 1e-8, count_mode: VisitMode::FirstVisit }
    }
}

/// Everything produced by one DPRL-D training run.
#[derive(Clone, Debug)]
pub struct DprlOutcome {
    pub policy: DecisionPointPolicy,
    pub counts: CountTable,
    pub estimates: ValueEstimates,
    pub sets: DecisionPointSets,
    pub model: SmdpModel,
}

/// Full DPRL-D pipeline on a dataset.
pub fn train_dprl(
    dataset: &TrajectoryDataset,
    num_states: usize,
    num_actions: usize,
    gamma: f64,
    params: &DprlParams,
) -> Result<DprlOutcome> {
    let counts = count_visits(dataset, num_states, num_actions, params.count_mode)?;
    let estimates = match params.count_mode {
        VisitMode::FirstVisit => mc_first_visit_estimates(dataset, num_states, num_actions, gamma)?,
        VisitMode::EveryVisit => {
            crate::estimation::mc_estimates(dataset, num_states, num_actions, gamma, VisitMode::EveryVisit)?
        }
    };
    let sets = identify_decision_points(&counts, &estimates, params.n_wedge)?;
    let model = make_smdp(dataset, &sets, gamma, params.tail_mode)?;
    let policy = smdp_policy_iteration(&model, &sets, &estimates, params.tol)?;
    Ok(DprlOutcome { policy, counts, estimates, sets, model })
}
