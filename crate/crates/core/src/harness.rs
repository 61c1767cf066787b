//! Deferral-aware evaluation on the true MDP and seeded reliability
//! experiments.
//!
//! A learned policy is always evaluated together with the true behavior
//! policy: wherever it defers, the behavior's action distribution is used.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{estimate_behavior, train_behavior_clone, train_pqi, train_spibb, BehaviorSource, MleModel};
use crate::bounds::{count_c_n_wedge, dprl_discrete_bound, BoundInputs, DiscreteForm};
use crate::discrete::{train_dprl, DprlParams, TailMode};
use crate::error::{config_err, Error, Result};
use crate::estimation::VisitMode;
use crate::linalg::solve_dense;
use crate::mdp::{
    build_cql_mdp, build_forest_mdp, build_gridworld, simulate, BehaviorPolicy, CqlConfig, Environment, ForestConfig,
    GridworldConfig, TabularMdp, TrajectoryDataset,
};
use crate::policy::{LearnedPolicy, Verdict};
use crate::rng::{derive_seed, rng_from_seed};

/// A learned policy (or none) composed with the behavior it defers to.
#[derive(Clone, Copy, Debug)]
pub struct MixedPolicy<'a> {
    pub learned: Option<&'a LearnedPolicy>,
    pub behavior: &'a BehaviorPolicy,
}

impl<'a> MixedPolicy<'a> {
    pub fn new(learned: &'a LearnedPolicy, behavior: &'a BehaviorPolicy) -> Self {
        Self { learned: Some(learned), behavior }
    }

    pub fn behavior(behavior: &'a BehaviorPolicy) -> Self {
        Self { learned: None, behavior }
    }

    /// Effective action distribution at `state`.
    pub fn row(&self, state: usize) -> Vec<f64> {
        match self.learned {
            Some(LearnedPolicy::DecisionPoint(p)) => match p.act(state) {
                Verdict::Defer => self.behavior.row(state).to_vec(),
                Verdict::Act(a) => {
                    let mut row = vec![0.0; self.behavior.num_actions];
                    row[a] = 1.0;
                    row
                }
            },
            Some(LearnedPolicy::Baseline(b)) if state < b.num_states => b.row(state).to_vec(),
            _ => self.behavior.row(state).to_vec(),
        }
    }
}

fn check_shapes(mdp: &TabularMdp, policy: &MixedPolicy<'_>) -> Result<()> {
    if policy.behavior.num_states != mdp.num_states || policy.behavior.num_actions != mdp.num_actions {
        return Err(config_err("behavior policy does not match the MDP"));
    }
    Ok(())
}

/// Value of every state under `policy` on the true MDP; terminals are 0.
pub fn exact_values(mdp: &TabularMdp, policy: &MixedPolicy<'_>) -> Result<Vec<f64>> {
    check_shapes(mdp, policy)?;
    let ns = mdp.num_states;
    let mut matrix = vec![0.0; ns * ns];
    let mut rhs = vec![0.0; ns];
    for s in 0..ns {
        matrix[s * ns + s] = 1.0;
        if mdp.is_terminal(s) {
            continue;
        }
        for (a, p) in policy.row(s).into_iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            rhs[s] += p * mdp.expected_reward(s, a);
            for (next, &q) in mdp.transition_row(s, a).iter().enumerate() {
                if q > 0.0 {
                    matrix[s * ns + next] -= mdp.gamma * p * q;
                }
            }
        }
    }
    solve_dense(matrix, rhs)
}

/// `rho(policy)`: the exact value of the start state.
pub fn exact_value(mdp: &TabularMdp, policy: &MixedPolicy<'_>) -> Result<f64> {
    Ok(exact_values(mdp, policy)?[mdp.start_state])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub rollouts: usize,
}

/// Monte-Carlo estimate of `rho(policy)`. Rollouts stop at a terminal or
/// once `gamma^t * V_max` falls below `1e-12`.
pub fn mc_value(mdp: &TabularMdp, policy: &MixedPolicy<'_>, rollouts: usize, seed: u64) -> Result<McEstimate> {
    check_shapes(mdp, policy)?;
    if rollouts == 0 {
        return Err(config_err("at least one rollout is required"));
    }
    let horizon = if mdp.gamma == 0.0 {
        1
    } else {
        let v_max = mdp.v_max().max(1e-300);
        ((1e-12 / v_max).ln() / mdp.gamma.ln()).ceil().max(1.0) as usize
    };
    let rows: Vec<Vec<f64>> = (0..mdp.num_states).map(|s| policy.row(s)).collect();
    let returns: Vec<f64> = (0..rollouts)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from_seed(derive_seed(seed, i as u64));
            let (mut state, mut ret, mut disc) = (mdp.start_state, 0.0, 1.0);
            for _ in 0..horizon {
                if mdp.is_terminal(state) {
                    break;
                }
                let action = sample(&rows[state], &mut rng);
                let (next, reward) = mdp.step(state, action, &mut rng);
                ret += disc * reward;
                disc *= mdp.gamma;
                state = next;
            }
            ret
        })
        .collect();
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = if returns.len() > 1 { returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    Ok(McEstimate { mean, std_err: (var / n).sqrt(), rollouts })
}

fn sample<R: rand::Rng>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in row.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Mean of the `ceil(alpha * len)` smallest values (stable sort).
pub fn cvar(values: &[f64], alpha: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("values"));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(config_err(format!("alpha {alpha} outside (0, 1]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = ((alpha * values.len() as f64).ceil() as usize).clamp(1, values.len());
    Ok(sorted[..k].iter().sum::<f64>() / k as f64)
}

fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties. A constant
/// series has no ordering information, so the result is 0.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(config_err("series lengths differ"));
    }
    if x.len() < 2 {
        return Err(Error::Empty("series"));
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return Ok(0.0);
    }
    Ok(cov / (vx * vy).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case")]
pub enum EnvironmentConfig {
    Forest(ForestConfig),
    Cql(CqlConfig),
    Gridworld(GridworldConfig),
}

impl EnvironmentConfig {
    pub fn build(&self) -> Result<Environment> {
        match self {
            EnvironmentConfig::Forest(c) => build_forest_mdp(c),
            EnvironmentConfig::Cql(c) => build_cql_mdp(c),
            EnvironmentConfig::Gridworld(c) => build_gridworld(c),
        }
    }

    /// Episode cap: forest and CQL episodes end on their own.
    pub fn default_horizon(&self) -> usize {
        match self {
            EnvironmentConfig::Forest(c) => c.depth + 1,
            EnvironmentConfig::Cql(_) => 1,
            EnvironmentConfig::Gridworld(_) => 100,
        }
    }
}

fn default_tol() -> f64 {
    1e-8
}

/// One learner in an experiment. `n_wedge = 18446744073709551615` (u64 max)
/// acts as an infinite threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlgorithmSpec {
    Dprl {
        n_wedge: u64,
        #[serde(default)]
        tail_mode: TailMode,
        #[serde(default)]
        count_mode: VisitMode,
        #[serde(default = "default_tol")]
        tol: f64,
    },
    Spibb {
        n_wedge: u64,
        behavior: BehaviorSource,
    },
    Pqi {
        b: f64,
    },
    BehaviorClone,
    Behavior,
}

impl AlgorithmSpec {
    pub fn dprl(n_wedge: u64) -> Self {
        AlgorithmSpec::Dprl { n_wedge, tail_mode: TailMode::default(), count_mode: VisitMode::default(), tol: 1e-8 }
    }

    pub fn label(&self) -> String {
        fn n(v: u64) -> String {
            if v == u64::MAX {
                "inf".into()
            } else {
                v.to_string()
            }
        }
        match self {
            AlgorithmSpec::Dprl { n_wedge, .. } => format!("dprl[n_wedge={}]", n(*n_wedge)),
            AlgorithmSpec::Spibb { n_wedge, behavior } => {
                let src = match behavior {
                    BehaviorSource::True => "true",
                    BehaviorSource::Estimated => "estimated",
                };
                format!("spibb[n_wedge={},behavior={src}]", n(*n_wedge))
            }
            AlgorithmSpec::Pqi { b } => format!("pqi[b={b}]"),
            AlgorithmSpec::BehaviorClone => "behavior_clone".into(),
            AlgorithmSpec::Behavior => "behavior".into(),
        }
    }
}

/// Output of one training run, with DPRL's diagnostics when applicable.
#[derive(Clone, Debug)]
pub struct Trained {
    pub policy: Option<LearnedPolicy>,
    pub defer_fraction: Option<f64>,
    pub c_n_wedge: Option<u64>,
    pub iterations: Option<usize>,
}

/// Trains `spec` on `dataset`. `Behavior` yields no learned policy.
pub fn train(spec: &AlgorithmSpec, env: &Environment, dataset: &TrajectoryDataset) -> Result<Trained> {
    let (ns, na, gamma) = (env.mdp.num_states, env.mdp.num_actions, env.mdp.gamma);
    let plain = |policy| Trained { policy: Some(policy), defer_fraction: None, c_n_wedge: None, iterations: None };
    match spec {
        AlgorithmSpec::Dprl { n_wedge, tail_mode, count_mode, tol } => {
            let params = DprlParams { n_wedge: *n_wedge, tail_mode: *tail_mode, tol: *tol, count_mode: *count_mode };
            let out = train_dprl(dataset, ns, na, gamma, &params)?;
            let observed: Vec<usize> = out.estimates.observed_states().collect();
            let iterations = out.policy.iterations;
            let policy = LearnedPolicy::DecisionPoint(out.policy);
            Ok(Trained {
                defer_fraction: Some(policy.defer_fraction(&observed)),
                c_n_wedge: Some(count_c_n_wedge(&out.counts, *n_wedge)),
                iterations: Some(iterations),
                policy: Some(policy),
            })
        }
        AlgorithmSpec::Spibb { n_wedge, behavior } => {
            let model = MleModel::fit(dataset, ns, na, gamma)?;
            let base = match behavior {
                BehaviorSource::True => env.behavior.probs().to_vec(),
                BehaviorSource::Estimated => estimate_behavior(dataset, ns, na)?,
            };
            Ok(plain(LearnedPolicy::Baseline(train_spibb(&model, &base, *behavior, *n_wedge)?)))
        }
        AlgorithmSpec::Pqi { b } => {
            let model = MleModel::fit(dataset, ns, na, gamma)?;
            Ok(plain(LearnedPolicy::Baseline(train_pqi(&model, *b)?)))
        }
        AlgorithmSpec::BehaviorClone => Ok(plain(LearnedPolicy::Baseline(train_behavior_clone(dataset, ns, na)?))),
        AlgorithmSpec::Behavior => {
            Ok(Trained { policy: None, defer_fraction: None, c_n_wedge: None, iterations: None })
        }
    }
}

fn default_delta() -> f64 {
    0.05
}

fn default_alpha() -> f64 {
    0.05
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: EnvironmentConfig,
    pub num_trajectories: usize,
    #[serde(default)]
    pub horizon: Option<usize>,
    pub num_seeds: usize,
    pub master_seed: u64,
    pub algorithms: Vec<AlgorithmSpec>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_alpha")]
    pub cvar_alpha: f64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_trajectories == 0 {
            return Err(config_err("num_trajectories must be at least 1"));
        }
        if self.horizon == Some(0) {
            return Err(config_err("horizon must be at least 1"));
        }
        if self.algorithms.is_empty() {
            return Err(config_err("no algorithms listed"));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(config_err("delta outside (0, 1]"));
        }
        if !(self.cvar_alpha > 0.0 && self.cvar_alpha <= 1.0) {
            return Err(config_err("cvar_alpha outside (0, 1]"));
        }
        for spec in &self.algorithms {
            match spec {
                AlgorithmSpec::Dprl { n_wedge: 0, .. } | AlgorithmSpec::Spibb { n_wedge: 0, .. } => {
                    return Err(config_err("n_wedge must be at least 1"))
                }
                AlgorithmSpec::Pqi { b } if !(*b > 0.0 && *b < 1.0) => {
                    return Err(config_err("pqi density threshold outside (0, 1)"))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.horizon.unwrap_or_else(|| self.environment.default_horizon())
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn dataset_seed(&self, index: usize) -> u64 {
        derive_seed(self.master_seed, index as u64)
    }

    pub fn generate(&self, env: &Environment, index: usize) -> Result<TrajectoryDataset> {
        simulate(&env.mdp, &env.behavior, self.num_trajectories, self.horizon(), self.dataset_seed(index))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub seed_index: usize,
    pub dataset_seed: u64,
    pub algorithm: String,
    pub value: Option<f64>,
    pub improvement: Option<f64>,
    pub defer_fraction: Option<f64>,
    pub bound: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub algorithm: String,
    pub seeds_ok: usize,
    pub seeds_failed: usize,
    pub cvar: Option<f64>,
    pub mean_value: Option<f64>,
    pub worst_value: Option<f64>,
    pub defer_fraction: Option<f64>,
    /// Fraction of seeds whose improvement fell below the computed bound.
    pub bound_violation_rate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config_hash: String,
    pub behavior_value: f64,
    pub cvar_alpha: f64,
    pub records: Vec<SeedRecord>,
    pub summaries: Vec<AlgorithmSummary>,
}

impl ExperimentResult {
    pub fn summary(&self, label: &str) -> Option<&AlgorithmSummary> {
        self.summaries.iter().find(|s| s.algorithm == label)
    }

    /// Successful per-seed values of one algorithm in seed order.
    pub fn values(&self, label: &str) -> Vec<f64> {
        self.records.iter().filter(|r| r.algorithm == label).filter_map(|r| r.value).collect()
    }
}

fn run_seed(config: &ExperimentConfig, env: &Environment, behavior_value: f64, index: usize) -> Vec<SeedRecord> {
    let dataset_seed = config.dataset_seed(index);
    let blank = |algorithm: String| SeedRecord {
        seed_index: index,
        dataset_seed,
        algorithm,
        value: None,
        improvement: None,
        defer_fraction: None,
        bound: None,
        error: None,
    };
    let dataset = match config.generate(env, index) {
        Ok(d) => d,
        Err(e) => {
            return config
                .algorithms
                .iter()
                .map(|spec| SeedRecord { error: Some(e.to_string()), ..blank(spec.label()) })
                .collect()
        }
    };
    config
        .algorithms
        .iter()
        .map(|spec| {
            let outcome = train(spec, env, &dataset).and_then(|trained| {
                let value = match &trained.policy {
                    Some(p) => exact_value(&env.mdp, &MixedPolicy::new(p, &env.behavior))?,
                    None => behavior_value,
                };
                let bound = match (spec, trained.c_n_wedge) {
                    (AlgorithmSpec::Dprl { n_wedge, .. }, Some(c)) => {
                        let inputs = BoundInputs {
                            v_max: env.mdp.v_max(),
                            gamma: env.mdp.gamma,
                            n_wedge: *n_wedge,
                            delta: config.delta,
                            c_n_wedge: c,
                            ..Default::default()
                        };
                        Some(dprl_discrete_bound(&inputs, DiscreteForm::Statement)?)
                    }
                    _ => None,
                };
                Ok((value, trained.defer_fraction, bound))
            });
            match outcome {
                Ok((value, defer_fraction, bound)) => SeedRecord {
                    value: Some(value),
                    improvement: Some(value - behavior_value),
                    defer_fraction,
                    bound,
                    ..blank(spec.label())
                },
                Err(e) => SeedRecord { error: Some(e.to_string()), ..blank(spec.label()) },
            }
        })
        .collect()
}

fn summarize(label: String, records: &[&SeedRecord], alpha: f64) -> AlgorithmSummary {
    let values: Vec<f64> = records.iter().filter_map(|r| r.value).collect();
    let ok = values.len();
    let mean = |xs: &[f64]| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
    let defers: Vec<f64> = records.iter().filter_map(|r| r.defer_fraction).collect();
    let bounded: Vec<bool> = records.iter().filter_map(|r| Some(r.improvement? < r.bound?)).collect();
    AlgorithmSummary {
        algorithm: label,
        seeds_ok: ok,
        seeds_failed: records.len() - ok,
        cvar: cvar(&values, alpha).ok(),
        mean_value: mean(&values),
        worst_value: values.iter().copied().reduce(f64::min),
        defer_fraction: mean(&defers),
        bound_violation_rate: (!bounded.is_empty())
            .then(|| bounded.iter().filter(|&&v| v).count() as f64 / bounded.len() as f64),
    }
}

/// Generates `num_seeds` datasets, trains every algorithm on each and
/// evaluates exactly on the true MDP. Seeds run in parallel; records are
/// ordered by seed then algorithm, so the result is independent of
/// scheduling. Training failures are recorded per seed.
pub fn run_reliability_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let env = config.environment.build()?;
    let behavior_value = exact_value(&env.mdp, &MixedPolicy::behavior(&env.behavior))?;
    let per_seed: Vec<Vec<SeedRecord>> =
        (0..config.num_seeds).into_par_iter().map(|i| run_seed(config, &env, behavior_value, i)).collect();
    let records: Vec<SeedRecord> = per_seed.into_iter().flatten().collect();
    let summaries = config
        .algorithms
        .iter()
        .map(|spec| {
            let label = spec.label();
            let mine: Vec<&SeedRecord> = records.iter().filter(|r| r.algorithm == label).collect();
            summarize(label, &mine, config.cvar_alpha)
        })
        .collect();
    Ok(ExperimentResult {
        config_hash: config.hash(),
        behavior_value,
        cvar_alpha: config.cvar_alpha,
        records,
        summaries,
    })
}

/// Grid for the bound comparison on forest MDPs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundGrid {
    pub num_chains: Vec<usize>,
    pub n_wedge: Vec<u64>,
    pub depth: usize,
    pub epsilon: f64,
    pub gamma: f64,
    pub b: f64,
    pub delta: f64,
    pub num_trajectories: usize,
    pub trials: usize,
    pub master_seed: u64,
}

impl Default for BoundGrid {
    fn default() -> Self {
        Self {
            num_chains: vec![10, 20, 30, 50],
            n_wedge: vec![1, 10, 100],
            depth: 3,
            epsilon: 0.1,
            gamma: 0.99,
            b: 0.02,
            delta: 0.05,
            num_trajectories: 100,
            trials: 50,
            master_seed: 0,
        }
    }
}

pub const BOUND_METHODS: [&str; 4] = ["dprl", "spibb", "pqi", "count_pessimism"];

/// One cell of the bound comparison, averaged over trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub method: String,
    pub num_chains: usize,
    pub num_states: usize,
    pub n_wedge: u64,
    pub b: f64,
    pub bound: f64,
    /// The bound is only known up to constants (set to 1 here).
    pub up_to_constants: bool,
}

/// Computes every bound at every `(num_chains, n_wedge)` grid point. The
/// data-dependent terms come from `trials` seeded datasets per chain count
/// and are averaged. Rows are ordered by chains, then `n_wedge`, then method.
pub fn bound_comparison(grid: &BoundGrid) -> Result<Vec<BoundRow>> {
    if grid.trials == 0 || grid.num_trajectories == 0 {
        return Err(config_err("bound comparison needs at least one trial and one trajectory"));
    }
    if grid.n_wedge.contains(&0) {
        return Err(config_err("n_wedge must be at least 1"));
    }
    let mut rows = Vec::new();
    for (ci, &chains) in grid.num_chains.iter().enumerate() {
        let env = build_forest_mdp(&ForestConfig {
            num_chains: chains,
            depth: grid.depth,
            epsilon: grid.epsilon,
            gamma: grid.gamma,
        })?;
        let (ns, na) = (env.mdp.num_states, env.mdp.num_actions);
        let chain_seed = derive_seed(grid.master_seed, ci as u64);
        // Per trial: one bound per (n_wedge, method).
        let per_trial: Vec<Vec<[f64; 4]>> = (0..grid.trials)
            .into_par_iter()
            .map(|t| -> Result<Vec<[f64; 4]>> {
                let data = simulate(
                    &env.mdp,
                    &env.behavior,
                    grid.num_trajectories,
                    grid.depth + 1,
                    derive_seed(chain_seed, t as u64),
                )?;
                let first = crate::estimation::count_visits(&data, ns, na, VisitMode::FirstVisit)?;
                let every = crate::estimation::count_visits(&data, ns, na, VisitMode::EveryVisit)?;
                grid.n_wedge
                    .iter()
                    .map(|&n_wedge| {
                        let inputs = BoundInputs {
                            v_max: env.mdp.v_max(),
                            gamma: env.mdp.gamma,
                            n_wedge,
                            delta: grid.delta,
                            c_n_wedge: count_c_n_wedge(&first, n_wedge),
                            num_states: ns,
                            num_actions: na,
                            b: grid.b,
                            dataset_size: data.num_steps() as u64,
                            ..Default::default()
                        };
                        Ok([
                            dprl_discrete_bound(&inputs, DiscreteForm::Statement)?,
                            crate::bounds::spibb_bound(&inputs)?,
                            crate::bounds::pqi_bound(&inputs)?,
                            crate::bounds::count_pessimism_bound(&every, &inputs)?,
                        ])
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        for (k, &n_wedge) in grid.n_wedge.iter().enumerate() {
            for (m, method) in BOUND_METHODS.iter().enumerate() {
                let bound = per_trial.iter().map(|trial| trial[k][m]).sum::<f64>() / grid.trials as f64;
                rows.push(BoundRow {
                    method: method.to_string(),
                    num_chains: chains,
                    num_states: ns,
                    n_wedge,
                    b: grid.b,
                    bound,
                    up_to_constants: *method == "pqi",
                });
            }
        }
    }
    Ok(rows)
}
