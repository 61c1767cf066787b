use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use dprl::harness::{
    bound_comparison, exact_value, mc_value, run_reliability_experiment, train as train_algorithm, AlgorithmSpec,
    BoundGrid, BoundRow, MixedPolicy,
};
use dprl::mdp::TrajectoryDataset;
use dprl::policy::{LearnedPolicy, PolicyDocument};
use serde::Serialize;

use crate::config::RunConfig;

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush().with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct ManifestEntry {
    seed_index: usize,
    dataset_seed: u64,
    file: String,
    trajectories: usize,
    steps: usize,
}

#[derive(Serialize)]
struct Manifest<'a> {
    config_hash: String,
    environment: &'a str,
    behavior: &'a str,
    datasets: Vec<ManifestEntry>,
}

pub fn generate(config: &RunConfig, out: &Path) -> Result<()> {
    let exp = &config.experiment;
    if exp.num_seeds == 0 {
        return Ok(());
    }
    let env = exp.environment.build()?;
    let dir = out.join("datasets");
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut datasets = Vec::with_capacity(exp.num_seeds);
    for i in 0..exp.num_seeds {
        let data = exp.generate(&env, i)?;
        let name = format!("seed_{i:04}.jsonl");
        let path = dir.join(&name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(file);
        data.write_jsonl(&mut w)?;
        w.flush().with_context(|| format!("writing {}", path.display()))?;
        datasets.push(ManifestEntry {
            seed_index: i,
            dataset_seed: exp.dataset_seed(i),
            file: name,
            trajectories: data.len(),
            steps: data.num_steps(),
        });
    }
    let manifest =
        Manifest { config_hash: exp.hash(), environment: &env.mdp.name, behavior: &env.behavior.name, datasets };
    write_json(&dir.join("manifest.json"), &manifest)
}

fn pick_algorithm<'a>(config: &'a RunConfig, key: &str) -> Result<&'a AlgorithmSpec> {
    let algs = &config.experiment.algorithms;
    if let Some(spec) = algs.iter().find(|a| a.label() == key) {
        return Ok(spec);
    }
    if let Ok(i) = key.parse::<usize>() {
        if let Some(spec) = algs.get(i) {
            return Ok(spec);
        }
    }
    let labels: Vec<String> = algs.iter().map(AlgorithmSpec::label).collect();
    bail!("algorithm {key:?} not in config; available: {}", labels.join(", "))
}

#[derive(Serialize)]
struct TrainMeta {
    algorithm: String,
    dataset: String,
    config_hash: String,
    trajectories: usize,
    iterations: Option<usize>,
    defer_count: Option<usize>,
    defer_fraction: Option<f64>,
    decision_states: Option<usize>,
}

pub fn train(config: &RunConfig, dataset: &Path, algorithm: &str, out: &Path) -> Result<()> {
    let spec = pick_algorithm(config, algorithm)?;
    if matches!(spec, AlgorithmSpec::Behavior) {
        bail!("the behavior entry has nothing to train");
    }
    let env = config.experiment.environment.build()?;
    let file = File::open(dataset).with_context(|| format!("opening dataset {}", dataset.display()))?;
    let data = TrajectoryDataset::read_jsonl(BufReader::new(file), &env.mdp.name, &env.behavior.name, 0)
        .with_context(|| format!("reading dataset {}", dataset.display()))?;
    let trained = train_algorithm(spec, &env, &data)?;
    let policy = trained.policy.context("training produced no policy")?;
    let (defer_count, decision_states) = match &policy {
        LearnedPolicy::DecisionPoint(p) => (Some(p.defer_count()), Some(p.decision_states.len())),
        LearnedPolicy::Baseline(_) => (None, None),
    };
    write_json(&out.join("policy.json"), &policy.to_document())?;
    let meta = TrainMeta {
        algorithm: spec.label(),
        dataset: dataset.display().to_string(),
        config_hash: config.experiment.hash(),
        trajectories: data.len(),
        iterations: trained.iterations,
        defer_count,
        defer_fraction: trained.defer_fraction,
        decision_states,
    };
    write_json(&out.join("train_meta.json"), &meta)
}

#[derive(Serialize)]
struct Evaluation {
    policy: String,
    exact_value: f64,
    behavior_value: f64,
    improvement: f64,
    mc_mean: f64,
    mc_std_err: f64,
    rollouts: usize,
}

pub fn evaluate(config: &RunConfig, policy_path: &Path, rollouts: usize, out: &Path) -> Result<()> {
    let env = config.experiment.environment.build()?;
    let text =
        std::fs::read_to_string(policy_path).with_context(|| format!("reading policy {}", policy_path.display()))?;
    let doc: PolicyDocument =
        serde_json::from_str(&text).with_context(|| format!("parsing policy {}", policy_path.display()))?;
    let policy = LearnedPolicy::from_document(&doc)?;
    let mixed = MixedPolicy::new(&policy, &env.behavior);
    let value = exact_value(&env.mdp, &mixed)?;
    let behavior_value = exact_value(&env.mdp, &MixedPolicy::behavior(&env.behavior))?;
    let mc = mc_value(&env.mdp, &mixed, rollouts, config.experiment.master_seed)?;
    let report = Evaluation {
        policy: policy_path.display().to_string(),
        exact_value: value,
        behavior_value,
        improvement: value - behavior_value,
        mc_mean: mc.mean,
        mc_std_err: mc.std_err,
        rollouts,
    };
    write_json(&out.join("evaluation.json"), &report)
}

fn write_bounds(rows: &[BoundRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))
}

pub fn bounds(config: &RunConfig, out: &Path) -> Result<()> {
    let grid = config.bounds.clone().unwrap_or_default();
    let rows = bound_comparison(&grid)?;
    write_bounds(&rows, &out.join("bounds.csv"))
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    config_hash: &'a str,
    behavior_value: f64,
    cvar_alpha: f64,
    num_seeds: usize,
    summaries: &'a [dprl::harness::AlgorithmSummary],
}

pub fn sweep(config: &RunConfig, out: &Path) -> Result<()> {
    let result = run_reliability_experiment(&config.experiment)?;
    let path = out.join("sweep_records.csv");
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
    for record in &result.records {
        w.serialize(record)?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    let summary = SweepSummary {
        config_hash: &result.config_hash,
        behavior_value: result.behavior_value,
        cvar_alpha: result.cvar_alpha,
        num_seeds: config.experiment.num_seeds,
        summaries: &result.summaries,
    };
    write_json(&out.join("sweep_summary.json"), &summary)?;
    let grid: BoundGrid = config.bounds.clone().unwrap_or_default();
    write_bounds(&bound_comparison(&grid)?, &out.join("bounds.csv"))
}
