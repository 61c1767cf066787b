//! Acceptance checks, one line per criterion. Runs as a plain binary
//! (`harness = false`) so the verdict lines are always printed.
//!
//! Empirical criteria (1-5) report PASS or FAIL without aborting; the exact
//! criteria (6-8) must pass, so the target exits non-zero if any of them fail.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use dprl::baselines::BehaviorSource;
use dprl::continuous::ball_tree::{linear_scan, BallTree};
use dprl::continuous::{build_index, query, ContinuousStep, NeighborMode};
use dprl::discrete::*;
use dprl::estimation::{count_visits, mc_estimates, mc_first_visit_estimates, VisitMode};
use dprl::harness::*;
use dprl::mdp::*;
use dprl::policy::LearnedPolicy;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MASTER_SEED: u64 = 2024;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn experiment(
    environment: EnvironmentConfig,
    n: usize,
    seeds: usize,
    algorithms: Vec<AlgorithmSpec>,
) -> ExperimentResult {
    let config = ExperimentConfig {
        environment,
        num_trajectories: n,
        horizon: None,
        num_seeds: seeds,
        master_seed: MASTER_SEED,
        algorithms,
        delta: 0.05,
        cvar_alpha: 0.05,
    };
    run_reliability_experiment(&config).expect("experiment runs")
}

fn cvar_of(result: &ExperimentResult, spec: &AlgorithmSpec) -> f64 {
    let s = result.summary(&spec.label()).expect("summary present");
    assert_eq!(s.seeds_failed, 0, "{} had failing seeds", s.algorithm);
    s.cvar.expect("cvar present")
}

fn gridworld() -> EnvironmentConfig {
    EnvironmentConfig::Gridworld(GridworldConfig::default())
}

fn criterion_1() -> Verdict {
    let dprl = AlgorithmSpec::dprl(20);
    let result = experiment(gridworld(), 50, 500, vec![dprl.clone()]);
    let s = result.summary(&dprl.label()).unwrap();
    let rate = s.bound_violation_rate.unwrap_or(f64::NAN);
    verdict(
        s.seeds_failed == 0 && rate <= 0.05 + 0.03,
        format!("violation rate {rate:.4} over {} seeds (limit 0.08)", s.seeds_ok),
    )
}

fn criterion_2() -> Verdict {
    let rows = bound_comparison(&BoundGrid::default()).expect("bound grid runs");
    let mut cells: BTreeMap<(usize, u64), BTreeMap<String, f64>> = BTreeMap::new();
    for row in &rows {
        cells.entry((row.num_chains, row.n_wedge)).or_default().insert(row.method.clone(), row.bound.abs());
    }
    let mut failures = Vec::new();
    let mut worst_ratio: f64 = 0.0;
    for ((chains, n), methods) in &cells {
        let dprl = methods["dprl"];
        let others =
            methods.iter().filter(|(m, _)| m.as_str() != "dprl").map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
        worst_ratio = worst_ratio.max(dprl / others);
        if dprl.partial_cmp(&others) != Some(std::cmp::Ordering::Less) {
            failures.push(format!("chains={chains} n_wedge={n}"));
        }
    }
    verdict(
        failures.is_empty() && cells.len() == 12,
        format!(
            "{} grid points, DPRL strictly tightest at {}; max |dprl|/|best other| = {worst_ratio:.4}{}",
            cells.len(),
            cells.len() - failures.len(),
            if failures.is_empty() { String::new() } else { format!("; not tightest at {}", failures.join(", ")) }
        ),
    )
}

fn criterion_3() -> (Verdict, String) {
    let dprl = AlgorithmSpec::dprl(10);
    let pqi = AlgorithmSpec::Pqi { b: 0.02 };
    let run = |epsilon: f64| {
        let forest = experiment(
            EnvironmentConfig::Forest(ForestConfig { epsilon, ..Default::default() }),
            100,
            100,
            vec![dprl.clone(), pqi.clone()],
        );
        let cql = experiment(
            EnvironmentConfig::Cql(CqlConfig { epsilon, ..Default::default() }),
            100,
            100,
            vec![dprl.clone(), AlgorithmSpec::BehaviorClone],
        );
        (
            cvar_of(&forest, &dprl),
            cvar_of(&forest, &pqi),
            cvar_of(&cql, &dprl),
            cvar_of(&cql, &AlgorithmSpec::BehaviorClone),
        )
    };
    let (fd, fp, cd, cb) = run(0.1);
    let main = verdict(
        fd > fp && cd > cb,
        format!("eps=0.1: forest DPRL {fd:.5} vs PQI {fp:.5}; CQL DPRL {cd:.5} vs BC {cb:.5}"),
    );
    let (fd, fp, cd, cb) = run(0.2);
    let info = format!(
        "eps=0.2 (informational, not scored): forest DPRL {fd:.5} vs PQI {fp:.5} [{}]; CQL DPRL {cd:.5} vs BC {cb:.5} [{}]",
        if fd > fp { "holds" } else { "fails" },
        if cd > cb { "holds" } else { "fails" }
    );
    (main, info)
}

fn criterion_4() -> Verdict {
    let dprl = AlgorithmSpec::dprl(20);
    let true_b = AlgorithmSpec::Spibb { n_wedge: 20, behavior: BehaviorSource::True };
    let est_b = AlgorithmSpec::Spibb { n_wedge: 20, behavior: BehaviorSource::Estimated };
    let result = experiment(gridworld(), 50, 200, vec![dprl.clone(), true_b.clone(), est_b.clone()]);
    let (d, t, e) = (cvar_of(&result, &dprl), cvar_of(&result, &true_b), cvar_of(&result, &est_b));
    verdict(
        e <= t && d >= e,
        format!("SPIBB estimated {e:.5} <= true {t:.5}: {}; DPRL {d:.5} >= SPIBB estimated {e:.5}: {}", e <= t, d >= e),
    )
}

fn criterion_5() -> Verdict {
    let thresholds = [1u64, 2, 5, 10, 20, 30];
    let specs: Vec<AlgorithmSpec> = thresholds.iter().map(|&n| AlgorithmSpec::dprl(n)).collect();
    let result = experiment(gridworld(), 50, 200, specs.clone());
    let summaries: Vec<&AlgorithmSummary> = specs.iter().map(|s| result.summary(&s.label()).unwrap()).collect();
    let defer: Vec<f64> = summaries.iter().map(|s| s.defer_fraction.unwrap()).collect();
    let cvars: Vec<f64> = specs.iter().map(|s| cvar_of(&result, s)).collect();
    let means: Vec<f64> = summaries.iter().map(|s| s.mean_value.unwrap()).collect();
    let xs: Vec<f64> = thresholds.iter().map(|&n| n as f64).collect();
    let monotone = defer.windows(2).all(|w| w[1] >= w[0]);
    let rho_cvar = spearman(&xs, &cvars).unwrap();
    let rho_mean = spearman(&xs, &means).unwrap();
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(",");
    verdict(
        monotone && rho_cvar >= 0.0 && rho_mean <= 0.0,
        format!(
            "defer nondecreasing: {monotone} [{}]; spearman(N, CVaR) = {rho_cvar:.3} [{}]; spearman(N, mean) = {rho_mean:.3} [{}]",
            fmt(&defer),
            fmt(&cvars),
            fmt(&means)
        ),
    )
}

// ---- criterion 6 -------------------------------------------------------

fn check_ball_tree() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    for index in 0..100 {
        let dim = rng.gen_range(1..6);
        let n = rng.gen_range(1..400);
        let weights: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.1..4.0)).collect();
        let flat: Vec<f64> = (0..n * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let tree = BallTree::new(flat.clone(), dim, weights.clone());
        for _ in 0..25 {
            let q: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.2..1.2)).collect();
            let r = rng.gen_range(0.01..1.5);
            if tree.within(&q, r) != linear_scan(&flat, dim, &weights, &q, r) {
                return Err(format!("index {index} disagrees"));
            }
        }
    }
    Ok(())
}

fn random_instance(seed: u64) -> (TrajectoryDataset, usize, usize, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (ns, na, gamma) = (7, 3, 0.9);
    let terminal = ns - 1;
    let mut transitions = Vec::new();
    for _ in 0..ns * na {
        let mut row: Vec<f64> = (0..ns).map(|_| rng.gen::<f64>()).collect();
        row[terminal] += 0.3;
        let total: f64 = row.iter().sum();
        transitions.extend(row.iter().map(|p| p / total));
    }
    let per_pair = (0..ns * na)
        .map(|_| {
            let lo = rng.gen_range(0.0..0.8);
            RewardDist::Uniform { lo, hi: lo + 0.2 }
        })
        .collect();
    let mdp = TabularMdp::new(
        "random",
        ns,
        na,
        transitions,
        RewardSpec { per_pair, on_arrival: vec![None; ns] },
        gamma,
        0,
        &[terminal],
    )
    .unwrap();
    let mut probs = Vec::new();
    for _ in 0..ns {
        let row: Vec<f64> = (0..na).map(|_| rng.gen_range(0.1..1.0)).collect();
        let total: f64 = row.iter().sum();
        probs.extend(row.iter().map(|p| p / total));
    }
    let behavior = BehaviorPolicy::new(BehaviorKind::TabularStochastic, "random", ns, na, probs).unwrap();
    (simulate(&mdp, &behavior, 50, 25, seed).unwrap(), ns, na, gamma)
}

fn check_policy_iteration() -> Result<usize, String> {
    let mut checked = 0;
    for seed in 0..200 {
        let (data, ns, na, gamma) = random_instance(seed);
        let counts = count_visits(&data, ns, na, VisitMode::FirstVisit).unwrap();
        let est = mc_first_visit_estimates(&data, ns, na, gamma).unwrap();
        let dp = identify_decision_points(&counts, &est, 2).unwrap();
        if dp.decision_states.is_empty() || dp.decision_states.len() > 6 {
            continue;
        }
        let model = make_smdp(&data, &dp, gamma, TailMode::Absorb).unwrap();
        let policy = smdp_policy_iteration(&model, &dp, &est, 1e-12).map_err(|e| e.to_string())?;
        let solver = SmdpSolver::new(&model, &dp, &est).unwrap();
        let chosen: Vec<usize> = model.states.iter().map(|&s| policy.act(s).action().unwrap()).collect();
        let got = solver.evaluate(&chosen).unwrap();
        let choices: Vec<&Vec<usize>> = model.states.iter().map(|&s| &dp.advantageous[s]).collect();
        let mut best = vec![f64::NEG_INFINITY; choices.len()];
        let mut idx = vec![0usize; choices.len()];
        'enumerate: loop {
            let candidate: Vec<usize> = idx.iter().zip(&choices).map(|(&i, c)| c[i]).collect();
            for (b, v) in best.iter_mut().zip(solver.evaluate(&candidate).unwrap()) {
                *b = b.max(v);
            }
            for k in 0..=idx.len() {
                if k == idx.len() {
                    break 'enumerate;
                }
                idx[k] += 1;
                if idx[k] < choices[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
        for (g, b) in got.iter().zip(&best) {
            if (g - b).abs() > 1e-8 {
                return Err(format!("seed {seed}: {g} vs optimum {b}"));
            }
        }
        checked += 1;
    }
    Ok(checked)
}

fn check_make_smdp() -> Result<usize, String> {
    let mut checked = 0;
    let hand: Vec<Vec<(usize, usize, f64)>> = vec![
        vec![(0, 1, 1.0), (1, 0, 2.0), (2, 0, 4.0)],
        vec![(0, 1, 0.0), (2, 1, 1.0), (0, 0, 8.0)],
        vec![(1, 0, 1.0), (2, 0, 2.0)],
        vec![(2, 1, 0.5), (1, 1, 0.25), (0, 1, 1.0), (2, 0, 0.0)],
    ];
    let data = TrajectoryDataset {
        trajectories: hand
            .into_iter()
            .enumerate()
            .map(|(i, s)| Trajectory { seed: i as u64, steps: s.into_iter().map(Step::from).collect() })
            .collect(),
        mdp_descriptor: "hand".into(),
        behavior_descriptor: "hand".into(),
        master_seed: 0,
    };
    for adv in [vec![vec![1], vec![], vec![0, 1]], vec![vec![0, 1], vec![0], vec![0]], vec![vec![], vec![1], vec![]]] {
        let decision_states: Vec<usize> = (0..3).filter(|&s| !adv[s].is_empty()).collect();
        let dp = DecisionPointSets {
            n_wedge: 1,
            num_states: 3,
            num_actions: 2,
            advantageous: adv.clone(),
            decision_states,
            defer_states: Vec::new(),
        };
        for gamma in [0.5, 0.9] {
            let model = make_smdp(&data, &dp, gamma, TailMode::Absorb).unwrap();
            // Straight-line recomputation: (s, a, next) -> (count, discount sum, reward sum).
            type Segments = BTreeMap<(usize, usize, Option<usize>), (u64, f64, f64)>;
            let mut acc = Segments::new();
            for traj in &data.trajectories {
                let mut seen = BTreeSet::new();
                let times: Vec<usize> = (0..traj.steps.len())
                    .filter(|&t| !adv[traj.steps[t].state].is_empty() && seen.insert(traj.steps[t].state))
                    .collect();
                for (i, &from) in times.iter().enumerate() {
                    let (to, next) = match times.get(i + 1) {
                        Some(&to) => (to, Some(traj.steps[to].state)),
                        None => (traj.steps.len(), None),
                    };
                    let (mut reward, mut disc) = (0.0, 1.0);
                    for step in &traj.steps[from..to] {
                        reward += disc * step.reward;
                        disc *= gamma;
                    }
                    let e = acc.entry((traj.steps[from].state, traj.steps[from].action, next)).or_default();
                    e.0 += 1;
                    e.1 += disc;
                    e.2 += reward;
                }
            }
            let mut seen = 0;
            for (&(s, a), row) in &model.rows {
                let total = row.total_count() as f64;
                for t in &row.transitions {
                    let next = match t.next {
                        SmdpNext::DecisionPoint(j) => Some(j),
                        SmdpNext::Absorbing => None,
                    };
                    let (n, disc, rew) = acc.get(&(s, a, next)).copied().ok_or("extra transition")?;
                    let ok = t.count == n
                        && (t.probability - n as f64 / total).abs() < 1e-12
                        && (t.discount - disc / n as f64).abs() < 1e-12
                        && (t.reward - rew / n as f64).abs() < 1e-12;
                    if !ok {
                        return Err(format!("row ({s},{a}) -> {next:?} differs"));
                    }
                    seen += 1;
                }
            }
            if seen != acc.len() {
                return Err("missing transitions".into());
            }
            checked += 1;
        }
    }
    Ok(checked)
}

fn check_mc_estimator() -> Result<String, String> {
    // Three-state chain: s0 and s1 act, s2 is terminal.
    let (ns, na, gamma) = (3, 2, 0.9);
    #[rustfmt::skip]
    let transitions = vec![
        0.0, 0.7, 0.3,   0.0, 0.2, 0.8,
        0.0, 0.0, 1.0,   0.5, 0.0, 0.5,
        0.0, 0.0, 1.0,   0.0, 0.0, 1.0,
    ];
    let per_pair = vec![
        RewardDist::Uniform { lo: 0.0, hi: 0.4 },
        RewardDist::Uniform { lo: 0.2, hi: 0.6 },
        RewardDist::Uniform { lo: 0.5, hi: 1.0 },
        RewardDist::Uniform { lo: 0.0, hi: 0.2 },
        RewardDist::Constant { value: 0.0 },
        RewardDist::Constant { value: 0.0 },
    ];
    let mdp = TabularMdp::new(
        "chain3",
        ns,
        na,
        transitions,
        RewardSpec { per_pair, on_arrival: vec![None; ns] },
        gamma,
        0,
        &[2],
    )
    .unwrap();
    let behavior =
        BehaviorPolicy::new(BehaviorKind::TabularStochastic, "b", ns, na, vec![0.5, 0.5, 0.6, 0.4, 0.5, 0.5]).unwrap();
    let v = exact_values(&mdp, &MixedPolicy::behavior(&behavior)).unwrap();
    let q = |s: usize, a: usize| {
        mdp.expected_reward(s, a) + gamma * (0..ns).map(|j| mdp.transition_row(s, a)[j] * v[j]).sum::<f64>()
    };
    let targets = [("V(s0)", v[0]), ("V(s1)", v[1]), ("Q(s0,a0)", q(0, 0)), ("Q(s0,a1)", q(0, 1))];
    let mut samples: Vec<Vec<f64>> = vec![Vec::new(); targets.len()];
    for i in 0..2000u64 {
        let data = simulate(&mdp, &behavior, 20, 400, dprl::rng::derive_seed(64, i)).unwrap();
        let est = mc_first_visit_estimates(&data, ns, na, gamma).unwrap();
        let values = [est.v(0), est.v(1), est.q(0, 0), est.q(0, 1)];
        for (k, x) in values.iter().enumerate() {
            if let Some(x) = x {
                samples[k].push(*x);
            }
        }
    }
    let mut report = Vec::new();
    for ((name, exact), xs) in targets.iter().zip(&samples) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let se = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt();
        let z = (mean - exact) / se;
        report.push(format!("{name} z={z:.2}"));
        if z.abs() > 3.0 {
            return Err(format!("{name}: mean {mean:.6} vs exact {exact:.6} ({z:.2} SE)"));
        }
    }
    Ok(report.join(" "))
}

fn check_embedding() -> Result<usize, String> {
    let env = build_gridworld(&GridworldConfig { side: 5, ..Default::default() }).unwrap();
    let (ns, na, gamma) = (env.mdp.num_states, env.mdp.num_actions, env.mdp.gamma);
    let mut compared = 0;
    for seed in 0..10 {
        let data = simulate(&env.mdp, &env.behavior, 40, 40, seed).unwrap();
        let embedded: Vec<Vec<ContinuousStep>> = data
            .trajectories
            .iter()
            .map(|t| {
                t.steps
                    .iter()
                    .map(|s| {
                        let mut state = vec![0.0; ns];
                        state[s.state] = 1.0;
                        ContinuousStep { state, action: s.action, reward: s.reward }
                    })
                    .collect()
            })
            .collect();
        let index = build_index(&embedded, na, gamma, vec![1.0; ns], 0.5).unwrap();
        for (visit, mode) in
            [(VisitMode::EveryVisit, NeighborMode::All), (VisitMode::FirstVisit, NeighborMode::FirstPerTrajectory)]
        {
            let counts = count_visits(&data, ns, na, visit).unwrap();
            let est = mc_estimates(&data, ns, na, gamma, visit).unwrap();
            for n_wedge in [1, 2, 5, 10, 20] {
                let sets = identify_decision_points(&counts, &est, n_wedge).unwrap();
                for s in 0..ns {
                    let mut x = vec![0.0; ns];
                    x[s] = 1.0;
                    let got = query(&index, &x, n_wedge, mode).unwrap().advantageous;
                    if got != sets.advantageous[s] {
                        return Err(format!("seed {seed} state {s} {visit:?}: {got:?} vs {:?}", sets.advantageous[s]));
                    }
                    compared += 1;
                }
            }
        }
    }
    Ok(compared)
}

fn check_cvar() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    for _ in 0..1000 {
        let n = rng.gen_range(1..300);
        let values: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let alpha = rng.gen_range(0.001..=1.0);
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let k = ((alpha * n as f64).ceil() as usize).max(1);
        let oracle = sorted[..k].iter().sum::<f64>() / k as f64;
        if (cvar(&values, alpha).unwrap() - oracle).abs() > 1e-12 {
            return Err(format!("n={n} alpha={alpha}"));
        }
    }
    Ok(())
}

fn criterion_6() -> Verdict {
    let parts: Vec<(&str, Result<String, String>)> = vec![
        ("a", check_ball_tree().map(|_| "100 indices".to_string())),
        ("b", check_policy_iteration().map(|n| format!("{n} instances"))),
        ("c", check_make_smdp().map(|n| format!("{n} tables"))),
        ("d", check_mc_estimator()),
        ("e", check_embedding().map(|n| format!("{n} state sets"))),
        ("f", check_cvar().map(|_| "1000 samples".to_string())),
    ];
    let pass = parts.iter().all(|(_, r)| r.is_ok());
    let detail = parts
        .iter()
        .map(|(k, r)| match r {
            Ok(msg) => format!("({k}) ok [{msg}]"),
            Err(msg) => format!("({k}) FAILED [{msg}]"),
        })
        .collect::<Vec<_>>()
        .join("; ");
    verdict(pass, detail)
}

fn criterion_7() -> Verdict {
    let envs =
        [EnvironmentConfig::Forest(ForestConfig::default()), EnvironmentConfig::Cql(CqlConfig::default()), gridworld()];
    let mut worst: f64 = 0.0;
    let mut all_defer = true;
    for environment in envs {
        let env = environment.build().unwrap();
        let base = exact_value(&env.mdp, &MixedPolicy::behavior(&env.behavior)).unwrap();
        let data = simulate(&env.mdp, &env.behavior, 100, environment.default_horizon(), 7).unwrap();
        let trained = train(&AlgorithmSpec::dprl(u64::MAX), &env, &data).unwrap();
        let policy = trained.policy.unwrap();
        if let LearnedPolicy::DecisionPoint(p) = &policy {
            all_defer &= p.defer_count() == env.mdp.num_states;
        }
        let mixed = exact_value(&env.mdp, &MixedPolicy::new(&policy, &env.behavior)).unwrap();
        worst = worst.max((mixed - base).abs());
    }
    verdict(all_defer && worst <= 1e-10, format!("max |rho(mixed) - rho(behavior)| = {worst:.3e} over 3 environments"))
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_dprl")).args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(path.strip_prefix(root).unwrap().display().to_string(), fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

fn criterion_8() -> Verdict {
    let tmp = tempfile::TempDir::new().unwrap();
    let config = serde_json::json!({
        "experiment": {
            "environment": { "id": "gridworld" },
            "num_trajectories": 50,
            "num_seeds": 6,
            "master_seed": 3,
            "algorithms": [
                { "algorithm": "dprl", "n_wedge": 10 },
                { "algorithm": "spibb", "n_wedge": 10, "behavior": "estimated" },
                { "algorithm": "pqi", "b": 0.02 },
                { "algorithm": "behavior_clone" },
                { "algorithm": "behavior" }
            ]
        },
        "bounds": { "num_chains": [3, 5], "n_wedge": [1, 10], "trials": 3 }
    });
    let cfg = tmp.path().join("config.json");
    fs::write(&cfg, config.to_string()).unwrap();
    let cfg = cfg.to_str().unwrap().to_string();
    let pipeline = |name: &str, jobs: &str| -> Result<BTreeMap<String, Vec<u8>>, String> {
        let out = tmp.path().join(name);
        let o = out.to_str().unwrap();
        let common = ["--config", cfg.as_str(), "--out", o, "--jobs", jobs];
        run_cli(&[&common[..], &["generate"]].concat())?;
        let ds = out.join("datasets/seed_0000.jsonl");
        for alg in ["0", "1", "2", "3"] {
            let dir = out.join(format!("train_{alg}"));
            let d = dir.to_str().unwrap();
            run_cli(&[
                "--config",
                &cfg,
                "--out",
                d,
                "--jobs",
                jobs,
                "train",
                "--dataset",
                ds.to_str().unwrap(),
                "--algorithm",
                alg,
            ])?;
            let p = dir.join("policy.json");
            run_cli(&[
                "--config",
                &cfg,
                "--out",
                d,
                "--jobs",
                jobs,
                "evaluate",
                "--policy",
                p.to_str().unwrap(),
                "--rollouts",
                "2000",
            ])?;
        }
        run_cli(&[&common[..], &["bounds"]].concat())?;
        run_cli(&[&common[..], &["sweep"]].concat())?;
        Ok(snapshot(&out))
    };
    let runs: Result<Vec<_>, String> =
        [("a", "1"), ("b", "1"), ("c", "4")].iter().map(|(n, j)| pipeline(n, j)).collect();
    match runs {
        Err(e) => verdict(false, format!("command failed: {e}")),
        Ok(runs) => {
            // Paths embedded in outputs differ by run directory; compare with it masked.
            let normalize = |run: &BTreeMap<String, Vec<u8>>, name: &str| -> BTreeMap<String, Vec<u8>> {
                let needle = tmp.path().join(name).display().to_string();
                run.iter()
                    .map(|(k, v)| (k.clone(), String::from_utf8_lossy(v).replace(&needle, "<out>").into_bytes()))
                    .collect()
            };
            let (a, b, c) = (normalize(&runs[0], "a"), normalize(&runs[1], "b"), normalize(&runs[2], "c"));
            let files = a.len();
            verdict(
                a == b && a == c && files > 0,
                format!("{files} files across generate/train/evaluate/bounds/sweep; rerun identical: {}; 1 vs 4 threads identical: {}", a == b, a == c),
            )
        }
    }
}

fn main() {
    // Accept and ignore libtest flags such as --nocapture.
    let mut results: Vec<(usize, Verdict, f64)> = Vec::new();
    let mut notes = Vec::new();
    macro_rules! timed {
        ($n:expr, $e:expr) => {{
            let t = Instant::now();
            let v = $e;
            results.push(($n, v, t.elapsed().as_secs_f64()));
        }};
    }
    timed!(1, criterion_1());
    timed!(2, criterion_2());
    {
        let t = Instant::now();
        let (v, info) = criterion_3();
        results.push((3, v, t.elapsed().as_secs_f64()));
        notes.push(info);
    }
    timed!(4, criterion_4());
    timed!(5, criterion_5());
    timed!(6, criterion_6());
    timed!(7, criterion_7());
    timed!(8, criterion_8());

    println!();
    for (n, v, secs) in &results {
        println!("criterion {n}: {} ({secs:.1}s) {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    for note in &notes {
        println!("note: {note}");
    }
    let passed = results.iter().filter(|(_, v, _)| v.pass).count();
    println!("acceptance: {passed}/{} criteria pass", results.len());
    let exact_failed: Vec<usize> = results.iter().filter(|(n, v, _)| *n >= 6 && !v.pass).map(|(n, _, _)| *n).collect();
    if !exact_failed.is_empty() {
        eprintln!("exact criteria failed: {exact_failed:?}");
        std::process::exit(1);
    }
}
