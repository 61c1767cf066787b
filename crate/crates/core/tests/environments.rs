use dprl::estimation::{count_visits, mc_estimates, mc_first_visit_estimates, VisitMode};
use dprl::harness::{exact_value, exact_values, mc_value, MixedPolicy};
use dprl::mdp::*;
use dprl::Error;

fn rows_sum_to_one(mdp: &TabularMdp) -> bool {
    (0..mdp.num_states)
        .all(|s| (0..mdp.num_actions).all(|a| (mdp.transition_row(s, a).iter().sum::<f64>() - 1.0).abs() <= 1e-9))
}

fn one_hot_behavior(ns: usize, na: usize, action: usize) -> BehaviorPolicy {
    let mut probs = vec![0.0; ns * na];
    for s in 0..ns {
        probs[s * na + action] = 1.0;
    }
    BehaviorPolicy::new(BehaviorKind::TabularStochastic, "fixed", ns, na, probs).unwrap()
}

#[test]
fn minimal_forest_layout() {
    let env = build_forest_mdp(&ForestConfig { num_chains: 1, depth: 1, epsilon: 0.25, gamma: 0.99 }).unwrap();
    // root + good + middle + bad + terminal
    assert_eq!(env.mdp.num_states, 1 + 3 + 1);
    assert_eq!(env.mdp.num_actions, 3);
    assert_eq!(env.behavior.row(0), &[0.25, 0.5, 0.25]);
}

#[test]
fn forest_rows_stochastic_and_invalid_epsilon() {
    let env = build_forest_mdp(&ForestConfig::default()).unwrap();
    assert!(rows_sum_to_one(&env.mdp));
    for epsilon in [0.6, -0.1] {
        let err = build_forest_mdp(&ForestConfig { epsilon, ..Default::default() }).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}

#[test]
fn forest_behavior_value_matches_closed_form() {
    let env = build_forest_mdp(&ForestConfig::default()).unwrap();
    let g3 = 0.99f64.powi(3);
    let expected = 0.1 * 0.7 * g3 + 0.8 * 0.55 * g3 + 0.1 * 0.5 * g3;
    let v = exact_value(&env.mdp, &MixedPolicy::behavior(&env.behavior)).unwrap();
    assert!((v - expected).abs() < 1e-10, "{v} vs {expected}");
}

#[test]
fn forest_each_root_action_value() {
    let env = build_forest_mdp(&ForestConfig::default()).unwrap();
    let g3 = 0.99f64.powi(3);
    for (a, r) in [(0, 0.7), (1, 0.55), (2, 0.5)] {
        let b = one_hot_behavior(env.mdp.num_states, 3, a);
        let v = exact_value(&env.mdp, &MixedPolicy::behavior(&b)).unwrap();
        assert!((v - r * g3).abs() < 1e-10, "action {a}: {v}");
    }
}

#[test]
fn cql_mdp_shape_and_values() {
    let env = build_cql_mdp(&CqlConfig::default()).unwrap();
    assert_eq!(env.mdp.num_actions, 10);
    assert!(rows_sum_to_one(&env.mdp));
    let sym = build_cql_mdp(&CqlConfig { num_risky: 1, epsilon: 1.0 / 3.0, gamma: 0.99 }).unwrap();
    for p in sym.behavior.row(0) {
        assert!((p - 1.0 / 3.0).abs() < 1e-12);
    }
    let q = optimal_q_values(&env.mdp);
    let root = env.mdp.start_state;
    let row = &q[root * 10..root * 10 + 10];
    let best = greedy_action(row);
    assert!((row[best] - 0.7).abs() < 1e-12);
    assert!(row.iter().any(|&x| (x - 0.55).abs() < 1e-12));
}

#[test]
fn cql_mean_reward_by_monte_carlo() {
    // Monte-Carlo oracle for the b1 arm's mean of 0.7.
    let env = build_cql_mdp(&CqlConfig::default()).unwrap();
    let q = optimal_q_values(&env.mdp);
    let root = env.mdp.start_state;
    let best = greedy_action(&q[root * 10..root * 10 + 10]);
    let b = one_hot_behavior(env.mdp.num_states, 10, best);
    let mc = mc_value(&env.mdp, &MixedPolicy::behavior(&b), 20_000, 11).unwrap();
    assert!((mc.mean - 0.7).abs() < 4.0 * mc.std_err, "{mc:?}");
}

#[test]
fn gridworld_shape() {
    let env = build_gridworld(&GridworldConfig::default()).unwrap();
    assert_eq!(env.mdp.num_states, 100);
    assert_eq!(env.mdp.num_actions, 4);
    assert!(rows_sum_to_one(&env.mdp));
}

#[test]
fn deterministic_two_by_two_grid() {
    let config = GridworldConfig { side: 2, noise: 1.0, careless_states: Some(vec![]), gamma: 0.9, reward_noise: 0.0 };
    let env = build_gridworld(&config).unwrap();
    let v = exact_values(&env.mdp, &MixedPolicy::behavior(&env.behavior)).unwrap();
    // Two moves to the goal, reward 1 on arrival: V = gamma * 1.
    assert!((v[env.mdp.start_state] - 0.9).abs() < 1e-12);
}

#[test]
fn careless_free_behavior_is_optimal() {
    let env = build_gridworld(&GridworldConfig { careless_states: Some(vec![]), ..Default::default() }).unwrap();
    let q = optimal_q_values(&env.mdp);
    for s in 0..env.mdp.num_states {
        if env.mdp.is_terminal(s) {
            continue;
        }
        let best = greedy_action(&q[s * 4..s * 4 + 4]);
        let mut expected = [0.0; 4];
        expected[best] = 1.0;
        assert_eq!(env.behavior.row(s), &expected, "state {s}");
    }
}

#[test]
fn careless_expert_matches_q_star_elsewhere() {
    let config = GridworldConfig::default();
    let env = build_gridworld(&config).unwrap();
    let careless = default_careless_states(&env.mdp, config.side);
    assert_eq!(careless.len(), 5);
    let q = optimal_q_values(&env.mdp);
    for s in 0..env.mdp.num_states {
        if env.mdp.is_terminal(s) {
            continue;
        }
        let row = &q[s * 4..s * 4 + 4];
        let (best, worst) = (greedy_action(row), worst_action(row));
        let b = env.behavior.row(s);
        if careless.contains(&s) {
            assert!((b[worst] - 0.9).abs() < 1e-12 && (b[best] - 0.1).abs() < 1e-12);
        } else {
            assert_eq!(b[best], 1.0);
        }
    }
}

#[test]
fn careless_state_out_of_range() {
    let config = GridworldConfig { careless_states: Some(vec![100]), ..Default::default() };
    assert!(matches!(build_gridworld(&config), Err(Error::OutOfRange { .. })));
}

#[test]
fn self_loop_runs_to_horizon() {
    let mdp = TabularMdp::new(
        "loop",
        1,
        1,
        vec![1.0],
        RewardSpec::uniform_pairs(1, 1, RewardDist::Constant { value: 0.0 }),
        0.9,
        0,
        &[],
    )
    .unwrap();
    let data = simulate(&mdp, &BehaviorPolicy::uniform(1, 1), 7, 5, 3).unwrap();
    assert_eq!(data.len(), 7);
    assert!(data.trajectories.iter().all(|t| t.steps.len() == 5));
}

#[test]
fn forest_root_exploration_rate() {
    let env = build_forest_mdp(&ForestConfig::default()).unwrap();
    let data = simulate(&env.mdp, &env.behavior, 1000, 4, 99).unwrap();
    let hits = data.trajectories.iter().filter(|t| t.steps[0].action == 0).count() as f64;
    let se = (0.1 * 0.9 / 1000.0f64).sqrt();
    assert!((hits / 1000.0 - 0.1).abs() <= 3.0 * se, "{hits}");
}

#[test]
fn simulate_is_reproducible_bytewise() {
    let env = build_gridworld(&GridworldConfig::default()).unwrap();
    let encode = |seed| {
        let mut buf = Vec::new();
        simulate(&env.mdp, &env.behavior, 20, 100, seed).unwrap().write_jsonl(&mut buf).unwrap();
        buf
    };
    assert_eq!(encode(5), encode(5));
    assert_ne!(encode(5), encode(6));
}

#[test]
fn trajectory_regenerates_independently() {
    let env = build_forest_mdp(&ForestConfig::default()).unwrap();
    let data = simulate(&env.mdp, &env.behavior, 10, 4, 42).unwrap();
    let t7 = simulate_one(&env.mdp, &env.behavior, 4, data.trajectories[7].seed);
    assert_eq!(t7, data.trajectories[7]);
}

#[test]
fn dataset_jsonl_round_trip() {
    let env = build_forest_mdp(&ForestConfig::default()).unwrap();
    let data = simulate(&env.mdp, &env.behavior, 100, 4, 1).unwrap();
    let mut buf = Vec::new();
    data.write_jsonl(&mut buf).unwrap();
    let back =
        TrajectoryDataset::read_jsonl(&buf[..], data.mdp_descriptor.clone(), data.behavior_descriptor.clone(), 1)
            .unwrap();
    assert_eq!(back, data);
    assert_eq!(back.len(), 100);
}

#[test]
fn rewards_within_declared_range() {
    for env in [
        build_forest_mdp(&ForestConfig::default()).unwrap(),
        build_cql_mdp(&CqlConfig::default()).unwrap(),
        build_gridworld(&GridworldConfig::default()).unwrap(),
    ] {
        let data = simulate(&env.mdp, &env.behavior, 200, 100, 8).unwrap();
        for step in data.trajectories.iter().flat_map(|t| &t.steps) {
            assert!(step.reward >= 0.0 && step.reward <= env.mdp.r_max, "{}", step.reward);
        }
    }
}

#[test]
fn estimates_on_single_action_state() {
    // Every trajectory visits s0 exactly once, always with a0: v = q exactly.
    let env = build_forest_mdp(&ForestConfig::default()).unwrap();
    let data = simulate(&env.mdp, &env.behavior, 300, 4, 4).unwrap();
    let est = mc_first_visit_estimates(&data, env.mdp.num_states, 3, 0.99).unwrap();
    let layout = ForestLayout { num_chains: 10, depth: 3 };
    let s = layout.middle(0);
    let counts = count_visits(&data, env.mdp.num_states, 3, VisitMode::FirstVisit).unwrap();
    for a in 0..3 {
        if counts.pair(s, a) == counts.state(s) {
            assert_eq!(est.q(s, a), est.v(s));
        }
    }
}

#[test]
fn first_visit_never_exceeds_every_visit() {
    let env = build_gridworld(&GridworldConfig::default()).unwrap();
    let data = simulate(&env.mdp, &env.behavior, 30, 100, 12).unwrap();
    let first = count_visits(&data, 100, 4, VisitMode::FirstVisit).unwrap();
    let every = count_visits(&data, 100, 4, VisitMode::EveryVisit).unwrap();
    assert!(first.pairs().iter().zip(every.pairs()).all(|(f, e)| f <= e));
    let est = mc_estimates(&data, 100, 4, 0.95, VisitMode::EveryVisit).unwrap();
    let v_max = env.mdp.v_max();
    for s in est.observed_states() {
        let v = est.v(s).unwrap();
        assert!((0.0..=v_max).contains(&v));
    }
}
