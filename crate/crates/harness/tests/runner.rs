use std::sync::Arc;

use bomai_harness::runner::{run_experiment, run_many, stream, ENV_STREAM, EXPLORATION_STREAM};
use bomai_harness::{Experiment, ExperimentConfig};
use rand::Rng;

fn short(episodes: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::acceptance();
    c.episodes = episodes;
    c
}

#[test]
fn singleton_classes_never_explore() {
    let mut c = short(30);
    c.models.tabular = vec!["operator".into()];
    c.policies.members = vec!["greedy".into()];
    let exp = Arc::new(Experiment::build(&c).unwrap());
    let r = run_experiment(&exp, 3).unwrap();
    for row in &r.rows {
        assert_eq!(row.p_exp, 0.0);
        assert_eq!(row.ig, 0.0);
        assert!(!row.e);
        assert_eq!(row.map_id, "operator");
        assert_eq!(row.w_mu, 1.0);
        assert_eq!(row.z, 1.0);
    }
    assert_eq!(exp.theorem1_bound(), 0.0);
}

#[test]
fn same_seed_same_record() {
    let exp = Arc::new(Experiment::build(&short(40)).unwrap());
    let a = run_experiment(&exp, 11).unwrap();
    let b = run_experiment(&exp, 11).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_csv_string().unwrap(), b.to_csv_string().unwrap());
    assert_eq!(a.to_jsonl_string().unwrap(), b.to_jsonl_string().unwrap());
    let rebuilt = Arc::new(Experiment::build(&short(40)).unwrap());
    assert_eq!(run_experiment(&rebuilt, 11).unwrap(), a);
}

#[test]
fn seeds_differ_and_parallel_matches_serial() {
    let exp = Arc::new(Experiment::build(&short(25)).unwrap());
    let many = run_many(&exp, 5, 4).unwrap();
    for (k, r) in many.iter().enumerate() {
        assert_eq!(r.meta.seed, 5 + k as u64);
        assert_eq!(*r, run_experiment(&exp, 5 + k as u64).unwrap());
    }
    assert_ne!(many[0].rows, many[1].rows);
}

#[test]
fn streams_are_independent() {
    let mut a = stream(7, EXPLORATION_STREAM);
    let mut b = stream(7, ENV_STREAM);
    let xs: Vec<u64> = (0..4).map(|_| a.random()).collect();
    let ys: Vec<u64> = (0..4).map(|_| b.random()).collect();
    assert_ne!(xs, ys);
}

#[test]
fn rows_are_consistent() {
    let exp = Arc::new(Experiment::build(&short(60)).unwrap());
    let r = run_experiment(&exp, 2).unwrap();
    assert_eq!(r.rows.len(), 60);
    let m = exp.spaces.m();
    for (i, row) in r.rows.iter().enumerate() {
        assert_eq!(row.episode, i);
        assert_eq!(row.steps.len(), m);
        assert!((0.0..=1.0).contains(&row.p_exp));
        assert_eq!(row.p_exp, (exp.config.eta * row.ig).min(1.0));
        assert!((row.ig - row.ig_models - row.ig_policies).abs() <= 1e-12);
        assert!((row.z * row.w_mu * row.w_pih - 1.0).abs() <= 1e-12);
        assert!(row.episode_reward >= 0.0 && row.episode_reward <= m as f64);
        assert_eq!(row.map_id, exp.models.get(row.map_index).descriptor());
        assert!(row.tv_mentor >= 0.0 && row.tv_mentor <= 1.0 + 1e-12);
    }
    assert!(r.rows[0].p_exp > 0.0);
    // uniform over 4 models and 2 policies
    assert!((r.rows[0].z - 8.0).abs() <= 1e-12);
}

#[test]
fn three_step_episodes_run() {
    let mut c = short(20);
    c.spaces.m = 3;
    c.caps.tv_horizon = 1;
    let exp = Arc::new(Experiment::build(&c).unwrap());
    let r = run_experiment(&exp, 1).unwrap();
    assert_eq!(r.rows.len(), 20);
    assert!(r.rows.iter().all(|row| row.steps.len() == 3));
    assert!(r.rows.iter().all(|row| row.lemma1_rel_err.unwrap() <= 1e-9));
}

#[test]
fn infeasible_horizon_is_reported_with_the_episode() {
    let mut c = short(3);
    c.spaces.m = 3;
    let exp = Arc::new(Experiment::build(&c).unwrap());
    let err = run_experiment(&exp, 0).unwrap_err().to_string();
    assert!(err.starts_with("episode 0"), "{err}");
}
