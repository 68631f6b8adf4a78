mod common;

use std::sync::Arc;

use bomai_core::explorer::{
    bomai_act, exploration_probability, information_gain, joint_bayes_predict, sample_exploration,
    ExplorationConfig, IGReport, MentorSource, PrimedPolicy, ScriptedMentor,
};
use bomai_core::model::{ConstantPolicy, UniformPolicy};
use bomai_core::planner::optimal_policy;
use bomai_core::spaces::{Action, Reward, Step};
use bomai_core::{CoreError, History, ModelClass, PolicyClass, PolicyModel, Result, Tracker, WorldModel};
use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CAP: f64 = 1e6;

fn config(eta: f64) -> ExplorationConfig {
    ExplorationConfig::new(eta, CAP).unwrap()
}

fn opposite_pair() -> (ModelClass, PolicyClass, Arc<bomai_core::Spaces>) {
    let sp = spaces(1);
    let one: Arc<dyn WorldModel> = Arc::new(constant("one", &sp, vec![(percept(2, Reward::ZERO), 1.0)]));
    let zero: Arc<dyn WorldModel> = Arc::new(constant("zero", &sp, vec![(percept(1, Reward::ZERO), 1.0)]));
    let models = ModelClass::uniform(vec![one, zero]).unwrap();
    let policies = PolicyClass::uniform(vec![Arc::new(UniformPolicy::new("u", &sp))]).unwrap();
    (models, policies, sp)
}

#[test]
fn information_gain_of_a_coin_between_two_certain_models() {
    let (models, policies, sp) = opposite_pair();
    let t = Tracker::new(&models, &policies);
    // Each outcome has predictive probability 1/2 and moves the posterior
    // from (1/2, 1/2) to a point mass: KL = ln 2.
    let oracle = 0.5 * (1.0f64 * (1.0f64 / 0.5).ln()) + 0.5 * (1.0f64 * (1.0f64 / 0.5).ln());
    let r = information_gain(&t, &models, &policies, &sp, &config(1.0)).unwrap();
    assert!((r.ig - oracle).abs() < 1e-12);
    assert!((r.p_exp - oracle).abs() < 1e-12);
    let r2 = information_gain(&t, &models, &policies, &sp, &config(2.0)).unwrap();
    assert_eq!(r2.p_exp, 1.0);
}

#[test]
fn clamp_behavior() {
    assert_eq!(exploration_probability(2.0, 0.75), 1.0);
    assert_eq!(exploration_probability(1.0, 0.75), 0.75);
    assert_eq!(exploration_probability(1.0, 0.0), 0.0);
}

#[test]
fn singleton_class_has_no_information_gain() {
    let sp = spaces(2);
    let models = ModelClass::uniform(vec![Arc::new(random_model("n", &sp, 2, 4))]).unwrap();
    let policies = PolicyClass::uniform(vec![Arc::new(UniformPolicy::new("u", &sp))]).unwrap();
    let t = Tracker::new(&models, &policies);
    let r = information_gain(&t, &models, &policies, &sp, &config(1.0)).unwrap();
    assert_eq!(r.ig, 0.0);
    assert_eq!(r.p_exp, 0.0);
}

#[test]
fn disagreeing_deterministic_models_split_blocks() {
    let sp = spaces(1);
    let one: Arc<dyn WorldModel> = Arc::new(constant("one", &sp, vec![(percept(2, Reward::ONE), 1.0)]));
    let zero: Arc<dyn WorldModel> = Arc::new(constant("zero", &sp, vec![(percept(1, Reward::ZERO), 1.0)]));
    let models = ModelClass::uniform(vec![one, zero]).unwrap();
    let policies = PolicyClass::uniform(vec![Arc::new(ConstantPolicy::new("a0", Action(0)))]).unwrap();
    let t = Tracker::new(&models, &policies);
    let blocks = joint_bayes_predict(&t, &models, &policies, &sp, CAP).unwrap();
    assert_eq!(blocks.len(), 2);
    for (_, p) in blocks {
        assert_eq!(p, 0.5);
    }
}

#[test]
fn singleton_joint_predictor_is_the_pair_measure() {
    let sp = spaces(2);
    let nu: Arc<dyn WorldModel> = Arc::new(random_model("n", &sp, 2, 8));
    let pi: Arc<dyn PolicyModel> = Arc::new(random_policy("p", Arc::new(random_model("t", &sp, 2, 9)), 10, false));
    let models = ModelClass::uniform(vec![nu.clone()]).unwrap();
    let policies = PolicyClass::uniform(vec![pi.clone()]).unwrap();
    let t = Tracker::new(&models, &policies);
    let h = History::new(sp.clone());
    for (block, p) in joint_bayes_predict(&t, &models, &policies, &sp, CAP).unwrap() {
        let direct = bomai_core::model::conditional_history_probability(nu.as_ref(), pi.as_ref(), &block, &h);
        assert!((p - direct).abs() <= 1e-15);
    }
}

#[test]
fn cap_is_enforced() {
    let (models, policies, sp) = opposite_pair();
    let t = Tracker::new(&models, &policies);
    let r = information_gain(&t, &models, &policies, &sp, &ExplorationConfig::new(1.0, 5.0).unwrap());
    assert!(matches!(r, Err(CoreError::Infeasible { .. })));
    assert!(ExplorationConfig::new(0.0, CAP).is_err());
}

fn report(p: f64) -> IGReport {
    IGReport { ig: p, ig_models: p, ig_policies: 0.0, p_exp: p, blocks: 1 }
}

#[test]
fn exploration_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    assert!((0..1000).all(|_| !sample_exploration(&report(0.0), &mut rng)));
    assert!((0..1000).all(|_| sample_exploration(&report(1.0), &mut rng)));
    let n = 10_000;
    let hits = (0..n).filter(|_| sample_exploration(&report(0.5), &mut rng)).count();
    let mean = hits as f64 / n as f64;
    assert!((0.48..=0.52).contains(&mean), "{mean}");
}

struct Unavailable;

impl MentorSource for Unavailable {
    fn mentor_action(&mut self, _h: &History) -> Result<Action> {
        Err(CoreError::Session("console disconnected".into()))
    }
}

#[test]
fn primed_policy_and_composite_action() {
    let sp = spaces(2);
    let nu: Arc<dyn WorldModel> = Arc::new(random_model("n", &sp, 2, 21));
    let (star, _) = optimal_policy(nu.clone(), nu.initial_context(), 0, &sp, CAP).unwrap();
    let uniform = UniformPolicy::new("u", &sp);
    let primed = PrimedPolicy::new(&uniform, &star);
    let ctx = uniform.initial_context();
    assert_eq!(primed.act(true, &ctx, &[]), uniform.act_in(&ctx).into_owned());
    let a = star.action_for(&[]);
    assert_eq!(primed.act(false, &ctx, &[]).items(), &[(a, 1.0)]);

    let self_primed = PrimedPolicy::new(&star, &star);
    let sctx = star.initial_context();
    for flag in [false, true] {
        assert_eq!(self_primed.act(flag, &sctx, &[]).items(), &[(a, 1.0)]);
    }

    let h = History::new(sp.clone());
    let mut mentor = ScriptedMentor::new(Arc::new(ConstantPolicy::new("c", Action(1))), ChaCha8Rng::seed_from_u64(1));
    assert_eq!(bomai_act(&h, false, &star, &mut mentor).unwrap(), a);
    assert_eq!(bomai_act(&h, true, &star, &mut mentor).unwrap(), Action(1));
    assert!(matches!(bomai_act(&h, true, &star, &mut Unavailable), Err(CoreError::Session(_))));
    assert_eq!(bomai_act(&h, false, &star, &mut Unavailable).unwrap(), a);
}

fn random_classes(seed: u64, m: usize) -> (ModelClass, PolicyClass, Arc<bomai_core::Spaces>) {
    let sp = spaces(m);
    let models: Vec<Arc<dyn WorldModel>> =
        (0..3).map(|k| Arc::new(random_model(&format!("n{k}"), &sp, 2, seed * 10 + k)) as _).collect();
    let tracker = Arc::new(random_model("t", &sp, 2, seed * 10 + 7));
    let policies: Vec<Arc<dyn PolicyModel>> = vec![
        Arc::new(random_policy("p0", tracker.clone(), seed * 10 + 8, false)),
        Arc::new(random_policy("p1", tracker, seed * 10 + 9, true)),
    ];
    (ModelClass::new(models, vec![0.2, 0.3, 0.5]).unwrap(), PolicyClass::new(policies, vec![0.6, 0.4]).unwrap(), sp)
}

/// Joint posterior over all (ν, π) pairs after a hypothetical exploratory block.
fn pair_posterior(models: &ModelClass, policies: &PolicyClass, t: &Tracker, block: &[Step]) -> (Vec<f64>, f64) {
    let mut joint = Vec::new();
    for v in 0..models.len() {
        for p in 0..policies.len() {
            let nu = models.get(v);
            let pi = policies.get(p);
            let mut nc = t.model_context(v).clone();
            let mut pc = t.policy_context(p).clone();
            let mut l = t.posterior.joint_weight(v, p);
            for s in block {
                l *= pi.action_prob(&pc, s.action) * nu.percept_prob(&nc, s.action, &s.percept);
                nc = nu.advance(&nc, s);
                pc = pi.advance(&pc, s);
            }
            joint.push(l);
        }
    }
    let z: f64 = joint.iter().sum();
    (joint.iter().map(|x| if z > 0.0 { x / z } else { 0.0 }).collect(), z)
}

/// Literal double sum over every block and every (ν, π) pair.
fn brute_force_ig(models: &ModelClass, policies: &PolicyClass, t: &Tracker, m: usize) -> (f64, f64) {
    let sp = spaces(m);
    let mut current = Vec::new();
    for v in 0..models.len() {
        for p in 0..policies.len() {
            current.push(t.posterior.joint_weight(v, p));
        }
    }
    let mut ig = 0.0;
    let mut mass = 0.0;
    for block in all_blocks(&sp, m) {
        let (post, bayes) = pair_posterior(models, policies, t, &block);
        if bayes == 0.0 {
            continue;
        }
        mass += bayes;
        let kl: f64 = post
            .iter()
            .zip(&current)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, w0)| w * (w / w0).ln())
            .sum();
        ig += bayes * kl;
    }
    (ig, mass)
}

fn advance_randomly(models: &ModelClass, policies: &PolicyClass, seed: u64, episodes: usize, m: usize) -> Tracker {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tracker::new(models, policies);
    let truth = models.get(0).clone();
    let mut ctx = truth.initial_context();
    for _ in 0..episodes {
        for _ in 0..m {
            let a = Action(rng.random_range(0..2));
            let p = *truth.predict_in(&ctx, a).sample(&mut rng);
            let s = Step { action: a, percept: p };
            t.observe(models, policies, &s).unwrap();
            ctx = truth.advance(&ctx, &s);
        }
        t.close_episode(false).unwrap();
    }
    t
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn information_gain_matches_literal_sum(seed in 0u64..10_000, m in 1usize..3, episodes in 0usize..4) {
        let (models, policies, sp) = random_classes(seed, m);
        let t = advance_randomly(&models, &policies, seed, episodes, m);
        let r = information_gain(&t, &models, &policies, &sp, &config(1.0)).unwrap();
        let (oracle, mass) = brute_force_ig(&models, &policies, &t, m);
        prop_assert!((mass - 1.0).abs() < 1e-9);
        prop_assert!(r.ig >= 0.0 && r.ig.is_finite());
        prop_assert!((r.ig - oracle).abs() <= 1e-10 + 1e-9 * oracle, "{} vs {}", r.ig, oracle);
    }

    #[test]
    fn joint_predictor_matches_literal_sum(seed in 0u64..10_000, m in 1usize..3) {
        let (models, policies, sp) = random_classes(seed, m);
        let t = advance_randomly(&models, &policies, seed + 1, 2, m);
        let blocks = joint_bayes_predict(&t, &models, &policies, &sp, CAP).unwrap();
        let total: f64 = blocks.iter().map(|(_, p)| p).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        for (block, p) in &blocks {
            let (_, bayes) = pair_posterior(&models, &policies, &t, block);
            prop_assert!((p - bayes).abs() <= 1e-14);
        }
    }
}
