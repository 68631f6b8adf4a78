mod common;

use std::borrow::Cow;
use std::collections::HashMap;
use std::sync::Arc;

use bomai_core::dist::Distribution;
use bomai_core::model::{ConstantPolicy, UniformPolicy};
use bomai_core::planner::{optimal_policy, optimal_policy_for, value_from, value_of_policy, ReplanningPolicy};
use bomai_core::spaces::{Action, Reward, Step};
use bomai_core::{Context, CoreError, History, PolicyModel, WorldModel};
use common::*;
use proptest::prelude::*;

const CAP: f64 = 1e6;

/// A deterministic episode policy given by an explicit suffix table.
struct TablePolicy {
    table: HashMap<Vec<Step>, Action>,
    m: usize,
}

impl PolicyModel for TablePolicy {
    fn descriptor(&self) -> &str {
        "table"
    }
    fn initial_context(&self) -> Context {
        Context::Shared(Arc::new(Vec::<Step>::new()))
    }
    fn act_in(&self, ctx: &Context) -> Cow<'_, Distribution<Action>> {
        let s = ctx.shared::<Vec<Step>>();
        Cow::Owned(Distribution::point(*self.table.get(s).unwrap_or(&Action(0))))
    }
    fn advance(&self, ctx: &Context, step: &Step) -> Context {
        let mut s = ctx.shared::<Vec<Step>>().clone();
        s.push(*step);
        if s.len() == self.m {
            s.clear();
        }
        Context::Shared(Arc::new(s))
    }
}

fn bernoulli_reward(sp: &Arc<bomai_core::Spaces>, p0: f64, p1: f64) -> bomai_core::TabularWorldModel {
    let hit = percept(1, Reward::ONE);
    let miss = percept(1, Reward::ZERO);
    stateless("bern", sp, vec![vec![(hit, p0), (miss, 1.0 - p0)], vec![(hit, p1), (miss, 1.0 - p1)]])
}

#[test]
fn forced_rewards_sum() {
    let sp = spaces(2);
    let nu = constant("ones", &sp, vec![(percept(1, Reward::ONE), 1.0)]);
    let pi = UniformPolicy::new("u", &sp);
    assert_eq!(value_of_policy(&nu, &pi, &History::new(sp.clone()), CAP).unwrap(), 2.0);
    let ctx = nu.initial_context();
    assert_eq!(value_from(&nu, &pi, &ctx, &pi.initial_context(), 2, &sp, CAP).unwrap(), 0.0);
}

#[test]
fn uniform_policy_value() {
    let sp = spaces(1);
    let nu = bernoulli_reward(&sp, 0.6, 0.2);
    let pi = UniformPolicy::new("u", &sp);
    let oracle = 0.5 * 0.6 + 0.5 * 0.2;
    let v = value_of_policy(&nu, &pi, &History::new(sp), CAP).unwrap();
    assert!((v - oracle).abs() < 1e-15);
}

#[test]
fn optimal_picks_best_single_action() {
    let sp = spaces(1);
    let nu: Arc<dyn WorldModel> = Arc::new(bernoulli_reward(&sp, 0.6, 0.5));
    let h = History::new(sp.clone());
    let brute: Vec<f64> = [Action(0), Action(1)]
        .iter()
        .map(|&a| value_of_policy(nu.as_ref(), &ConstantPolicy::new("c", a), &h, CAP).unwrap())
        .collect();
    let (pi, v) = optimal_policy_for(nu, &h, CAP).unwrap();
    assert_eq!(pi.action_for(&[]), Action(0));
    assert_eq!(v, brute[0].max(brute[1]));
    assert!((v - 0.6).abs() < 1e-15);
}

#[test]
fn ties_and_zero_rewards() {
    let sp = spaces(2);
    let same: Arc<dyn WorldModel> = Arc::new(constant("same", &sp, vec![(percept(1, half()), 1.0)]));
    let (pi, v) = optimal_policy_for(same, &History::new(sp.clone()), CAP).unwrap();
    assert_eq!(pi.action_for(&[]), Action(0));
    assert_eq!(v, 1.0);
    let zero: Arc<dyn WorldModel> = Arc::new(constant("zero", &sp, vec![(percept(2, Reward::ZERO), 1.0)]));
    let (_, v) = optimal_policy_for(zero, &History::new(sp), CAP).unwrap();
    assert_eq!(v, 0.0);
}

#[test]
fn cap_exceeded() {
    let sp = spaces(2);
    let nu: Arc<dyn WorldModel> = Arc::new(random_model("n", &sp, 2, 1));
    let r = optimal_policy_for(nu.clone(), &History::new(sp.clone()), 100.0);
    assert!(matches!(r, Err(CoreError::Infeasible { .. })));
    let r = value_of_policy(nu.as_ref(), &UniformPolicy::new("u", &sp), &History::new(sp.clone()), 100.0);
    assert!(matches!(r, Err(CoreError::Infeasible { .. })));
}

#[test]
fn planning_requires_boundary() {
    let sp = spaces(2);
    let nu: Arc<dyn WorldModel> = Arc::new(random_model("n", &sp, 2, 1));
    let h = History::from_parts(sp, vec![Step { action: Action(0), percept: percept(1, Reward::ONE) }], vec![])
        .unwrap();
    assert!(optimal_policy_for(nu, &h, CAP).is_err());
}

/// Every deterministic two-step policy that differs on reachable suffixes.
fn all_two_step_policies(sp: &bomai_core::Spaces) -> Vec<TablePolicy> {
    let percepts = sp.percepts();
    let mut out = Vec::new();
    for root in sp.actions() {
        for bits in 0u32..(1 << percepts.len()) {
            let mut table = HashMap::new();
            table.insert(vec![], root);
            for (k, p) in percepts.iter().enumerate() {
                let a = Action(((bits >> k) & 1) as u8);
                table.insert(vec![Step { action: root, percept: *p }], a);
            }
            out.push(TablePolicy { table, m: 2 });
        }
    }
    out
}

#[test]
fn exhaustive_optimality_two_steps() {
    let sp = spaces(2);
    let policies = all_two_step_policies(&sp);
    assert_eq!(policies.len(), 2 * 512);
    for seed in 0..6 {
        let nu: Arc<dyn WorldModel> = Arc::new(random_model("n", &sp, 3, seed));
        let h = History::new(sp.clone());
        let (_, opt) = optimal_policy_for(nu.clone(), &h, CAP).unwrap();
        let mut best = f64::NEG_INFINITY;
        for pi in &policies {
            let v = value_of_policy(nu.as_ref(), pi, &h, CAP).unwrap();
            assert!(v <= opt + 1e-12);
            best = best.max(v);
        }
        assert!((best - opt).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn replanning_matches_fresh_plans(seed in 0u64..100_000, walk in prop::collection::vec(0usize..64, 6)) {
        let sp = spaces(2);
        let nu: Arc<dyn WorldModel> = Arc::new(random_model("n", &sp, 3, seed));
        let star = ReplanningPolicy::new(nu.clone(), sp.clone(), CAP).unwrap();
        let mut h = History::new(sp.clone());
        let mut ctx = star.initial_context();
        for k in walk {
            let a = star.act_in(&ctx).items()[0].0;
            let at = h.len() % 2;
            let fresh = optimal_policy_for(nu.clone(), &h.episode_prefix(h.completed_episodes()).unwrap(), CAP).unwrap().0;
            prop_assert_eq!(a, fresh.action_for(&h.steps()[h.len() - at..]));
            let dist = nu.predict(&h, a);
            let p = dist.items()[k % dist.len()].0;
            let s = Step { action: a, percept: p };
            ctx = star.advance(&ctx, &s);
            h.push_step(s).unwrap();
        }
    }


    #[test]
    fn bellman_consistency(seed in 0u64..100_000, m in 1usize..4) {
        let sp = spaces(m);
        let nu: Arc<dyn WorldModel> = Arc::new(random_model("n", &sp, 3, seed));
        let (pi, v) = optimal_policy(nu.clone(), nu.initial_context(), 0, &sp, CAP).unwrap();
        for (suffix, (a, value)) in pi.table() {
            let ctx = nu.context_for(suffix);
            let mut q = 0.0;
            for (p, prob) in nu.predict_in(&ctx, *a).items() {
                let mut child = suffix.clone();
                child.push(Step { action: *a, percept: *p });
                let cv = if child.len() == m { 0.0 } else { pi.table()[&child].1 };
                q += prob * (p.reward.to_f64() + cv);
            }
            prop_assert!((q - value).abs() <= 1e-12);
            let depth = suffix.len() as f64;
            prop_assert!(*value >= 0.0 && *value <= m as f64 - depth + 1e-12);
        }
        prop_assert_eq!(pi.table()[&Vec::<Step>::new()].1, v);
    }

    #[test]
    fn returned_value_is_exact(seed in 0u64..100_000, m in 1usize..4, pre in 0usize..3) {
        let sp = spaces(m);
        let nu: Arc<dyn WorldModel> = Arc::new(random_model("n", &sp, 3, seed));
        let mut h = History::new(sp.clone());
        let mut ctx = nu.initial_context();
        for k in 0..pre * m {
            let a = Action((k % 2) as u8);
            let p = nu.predict_in(&ctx, a).items()[0].0;
            let s = Step { action: a, percept: p };
            ctx = nu.advance(&ctx, &s);
            h.push_step(s).unwrap();
        }
        let (pi, v) = optimal_policy_for(nu.clone(), &h, CAP).unwrap();
        let again = value_from(nu.as_ref(), &pi, &nu.context_for(h.steps()), &pi.initial_context(), 0, &sp, CAP).unwrap();
        prop_assert_eq!(again, v);
    }

    #[test]
    fn optimal_dominates_random_policies(seed in 0u64..100_000) {
        let sp = spaces(2);
        let nu: Arc<dyn WorldModel> = Arc::new(random_model("n", &sp, 2, seed));
        let tracker = Arc::new(random_model("t", &sp, 2, seed + 1));
        let pi = random_policy("p", tracker, seed + 2, false);
        let h = History::new(sp.clone());
        let (_, opt) = optimal_policy_for(nu.clone(), &h, CAP).unwrap();
        prop_assert!(value_of_policy(nu.as_ref(), &pi, &h, CAP).unwrap() <= opt + 1e-12);
    }
}
