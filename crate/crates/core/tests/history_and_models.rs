mod common;

use std::sync::Arc;

use bomai_core::model::{
    conditional_history_probability, history_probability, ConstantPolicy, UniformPolicy,
};
use bomai_core::spaces::{Action, Observation, Reward, Step, Timestep};
use bomai_core::History;
use common::*;
use proptest::prelude::*;

#[test]
fn empty_history_has_probability_one() {
    let sp = spaces(2);
    let nu = random_model("nu", &sp, 2, 1);
    let pi = UniformPolicy::new("u", &sp);
    assert_eq!(history_probability(&nu, &pi, &History::new(sp)), 1.0);
}

#[test]
fn deterministic_match_has_probability_one() {
    let sp = spaces(2);
    let p = percept(1, Reward::ONE);
    let nu = constant("det", &sp, vec![(p, 1.0)]);
    let pi = ConstantPolicy::new("a1", Action(1));
    let step = Step { action: Action(1), percept: p };
    let h = History::from_parts(sp, vec![step; 3], vec![]).unwrap();
    assert_eq!(history_probability(&nu, &pi, &h), 1.0);
}

#[test]
fn single_step_product() {
    let sp = spaces(1);
    let p = percept(1, half());
    let q = percept(2, Reward::ZERO);
    let nu = constant("nu", &sp, vec![(p, 0.5), (q, 0.5)]);
    let pi = UniformPolicy::new("u", &sp);
    let h = History::from_parts(sp, vec![Step { action: Action(0), percept: p }], vec![]).unwrap();
    let oracle = 0.5 * 0.5;
    assert!((history_probability(&nu, &pi, &h) - oracle).abs() < 1e-15);
}

#[test]
fn conditional_examples() {
    let sp = spaces(1);
    let p = percept(1, Reward::ONE);
    let q = percept(2, Reward::ZERO);
    let nu = constant("nu", &sp, vec![(p, 0.6), (q, 0.4)]);
    let uniform = UniformPolicy::new("u", &sp);
    let given = History::new(sp.clone());
    let block = [Step { action: Action(1), percept: p }];
    let oracle = 0.5 * 0.6;
    assert!((conditional_history_probability(&nu, &uniform, &block, &given) - oracle).abs() < 1e-15);

    let a0 = ConstantPolicy::new("a0", Action(0));
    assert_eq!(conditional_history_probability(&nu, &a0, &block, &given), 0.0);

    let det = constant("det", &sp, vec![(p, 1.0)]);
    let block = [Step { action: Action(0), percept: p }];
    assert_eq!(conditional_history_probability(&det, &a0, &block, &given), 1.0);
}

#[test]
fn measure_sums_to_one_exhaustively() {
    for m in [1, 2] {
        let sp = spaces(m);
        let nu = random_model("nu", &sp, 3, 7 + m as u64);
        let tracker = Arc::new(random_model("t", &sp, 2, 99));
        let pi = common::random_policy("pi", tracker, 5, false);
        for n in 1..=(4 / m) {
            let total: f64 = all_blocks(&sp, n * m)
                .into_iter()
                .map(|steps| {
                    let h = History::from_parts(sp.clone(), steps, vec![]).unwrap();
                    history_probability(&nu, &pi, &h)
                })
                .sum();
            assert!((total - 1.0).abs() < 1e-12, "m={m} n={n} total={total}");
        }
    }
}

#[test]
fn timestep_order_is_lexicographic() {
    let m = 4;
    let mut all: Vec<Timestep> = (0..20).map(|t| Timestep::from_flat(t, m)).collect();
    all.reverse();
    all.sort();
    let flat: Vec<usize> = all.iter().map(|t| t.flat(m)).collect();
    assert_eq!(flat, (0..20).collect::<Vec<_>>());
    assert!(Timestep { episode: 0, step: 3 } < Timestep { episode: 1, step: 0 });
}

fn arb_steps(max: usize) -> impl Strategy<Value = Vec<Step>> {
    prop::collection::vec((0u8..2, 0u8..3, 0usize..3), 0..max).prop_map(|v| {
        let sp = spaces(2);
        v.into_iter()
            .map(|(a, o, r)| Step::new(Action(a), Observation(o), sp.rewards()[r]))
            .collect()
    })
}

proptest! {
    #[test]
    fn prefix_round_trip(steps in arb_steps(12), extra in 0usize..2) {
        let sp = spaces(2);
        let episodes = steps.len() / 2;
        let flags: Vec<bool> = (0..episodes + extra.min(1)).map(|k| k % 3 == 0).collect();
        let h = History::from_parts(sp, steps, flags).unwrap();
        for i in 0..=episodes {
            let mut p = h.episode_prefix(i).unwrap();
            prop_assert_eq!(p.len(), i * 2);
            prop_assert_eq!(p.flags(), &h.flags()[..i]);
            for s in &h.steps()[i * 2..] {
                p.push_step(*s).unwrap();
            }
            for f in &h.flags()[i..] {
                p.push_flag(*f).unwrap();
            }
            prop_assert_eq!(&p, &h);
        }
    }

    #[test]
    fn chain_rule_split(seed in 0u64..1000, steps in arb_steps(8)) {
        let sp = spaces(2);
        let nu = random_model("nu", &sp, 2, seed);
        let tracker = Arc::new(random_model("t", &sp, 2, seed + 1));
        let pi = common::random_policy("pi", tracker, seed + 2, false);
        let n = steps.len() / 2 * 2;
        let h = History::from_parts(sp.clone(), steps[..n].to_vec(), vec![]).unwrap();
        let whole = history_probability(&nu, &pi, &h);
        for i in 0..n / 2 {
            let prefix = h.episode_prefix(i).unwrap();
            let rest = &h.steps()[i * 2..];
            let mut prod = history_probability(&nu, &pi, &prefix);
            let mut given = prefix.clone();
            for block in rest.chunks(2) {
                prod *= conditional_history_probability(&nu, &pi, block, &given);
                for s in block {
                    given.push_step(*s).unwrap();
                }
            }
            prop_assert!((prod - whole).abs() <= 1e-12 * whole.max(1e-300));
        }
    }

    #[test]
    fn predictions_are_referentially_transparent(seed in 0u64..1000, steps in arb_steps(6)) {
        let sp = spaces(2);
        let nu = random_model("nu", &sp, 3, seed);
        let h = History::from_parts(sp, steps, vec![]).unwrap();
        use bomai_core::WorldModel;
        for a in [Action(0), Action(1)] {
            prop_assert_eq!(nu.predict(&h, a), nu.predict(&h, a));
        }
    }
}
