//! Exploration: the joint Bayes predictor, information gain, exploration
//! sampling and the composite policy.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bayes::{ModelClass, PolicyClass, Tracker};
use crate::dist::Distribution;
use crate::error::{check_cap, CoreError, Result};
use crate::history::History;
use crate::model::{Context, PolicyModel};
use crate::planner::DeterministicEpisodePolicy;
use crate::spaces::{Action, Percept, Spaces, Step};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplorationConfig {
    pub eta: f64,
    pub cap: f64,
}

impl ExplorationConfig {
    pub fn new(eta: f64, cap: f64) -> Result<ExplorationConfig> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(CoreError::Config(format!("exploration constant must be positive, got {eta}")));
        }
        Ok(ExplorationConfig { eta, cap })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IGReport {
    pub ig: f64,
    /// Expected KL over the model posterior alone.
    pub ig_models: f64,
    /// Expected KL over the policy posterior alone.
    pub ig_policies: f64,
    pub p_exp: f64,
    /// Number of episode blocks with positive predictive probability.
    pub blocks: usize,
}

/// `min{1, η·ig}`.
pub fn exploration_probability(eta: f64, ig: f64) -> f64 {
    (eta * ig).min(1.0)
}

/// Visits every episode block with positive probability under the joint
/// Bayes predictor, carrying each member's likelihood of the block so far.
struct BlockWalk<'a, F: FnMut(&[Step], &[f64], &[f64], f64, f64)> {
    models: &'a ModelClass,
    policies: &'a PolicyClass,
    wm: Vec<f64>,
    wp: Vec<f64>,
    actions: Vec<Action>,
    m: usize,
    suffix: Vec<Step>,
    visit: F,
}

impl<F: FnMut(&[Step], &[f64], &[f64], f64, f64)> BlockWalk<'_, F> {
    fn descend(&mut self, lm: &[f64], lp: &[f64], mctx: &[Context], pctx: &[Context]) {
        if self.suffix.len() == self.m {
            let zm: f64 = self.wm.iter().zip(lm).map(|(w, l)| w * l).sum();
            let zp: f64 = self.wp.iter().zip(lp).map(|(w, l)| w * l).sum();
            (self.visit)(&self.suffix, lm, lp, zm, zp);
            return;
        }
        let nm = self.models.len();
        let np = self.policies.len();
        for ai in 0..self.actions.len() {
            let a = self.actions[ai];
            let mut lp_next = vec![0.0; np];
            let mut any = false;
            for k in 0..np {
                if lp[k] > 0.0 && self.wp[k] > 0.0 {
                    lp_next[k] = lp[k] * self.policies.get(k).action_prob(&pctx[k], a);
                    any |= lp_next[k] > 0.0;
                }
            }
            if !any {
                continue;
            }
            let mut dists = Vec::with_capacity(nm);
            let mut percepts: Vec<Percept> = Vec::new();
            for k in 0..nm {
                if lm[k] > 0.0 && self.wm[k] > 0.0 {
                    let d = self.models.get(k).predict_in(&mctx[k], a).into_owned();
                    for (p, q) in d.items() {
                        if *q > 0.0 && !percepts.contains(p) {
                            percepts.push(*p);
                        }
                    }
                    dists.push(Some(d));
                } else {
                    dists.push(None);
                }
            }
            for p in percepts {
                let step = Step { action: a, percept: p };
                let mut lm_next = vec![0.0; nm];
                let mut next_mctx = mctx.to_vec();
                for k in 0..nm {
                    if let Some(d) = &dists[k] {
                        lm_next[k] = lm[k] * d.prob(&p);
                        if lm_next[k] > 0.0 {
                            next_mctx[k] = self.models.get(k).advance(&mctx[k], &step);
                        }
                    }
                }
                let next_pctx: Vec<Context> = (0..np)
                    .map(|k| if lp_next[k] > 0.0 { self.policies.get(k).advance(&pctx[k], &step) } else { pctx[k].clone() })
                    .collect();
                self.suffix.push(step);
                self.descend(&lm_next, &lp_next, &next_mctx, &next_pctx);
                self.suffix.pop();
            }
        }
    }
}

fn walk_blocks<F: FnMut(&[Step], &[f64], &[f64], f64, f64)>(
    tracker: &Tracker,
    models: &ModelClass,
    policies: &PolicyClass,
    spaces: &Spaces,
    cap: f64,
    visit: F,
) -> Result<()> {
    check_cap(spaces.step_outcomes(), spaces.m(), cap)?;
    let mut walk = BlockWalk {
        models,
        policies,
        wm: tracker.posterior.model_weights(),
        wp: tracker.posterior.policy_weights(),
        actions: spaces.actions().collect(),
        m: spaces.m(),
        suffix: Vec::with_capacity(spaces.m()),
        visit,
    };
    walk.descend(
        &vec![1.0; models.len()],
        &vec![1.0; policies.len()],
        tracker.model_contexts(),
        tracker.policy_contexts(),
    );
    Ok(())
}

/// `Bayes(h_i | h_{<i}, e_{<i})` for every episode block of positive probability.
pub fn joint_bayes_predict(
    tracker: &Tracker,
    models: &ModelClass,
    policies: &PolicyClass,
    spaces: &Spaces,
    cap: f64,
) -> Result<Vec<(Vec<Step>, f64)>> {
    let mut out = Vec::new();
    walk_blocks(tracker, models, policies, spaces, cap, |block, _, _, zm, zp| {
        out.push((block.to_vec(), zm * zp));
    })?;
    Ok(out)
}

/// `Σ_k w'_k ln(w'_k / w_k)` with `w'_k = w_k L_k / Z`.
fn kl_after(w: &[f64], lik: &[f64], z: f64) -> f64 {
    let mut kl = 0.0;
    for (wk, lk) in w.iter().zip(lik) {
        if *wk > 0.0 && *lk > 0.0 {
            kl += wk * lk / z * (lk / z).ln();
        }
    }
    kl.max(0.0)
}

/// Expected information gain from exploring the next episode, with the
/// hypothetical flag set to 1 so that policies update too.
pub fn information_gain(
    tracker: &Tracker,
    models: &ModelClass,
    policies: &PolicyClass,
    spaces: &Spaces,
    config: &ExplorationConfig,
) -> Result<IGReport> {
    let wm = tracker.posterior.model_weights();
    let wp = tracker.posterior.policy_weights();
    let mut ig_models = 0.0;
    let mut ig_policies = 0.0;
    let mut blocks = 0;
    walk_blocks(tracker, models, policies, spaces, config.cap, |_, lm, lp, zm, zp| {
        let prob = zm * zp;
        ig_models += prob * kl_after(&wm, lm, zm);
        ig_policies += prob * kl_after(&wp, lp, zp);
        blocks += 1;
    })?;
    let ig = ig_models + ig_policies;
    if !ig.is_finite() || ig < 0.0 {
        return Err(CoreError::Distribution(format!("information gain {ig}")));
    }
    Ok(IGReport { ig, ig_models, ig_policies, p_exp: exploration_probability(config.eta, ig), blocks })
}

/// `e_i ~ Bernoulli(p_exp)`.
pub fn sample_exploration<R: Rng + ?Sized>(report: &IGReport, rng: &mut R) -> bool {
    let u: f64 = rng.random();
    u < report.p_exp
}

/// `π′`: mimics `π` in exploratory episodes and `π*` otherwise.
pub struct PrimedPolicy<'a> {
    base: &'a dyn PolicyModel,
    star: &'a DeterministicEpisodePolicy,
}

impl<'a> PrimedPolicy<'a> {
    pub fn new(base: &'a dyn PolicyModel, star: &'a DeterministicEpisodePolicy) -> PrimedPolicy<'a> {
        PrimedPolicy { base, star }
    }

    /// `base_ctx` summarizes the whole history for `π`; `suffix` is the
    /// current episode so far, which is all `π*` reads.
    pub fn act(&self, flag: bool, base_ctx: &Context, suffix: &[Step]) -> Distribution<Action> {
        if flag {
            self.base.act_in(base_ctx).into_owned()
        } else {
            Distribution::point(self.star.action_for(suffix))
        }
    }

    pub fn action_prob(&self, flag: bool, base_ctx: &Context, suffix: &[Step], a: Action) -> f64 {
        if flag {
            self.base.action_prob(base_ctx, a)
        } else {
            self.star.action_prob(suffix, a)
        }
    }
}

/// Where mentor actions come from in exploratory episodes.
pub trait MentorSource {
    fn mentor_action(&mut self, h: &History) -> Result<Action>;
}

/// A scripted mentor sampling from a policy model on its own RNG stream.
pub struct ScriptedMentor<R> {
    policy: Arc<dyn PolicyModel>,
    rng: R,
}

impl<R: Rng> ScriptedMentor<R> {
    pub fn new(policy: Arc<dyn PolicyModel>, rng: R) -> ScriptedMentor<R> {
        ScriptedMentor { policy, rng }
    }

    /// Samples given a context already folded over the history.
    pub fn sample_in(&mut self, ctx: &Context) -> Action {
        *self.policy.act_in(ctx).sample(&mut self.rng)
    }
}

impl<R: Rng> MentorSource for ScriptedMentor<R> {
    fn mentor_action(&mut self, h: &History) -> Result<Action> {
        let ctx = self.policy.context_for(h.steps());
        Ok(self.sample_in(&ctx))
    }
}

/// `π^B`: the planner's action when exploiting, the mentor's when exploring.
pub fn bomai_act(
    h: &History,
    explore: bool,
    star: &DeterministicEpisodePolicy,
    mentor: &mut dyn MentorSource,
) -> Result<Action> {
    if explore {
        mentor.mentor_action(h)
    } else {
        Ok(star.action_for(h.current_suffix()))
    }
}
