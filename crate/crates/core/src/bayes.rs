//! Posteriors over world-models and mentor policies.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dist::Distribution;
use crate::error::{check_cap, CoreError, Result};
use crate::explorer::PrimedPolicy;
use crate::model::{Context, PolicyModel, WorldModel};
use crate::planner::DeterministicEpisodePolicy;
use crate::spaces::{Action, Percept, Spaces, Step};

/// Weights must sum to one within this tolerance.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

pub fn logsumexp(xs: &[f64]) -> f64 {
    let mx = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    mx + xs.iter().map(|x| (x - mx).exp()).sum::<f64>().ln()
}

fn log_prior(prior: &[f64], what: &str) -> Result<Vec<f64>> {
    if prior.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(CoreError::Config(format!("{what} prior has invalid entries")));
    }
    let total: f64 = prior.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(CoreError::Config(format!("{what} prior sums to {total}")));
    }
    Ok(prior.iter().map(|p| p.ln()).collect())
}

/// Shannon entropy in nats.
pub fn entropy(weights: &[f64]) -> f64 {
    weights.iter().filter(|w| **w > 0.0).map(|w| -w * w.ln()).sum()
}

/// An ordered model class ℳ with its prior.
#[derive(Clone)]
pub struct ModelClass {
    models: Vec<Arc<dyn WorldModel>>,
    prior: Vec<f64>,
}

impl ModelClass {
    pub fn new(models: Vec<Arc<dyn WorldModel>>, prior: Vec<f64>) -> Result<ModelClass> {
        if models.is_empty() || models.len() != prior.len() {
            return Err(CoreError::Config("model class and prior must be nonempty and aligned".into()));
        }
        for (k, m) in models.iter().enumerate() {
            if models[..k].iter().any(|x| x.descriptor() == m.descriptor()) {
                return Err(CoreError::Config(format!("duplicate model descriptor {:?}", m.descriptor())));
            }
        }
        log_prior(&prior, "model")?;
        Ok(ModelClass { models, prior })
    }

    pub fn uniform(models: Vec<Arc<dyn WorldModel>>) -> Result<ModelClass> {
        let n = models.len();
        ModelClass::new(models, vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn models(&self) -> &[Arc<dyn WorldModel>] {
        &self.models
    }

    pub fn get(&self, k: usize) -> &Arc<dyn WorldModel> {
        &self.models[k]
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn index_of(&self, descriptor: &str) -> Option<usize> {
        self.models.iter().position(|m| m.descriptor() == descriptor)
    }

    pub fn descriptors(&self) -> Vec<String> {
        self.models.iter().map(|m| m.descriptor().to_string()).collect()
    }
}

/// An ordered mentor-policy class 𝒫 with its prior.
#[derive(Clone)]
pub struct PolicyClass {
    policies: Vec<Arc<dyn PolicyModel>>,
    prior: Vec<f64>,
}

impl PolicyClass {
    pub fn new(policies: Vec<Arc<dyn PolicyModel>>, prior: Vec<f64>) -> Result<PolicyClass> {
        if policies.is_empty() || policies.len() != prior.len() {
            return Err(CoreError::Config("policy class and prior must be nonempty and aligned".into()));
        }
        for (k, p) in policies.iter().enumerate() {
            if policies[..k].iter().any(|x| x.descriptor() == p.descriptor()) {
                return Err(CoreError::Config(format!("duplicate policy descriptor {:?}", p.descriptor())));
            }
        }
        log_prior(&prior, "policy")?;
        Ok(PolicyClass { policies, prior })
    }

    pub fn uniform(policies: Vec<Arc<dyn PolicyModel>>) -> Result<PolicyClass> {
        let n = policies.len();
        PolicyClass::new(policies, vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.policies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }

    pub fn policies(&self) -> &[Arc<dyn PolicyModel>] {
        &self.policies
    }

    pub fn get(&self, k: usize) -> &Arc<dyn PolicyModel> {
        &self.policies[k]
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn index_of(&self, descriptor: &str) -> Option<usize> {
        self.policies.iter().position(|p| p.descriptor() == descriptor)
    }

    pub fn descriptors(&self) -> Vec<String> {
        self.policies.iter().map(|p| p.descriptor().to_string()).collect()
    }
}

/// Log-weights over ℳ and 𝒫, in class order, each normalized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorState {
    pub model_log_w: Vec<f64>,
    pub policy_log_w: Vec<f64>,
}

fn bayes_update(log_w: &[f64], log_lik: &[f64], what: &str) -> Result<Vec<f64>> {
    let joint: Vec<f64> = log_w.iter().zip(log_lik).map(|(w, l)| w + l).collect();
    let z = logsumexp(&joint);
    if z == f64::NEG_INFINITY || z.is_nan() {
        return Err(CoreError::ImpossibleEvidence(format!("every {what} assigns probability 0")));
    }
    Ok(joint.iter().map(|x| x - z).collect())
}

fn ln(p: f64) -> f64 {
    if p > 0.0 {
        p.ln()
    } else {
        f64::NEG_INFINITY
    }
}

impl PosteriorState {
    pub fn from_priors(models: &ModelClass, policies: &PolicyClass) -> PosteriorState {
        PosteriorState {
            model_log_w: models.prior.iter().map(|p| ln(*p)).collect(),
            policy_log_w: policies.prior.iter().map(|p| ln(*p)).collect(),
        }
    }

    /// `w(ν|h·s) ∝ w(ν|h) ν(o,r|h,a)` given each model's probability of the percept.
    pub fn update_models(&self, likelihoods: &[f64]) -> Result<PosteriorState> {
        let ll: Vec<f64> = likelihoods.iter().map(|p| ln(*p)).collect();
        Ok(PosteriorState {
            model_log_w: bayes_update(&self.model_log_w, &ll, "model")?,
            policy_log_w: self.policy_log_w.clone(),
        })
    }

    /// Policy update at the end of an episode; a no-op unless `explored`.
    /// `log_likelihoods[k] = Σ_j ln π_k(a_(i,j) | h_<(i,j))`.
    pub fn update_policies(&self, explored: bool, log_likelihoods: &[f64]) -> Result<PosteriorState> {
        if !explored {
            return Ok(self.clone());
        }
        Ok(PosteriorState {
            model_log_w: self.model_log_w.clone(),
            policy_log_w: bayes_update(&self.policy_log_w, log_likelihoods, "policy")?,
        })
    }

    pub fn model_weights(&self) -> Vec<f64> {
        self.model_log_w.iter().map(|x| x.exp()).collect()
    }

    pub fn policy_weights(&self) -> Vec<f64> {
        self.policy_log_w.iter().map(|x| x.exp()).collect()
    }

    /// `w(P^π_ν | ·) = w(π|·) w(ν|·)`.
    pub fn joint_weight(&self, model: usize, policy: usize) -> f64 {
        (self.model_log_w[model] + self.policy_log_w[policy]).exp()
    }

    /// Argmax model weight; exact ties go to the earliest model.
    pub fn map_model(&self) -> usize {
        let mut best = 0;
        for (k, w) in self.model_log_w.iter().enumerate() {
            if *w > self.model_log_w[best] {
                best = k;
            }
        }
        best
    }

    pub fn is_normalized(&self) -> bool {
        let sm: f64 = self.model_weights().iter().sum();
        let sp: f64 = self.policy_weights().iter().sum();
        (sm - 1.0).abs() <= NORMALIZATION_TOLERANCE && (sp - 1.0).abs() <= NORMALIZATION_TOLERANCE
    }
}

/// A posterior together with every model's and policy's context for the
/// current history, so that updates cost one prediction per member.
#[derive(Clone, Debug)]
pub struct Tracker {
    pub posterior: PosteriorState,
    model_ctx: Vec<Context>,
    policy_ctx: Vec<Context>,
    /// Per-policy log-probability of the current episode's actions so far.
    episode_policy_ll: Vec<f64>,
    steps: usize,
}

impl Tracker {
    pub fn new(models: &ModelClass, policies: &PolicyClass) -> Tracker {
        Tracker {
            posterior: PosteriorState::from_priors(models, policies),
            model_ctx: models.models.iter().map(|m| m.initial_context()).collect(),
            policy_ctx: policies.policies.iter().map(|p| p.initial_context()).collect(),
            episode_policy_ll: vec![0.0; policies.len()],
            steps: 0,
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn model_context(&self, k: usize) -> &Context {
        &self.model_ctx[k]
    }

    pub fn policy_context(&self, k: usize) -> &Context {
        &self.policy_ctx[k]
    }

    pub fn model_contexts(&self) -> &[Context] {
        &self.model_ctx
    }

    pub fn policy_contexts(&self) -> &[Context] {
        &self.policy_ctx
    }

    /// Conditions on one step: models update now, policies accumulate
    /// until [`Tracker::close_episode`].
    pub fn observe(&mut self, models: &ModelClass, policies: &PolicyClass, step: &Step) -> Result<()> {
        let lik: Vec<f64> = models
            .models
            .iter()
            .zip(&self.model_ctx)
            .map(|(m, c)| m.percept_prob(c, step.action, &step.percept))
            .collect();
        self.posterior = self.posterior.update_models(&lik)?;
        for (k, p) in policies.policies.iter().enumerate() {
            self.episode_policy_ll[k] += ln(p.action_prob(&self.policy_ctx[k], step.action));
            self.policy_ctx[k] = p.advance(&self.policy_ctx[k], step);
        }
        for (k, m) in models.models.iter().enumerate() {
            self.model_ctx[k] = m.advance(&self.model_ctx[k], step);
        }
        self.steps += 1;
        Ok(())
    }

    pub fn close_episode(&mut self, explored: bool) -> Result<()> {
        self.posterior = self.posterior.update_policies(explored, &self.episode_policy_ll)?;
        self.episode_policy_ll.iter_mut().for_each(|x| *x = 0.0);
        Ok(())
    }

    /// ξ(· | h, a).
    pub fn mixture_predict(&self, models: &ModelClass, action: Action) -> Result<Distribution<Percept>> {
        let w = self.posterior.model_weights();
        let mut acc: Vec<(Percept, f64)> = Vec::new();
        for (k, m) in models.models.iter().enumerate() {
            if w[k] == 0.0 {
                continue;
            }
            for (p, q) in m.predict_in(&self.model_ctx[k], action).items() {
                match acc.iter_mut().find(|(x, _)| x == p) {
                    Some(e) => e.1 += w[k] * q,
                    None => acc.push((*p, w[k] * q)),
                }
            }
        }
        normalize_mixture(acc)
    }

    /// π̄(· | h).
    pub fn mixture_act(&self, policies: &PolicyClass) -> Result<Distribution<Action>> {
        let w = self.posterior.policy_weights();
        let mut acc: Vec<(Action, f64)> = Vec::new();
        for (k, p) in policies.policies.iter().enumerate() {
            if w[k] == 0.0 {
                continue;
            }
            for (a, q) in p.act_in(&self.policy_ctx[k]).items() {
                match acc.iter_mut().find(|(x, _)| x == a) {
                    Some(e) => e.1 += w[k] * q,
                    None => acc.push((*a, w[k] * q)),
                }
            }
        }
        normalize_mixture(acc)
    }
}

/// Rescales by the accumulated total, which differs from one only by the
/// posterior's own rounding.
fn normalize_mixture<T: PartialEq + Clone>(acc: Vec<(T, f64)>) -> Result<Distribution<T>> {
    let total: f64 = acc.iter().map(|(_, p)| p).sum();
    if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(CoreError::Distribution(format!("mixture mass {total}")));
    }
    Distribution::new(acc.into_iter().filter(|(_, p)| *p > 0.0).map(|(x, p)| (x, p / total)).collect())
}

/// What the agent did with exploration in each past episode.
#[derive(Clone, Debug, Default)]
pub struct ExplorationTrace {
    pub flags: Vec<bool>,
    pub p_exp: Vec<f64>,
    /// The exploiting policy planned at the start of each episode.
    pub star: Vec<Arc<DeterministicEpisodePolicy>>,
}

impl ExplorationTrace {
    pub fn push(&mut self, flag: bool, p_exp: f64, star: Arc<DeterministicEpisodePolicy>) {
        self.flags.push(flag);
        self.p_exp.push(p_exp);
        self.star.push(star);
    }
}

/// Joint posterior weights `w(P^π_ν | h, e)` computed directly from the
/// priors: `w(π)w(ν)P^{π′}_ν(h,e)` normalized over all pairs. Returned
/// row-major as `[model][policy]`. `steps` must cover whole episodes, one
/// per entry of `trace` used.
pub fn lemma1_closed_form(
    models: &ModelClass,
    policies: &PolicyClass,
    steps: &[Step],
    trace: &ExplorationTrace,
    m: usize,
) -> Result<Vec<f64>> {
    if !steps.len().is_multiple_of(m) {
        return Err(CoreError::Range("closed form needs whole episodes".into()));
    }
    let episodes = steps.len() / m;
    if trace.flags.len() < episodes || trace.p_exp.len() < episodes || trace.star.len() < episodes {
        return Err(CoreError::Range("exploration trace shorter than history".into()));
    }
    // ln P_ν(percepts | actions) per model.
    let mut model_ll = Vec::with_capacity(models.len());
    for (k, nu) in models.models.iter().enumerate() {
        let mut c = nu.initial_context();
        let mut ll = ln(models.prior[k]);
        for s in steps {
            ll += ln(nu.percept_prob(&c, s.action, &s.percept));
            if ll == f64::NEG_INFINITY {
                break;
            }
            c = nu.advance(&c, s);
        }
        model_ll.push(ll);
    }
    // ln of π′'s action probabilities and the flag probabilities, per policy.
    let mut policy_ll = Vec::with_capacity(policies.len());
    for (k, pi) in policies.policies.iter().enumerate() {
        let mut c = pi.initial_context();
        let mut ll = ln(policies.prior[k]);
        for i in 0..episodes {
            let flag = trace.flags[i];
            let p = trace.p_exp[i];
            ll += ln(if flag { p } else { 1.0 - p });
            let primed = PrimedPolicy::new(pi.as_ref(), trace.star[i].as_ref());
            let block = &steps[i * m..(i + 1) * m];
            for (j, s) in block.iter().enumerate() {
                ll += ln(primed.action_prob(flag, &c, &block[..j], s.action));
                c = pi.advance(&c, s);
            }
        }
        policy_ll.push(ll);
    }
    let mut joint = Vec::with_capacity(models.len() * policies.len());
    for ml in &model_ll {
        for pl in &policy_ll {
            joint.push(ml + pl);
        }
    }
    let z = logsumexp(&joint);
    if z == f64::NEG_INFINITY || z.is_nan() {
        return Err(CoreError::ImpossibleEvidence("closed-form denominator is zero".into()));
    }
    Ok(joint.iter().map(|x| (x - z).exp()).collect())
}

/// One-step supermartingale check for `z_i = 1 / w(P^{π^h}_μ | h_{<i}, e_{<i})`.
///
/// Enumerates `e_i` and every episode block with positive probability under
/// μ and `(π^h)′`, and returns `(E[z_{i+1} | h_{<i}, e_{<i}], z_i)`.
#[allow(clippy::too_many_arguments)]
pub fn martingale_step_check(
    models: &ModelClass,
    policies: &PolicyClass,
    tracker: &Tracker,
    mu: usize,
    mentor: usize,
    p_exp: f64,
    star: &DeterministicEpisodePolicy,
    spaces: &Spaces,
    cap: f64,
) -> Result<(f64, f64)> {
    check_cap(spaces.step_outcomes(), spaces.m(), cap)?;
    let rhs = 1.0 / tracker.posterior.joint_weight(mu, mentor);
    let mut lhs = 0.0;
    for (flag, pf) in [(false, 1.0 - p_exp), (true, p_exp)] {
        if pf <= 0.0 {
            continue;
        }
        let mut walk = MartingaleWalk {
            models,
            policies,
            mu,
            mentor,
            flag,
            star,
            m: spaces.m(),
            suffix: Vec::with_capacity(spaces.m()),
            acc: 0.0,
        };
        walk.descend(
            pf,
            tracker.posterior.model_log_w.clone(),
            tracker.posterior.policy_log_w.clone(),
            tracker.model_ctx.clone(),
            tracker.policy_ctx.clone(),
        );
        lhs += walk.acc;
    }
    Ok((lhs, rhs))
}

struct MartingaleWalk<'a> {
    models: &'a ModelClass,
    policies: &'a PolicyClass,
    mu: usize,
    mentor: usize,
    flag: bool,
    star: &'a DeterministicEpisodePolicy,
    m: usize,
    suffix: Vec<Step>,
    acc: f64,
}

impl MartingaleWalk<'_> {
    fn descend(
        &mut self,
        prob: f64,
        model_lw: Vec<f64>,
        policy_lw: Vec<f64>,
        mctx: Vec<Context>,
        pctx: Vec<Context>,
    ) {
        if self.suffix.len() == self.m {
            let zm = logsumexp(&model_lw);
            let wm = model_lw[self.mu] - zm;
            let wp = if self.flag {
                policy_lw[self.mentor] - logsumexp(&policy_lw)
            } else {
                policy_lw[self.mentor]
            };
            self.acc += prob * (-(wm + wp)).exp();
            return;
        }
        let mentor = self.policies.get(self.mentor);
        let primed = PrimedPolicy::new(mentor.as_ref(), self.star);
        let acts = primed.act(self.flag, &pctx[self.mentor], &self.suffix);
        let mu = self.models.get(self.mu);
        for (a, pa) in acts.items() {
            if *pa <= 0.0 {
                continue;
            }
            let dist = mu.predict_in(&mctx[self.mu], *a).into_owned();
            for (percept, po) in dist.items() {
                if *po <= 0.0 {
                    continue;
                }
                let step = Step { action: *a, percept: *percept };
                let mut lw = model_lw.clone();
                let mut next_mctx = Vec::with_capacity(mctx.len());
                for (k, nu) in self.models.models().iter().enumerate() {
                    lw[k] += ln(nu.percept_prob(&mctx[k], *a, percept));
                    next_mctx.push(nu.advance(&mctx[k], &step));
                }
                let mut plw = policy_lw.clone();
                let mut next_pctx = Vec::with_capacity(pctx.len());
                for (k, pi) in self.policies.policies().iter().enumerate() {
                    if self.flag {
                        plw[k] += ln(pi.action_prob(&pctx[k], *a));
                    }
                    next_pctx.push(pi.advance(&pctx[k], &step));
                }
                self.suffix.push(step);
                self.descend(prob * pa * po, lw, plw, next_mctx, next_pctx);
                self.suffix.pop();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logsumexp_handles_infinities() {
        assert_eq!(logsumexp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert!((logsumexp(&[0.0, 0.0]) - 2f64.ln()).abs() < 1e-15);
        assert!((logsumexp(&[f64::NEG_INFINITY, 1.5]) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn model_update_two_thirds() {
        let ps = PosteriorState { model_log_w: vec![0.5f64.ln(); 2], policy_log_w: vec![0.0] };
        let post = ps.update_models(&[1.0, 0.5]).unwrap();
        let w = post.model_weights();
        assert!((w[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((w[1] - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(post.map_model(), 0);
    }

    #[test]
    fn zero_likelihood_is_permanent() {
        let ps = PosteriorState { model_log_w: vec![0.5f64.ln(); 2], policy_log_w: vec![0.0] };
        let post = ps.update_models(&[1.0, 0.0]).unwrap();
        assert_eq!(post.model_weights(), vec![1.0, 0.0]);
        let post = post.update_models(&[0.5, 1.0]).unwrap();
        assert_eq!(post.model_weights(), vec![1.0, 0.0]);
    }

    #[test]
    fn impossible_evidence() {
        let ps = PosteriorState { model_log_w: vec![0.5f64.ln(); 2], policy_log_w: vec![0.0] };
        assert!(matches!(ps.update_models(&[0.0, 0.0]), Err(CoreError::ImpossibleEvidence(_))));
    }

    #[test]
    fn policy_update() {
        let ps = PosteriorState { model_log_w: vec![0.0], policy_log_w: vec![0.5f64.ln(); 2] };
        let ll = [0.0, 0.25f64.ln()];
        assert_eq!(ps.update_policies(false, &ll).unwrap(), ps);
        let w = ps.update_policies(true, &ll).unwrap().policy_weights();
        assert!((w[0] - 0.8).abs() < 1e-12);
        assert!((w[1] - 0.2).abs() < 1e-12);
        let same = ps.update_policies(true, &[0.3f64.ln(), 0.3f64.ln()]).unwrap();
        assert!((same.policy_weights()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn map_tie_takes_first() {
        let ps = PosteriorState { model_log_w: vec![-1.0, -0.5, -0.5], policy_log_w: vec![0.0] };
        assert_eq!(ps.map_model(), 1);
        let ps = PosteriorState {
            model_log_w: vec![f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0],
            policy_log_w: vec![0.0],
        };
        assert_eq!(ps.map_model(), 2);
    }

    #[test]
    fn entropy_of_uniform() {
        assert!((entropy(&[0.25; 4]) - 4f64.ln()).abs() < 1e-15);
        assert_eq!(entropy(&[1.0, 0.0]), 0.0);
    }
}
