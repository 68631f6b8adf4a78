//! Exact finite-horizon expectimax within an episode.

use std::borrow::Cow;
use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use crate::dist::Distribution;
use crate::error::{check_cap, Result};
use crate::history::History;
use crate::model::{Context, PolicyModel, WorldModel};
use crate::spaces::{Action, Spaces, Step};

/// Within-episode suffix → (best action, optimal remaining value).
pub type ValueTable = HashMap<Vec<Step>, (Action, f64)>;

/// The optimal deterministic policy for one episode of one world-model.
///
/// The table covers every suffix reachable under the model with any actions;
/// other suffixes are solved on demand from the stored root context.
pub struct DeterministicEpisodePolicy {
    descriptor: String,
    model: Arc<dyn WorldModel>,
    root: Context,
    start_step: usize,
    actions: Vec<Action>,
    m: usize,
    table: ValueTable,
    value: f64,
}

impl fmt::Debug for DeterministicEpisodePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DeterministicEpisodePolicy")
            .field("model", &self.model.descriptor())
            .field("value", &self.value)
            .field("entries", &self.table.len())
            .finish()
    }
}

struct Expectimax<'a> {
    model: &'a dyn WorldModel,
    actions: &'a [Action],
    m: usize,
    table: Option<&'a mut ValueTable>,
}

impl Expectimax<'_> {
    /// Optimal value from `ctx` at depth `j`; ties keep the earliest action.
    fn solve(&mut self, ctx: &Context, suffix: &mut Vec<Step>, j: usize) -> (Action, f64) {
        if j == self.m {
            return (self.actions[0], 0.0);
        }
        let mut best: Option<(Action, f64)> = None;
        for &a in self.actions {
            let dist = self.model.predict_in(ctx, a);
            let mut q = 0.0;
            for (p, prob) in dist.items() {
                if *prob <= 0.0 {
                    continue;
                }
                let step = Step { action: a, percept: *p };
                let child = self.model.advance(ctx, &step);
                suffix.push(step);
                let (_, v) = self.solve(&child, suffix, j + 1);
                suffix.pop();
                q += prob * (p.reward.to_f64() + v);
            }
            if best.is_none_or(|(_, bq)| q > bq) {
                best = Some((a, q));
            }
        }
        let best = best.expect("at least one action");
        if let Some(t) = self.table.as_deref_mut() {
            t.insert(suffix.clone(), best);
        }
        best
    }
}

/// `π*_i`: backward induction over the model from an episode-start context.
pub fn optimal_policy(
    model: Arc<dyn WorldModel>,
    ctx: Context,
    start_step: usize,
    spaces: &Spaces,
    cap: f64,
) -> Result<(DeterministicEpisodePolicy, f64)> {
    check_cap(spaces.step_outcomes(), spaces.m(), cap)?;
    let actions: Vec<Action> = spaces.actions().collect();
    let mut table = ValueTable::new();
    let (_, value) = Expectimax { model: model.as_ref(), actions: &actions, m: spaces.m(), table: Some(&mut table) }
        .solve(&ctx, &mut Vec::with_capacity(spaces.m()), 0);
    let descriptor = format!("pi*[{}@{}]", model.descriptor(), start_step);
    let policy = DeterministicEpisodePolicy {
        descriptor,
        model,
        root: ctx,
        start_step,
        actions,
        m: spaces.m(),
        table,
        value,
    };
    Ok((policy, value))
}

/// Plans for the episode starting after `h`, which must end at a boundary.
pub fn optimal_policy_for(
    model: Arc<dyn WorldModel>,
    h: &History,
    cap: f64,
) -> Result<(DeterministicEpisodePolicy, f64)> {
    if !h.at_boundary() {
        return Err(crate::error::CoreError::Range("planning starts at an episode boundary".into()));
    }
    let ctx = model.context_for(h.steps());
    optimal_policy(model, ctx, h.len(), h.spaces(), cap)
}

impl DeterministicEpisodePolicy {
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn table(&self) -> &ValueTable {
        &self.table
    }

    pub fn model(&self) -> &Arc<dyn WorldModel> {
        &self.model
    }

    /// Flat index of the first step of the planned episode.
    pub fn start_step(&self) -> usize {
        self.start_step
    }

    /// The action after the given within-episode suffix.
    pub fn action_for(&self, suffix: &[Step]) -> Action {
        let suffix = &suffix[..suffix.len() % self.m];
        if let Some((a, _)) = self.table.get(suffix) {
            return *a;
        }
        let ctx = suffix.iter().fold(self.root.clone(), |c, s| self.model.advance(&c, s));
        let mut owned = suffix.to_vec();
        Expectimax { model: self.model.as_ref(), actions: &self.actions, m: self.m, table: None }
            .solve(&ctx, &mut owned, suffix.len())
            .0
    }

    pub fn action_prob(&self, suffix: &[Step], action: Action) -> f64 {
        if self.action_for(suffix) == action {
            1.0
        } else {
            0.0
        }
    }
}

/// As a policy its context is the within-episode suffix.
impl PolicyModel for DeterministicEpisodePolicy {
    fn descriptor(&self) -> &str {
        &self.descriptor
    }

    fn initial_context(&self) -> Context {
        Context::Shared(Arc::new(Vec::<Step>::new()))
    }

    fn act_in(&self, ctx: &Context) -> Cow<'_, Distribution<Action>> {
        Cow::Owned(Distribution::point(self.action_for(ctx.shared::<Vec<Step>>())))
    }

    fn action_prob(&self, ctx: &Context, action: Action) -> f64 {
        DeterministicEpisodePolicy::action_prob(self, ctx.shared::<Vec<Step>>(), action)
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

/// `V^π_ν` from depth `j` of the current episode: the exact expected reward
/// for the rest of the episode, summed in the same order as the planner.
pub fn value_from(
    model: &dyn WorldModel,
    policy: &dyn PolicyModel,
    model_ctx: &Context,
    policy_ctx: &Context,
    j: usize,
    spaces: &Spaces,
    cap: f64,
) -> Result<f64> {
    check_cap(spaces.step_outcomes(), spaces.m().saturating_sub(j), cap)?;
    Ok(policy_value(model, policy, model_ctx, policy_ctx, j, spaces.m()))
}

fn policy_value(
    model: &dyn WorldModel,
    policy: &dyn PolicyModel,
    mctx: &Context,
    pctx: &Context,
    j: usize,
    m: usize,
) -> f64 {
    if j >= m {
        return 0.0;
    }
    let acts = policy.act_in(pctx);
    let mut v = 0.0;
    for (a, pa) in acts.items() {
        if *pa <= 0.0 {
            continue;
        }
        let dist = model.predict_in(mctx, *a);
        let mut q = 0.0;
        for (p, prob) in dist.items() {
            if *prob <= 0.0 {
                continue;
            }
            let step = Step { action: *a, percept: *p };
            let child = policy_value(model, policy, &model.advance(mctx, &step), &policy.advance(pctx, &step), j + 1, m);
            q += prob * (p.reward.to_f64() + child);
        }
        v += pa * q;
    }
    v
}

/// `V^π_ν(h)` for a history anywhere inside an episode.
pub fn value_of_policy(model: &dyn WorldModel, policy: &dyn PolicyModel, h: &History, cap: f64) -> Result<f64> {
    let mctx = model.context_for(h.steps());
    let pctx = policy.context_for(h.steps());
    value_from(model, policy, &mctx, &pctx, h.len() % h.m(), h.spaces(), cap)
}

/// `V^{π*}_ν` for the episode a planned policy belongs to, evaluated in a
/// possibly different model whose context is given at the episode start.
pub fn star_value_in(
    model: &dyn WorldModel,
    star: &DeterministicEpisodePolicy,
    model_ctx: &Context,
    spaces: &Spaces,
    cap: f64,
) -> Result<f64> {
    value_from(model, star, model_ctx, &star.initial_context(), 0, spaces, cap)
}

/// `π*` extended across episodes: replans with a fixed model at every boundary.
///
/// Plans are cached by the model's episode-start context when it is an index.
pub struct ReplanningPolicy {
    descriptor: String,
    model: Arc<dyn WorldModel>,
    spaces: Arc<Spaces>,
    cap: f64,
    cache: Mutex<HashMap<u64, Arc<DeterministicEpisodePolicy>>>,
}

struct ReplanState {
    model_ctx: Context,
    star: Arc<DeterministicEpisodePolicy>,
    suffix: Vec<Step>,
}

impl ReplanningPolicy {
    pub fn new(model: Arc<dyn WorldModel>, spaces: Arc<Spaces>, cap: f64) -> Result<ReplanningPolicy> {
        check_cap(spaces.step_outcomes(), spaces.m(), cap)?;
        Ok(ReplanningPolicy {
            descriptor: format!("pi*[{}]", model.descriptor()),
            model,
            spaces,
            cap,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn plan(&self, model_ctx: &Context) -> Arc<DeterministicEpisodePolicy> {
        let key = match model_ctx {
            Context::Index(k) => Some(*k),
            Context::Shared(_) => None,
        };
        if let Some(k) = key {
            if let Some(p) = self.cache.lock().expect("plan cache").get(&k) {
                return p.clone();
            }
        }
        let (p, _) = optimal_policy(self.model.clone(), model_ctx.clone(), 0, &self.spaces, self.cap)
            .expect("cap checked at construction");
        let p = Arc::new(p);
        if let Some(k) = key {
            self.cache.lock().expect("plan cache").insert(k, p.clone());
        }
        p
    }

    /// Context at an episode boundary where the model's context is `model_ctx`,
    /// optionally reusing an already computed plan for that episode.
    pub fn context_at(&self, model_ctx: Context, star: Option<Arc<DeterministicEpisodePolicy>>) -> Context {
        let star = star.unwrap_or_else(|| self.plan(&model_ctx));
        Context::Shared(Arc::new(ReplanState { model_ctx, star, suffix: Vec::new() }))
    }
}

impl PolicyModel for ReplanningPolicy {
    fn descriptor(&self) -> &str {
        &self.descriptor
    }

    fn initial_context(&self) -> Context {
        self.context_at(self.model.initial_context(), None)
    }

    fn act_in(&self, ctx: &Context) -> Cow<'_, Distribution<Action>> {
        let st = ctx.shared::<ReplanState>();
        Cow::Owned(Distribution::point(st.star.action_for(&st.suffix)))
    }

    fn action_prob(&self, ctx: &Context, action: Action) -> f64 {
        let st = ctx.shared::<ReplanState>();
        st.star.action_prob(&st.suffix, action)
    }

    fn advance(&self, ctx: &Context, step: &Step) -> Context {
        let st = ctx.shared::<ReplanState>();
        let model_ctx = self.model.advance(&st.model_ctx, step);
        if st.suffix.len() + 1 == self.spaces.m() {
            return self.context_at(model_ctx, None);
        }
        let mut suffix = st.suffix.clone();
        suffix.push(*step);
        Context::Shared(Arc::new(ReplanState { model_ctx, star: st.star.clone(), suffix }))
    }
}
