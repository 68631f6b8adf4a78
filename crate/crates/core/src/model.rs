//! World-model and policy interfaces, and history probabilities under them.

use std::any::Any;
use std::borrow::Cow;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dist::Distribution;
use crate::history::History;
use crate::spaces::{Action, Percept, Spaces, Step};

/// Opaque summary of a history, owned by the model that produced it.
///
/// Models are pure functions of the history; a context only caches the fold
/// of [`WorldModel::advance`] over the steps so far.
#[derive(Clone)]
pub enum Context {
    Index(u64),
    Shared(Arc<dyn Any + Send + Sync>),
}

impl Context {
    pub fn index(&self) -> u64 {
        match self {
            Context::Index(k) => *k,
            Context::Shared(_) => panic!("context is not an index"),
        }
    }

    pub fn shared<T: Any + Send + Sync>(&self) -> &T {
        match self {
            Context::Shared(x) => x.downcast_ref::<T>().expect("context of a different model"),
            Context::Index(_) => panic!("context is not shared state"),
        }
    }
}

impl fmt::Debug for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Context::Index(k) => write!(f, "Index({k})"),
            Context::Shared(_) => write!(f, "Shared(..)"),
        }
    }
}

/// Bounded-tape length and state count; `Space = ℓ + log₂ S`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceParams {
    pub ell: u32,
    pub states: u64,
}

impl SpaceParams {
    pub fn space(&self) -> f64 {
        f64::from(self.ell) + (self.states as f64).log2()
    }
}

pub trait WorldModel: Send + Sync {
    /// Stable identity, unique within a model class.
    fn descriptor(&self) -> &str;

    fn space_params(&self) -> Option<SpaceParams> {
        None
    }

    fn space(&self) -> Option<f64> {
        self.space_params().map(|s| s.space())
    }

    fn initial_context(&self) -> Context;

    /// `ν(· | h, a)` where `ctx` summarizes `h`.
    fn predict_in(&self, ctx: &Context, action: Action) -> Cow<'_, Distribution<Percept>>;

    fn advance(&self, ctx: &Context, step: &Step) -> Context;

    fn percept_prob(&self, ctx: &Context, action: Action, percept: &Percept) -> f64 {
        self.predict_in(ctx, action).prob(percept)
    }

    fn context_for(&self, steps: &[Step]) -> Context {
        steps.iter().fold(self.initial_context(), |c, s| self.advance(&c, s))
    }

    fn predict(&self, h: &History, action: Action) -> Distribution<Percept> {
        self.predict_in(&self.context_for(h.steps()), action).into_owned()
    }
}

pub trait PolicyModel: Send + Sync {
    fn descriptor(&self) -> &str;

    fn initial_context(&self) -> Context;

    /// `π(· | h)` where `ctx` summarizes `h`.
    fn act_in(&self, ctx: &Context) -> Cow<'_, Distribution<Action>>;

    fn advance(&self, ctx: &Context, step: &Step) -> Context;

    fn action_prob(&self, ctx: &Context, action: Action) -> f64 {
        self.act_in(ctx).prob(&action)
    }

    fn context_for(&self, steps: &[Step]) -> Context {
        steps.iter().fold(self.initial_context(), |c, s| self.advance(&c, s))
    }

    fn act(&self, h: &History) -> Distribution<Action> {
        self.act_in(&self.context_for(h.steps())).into_owned()
    }
}

impl fmt::Debug for dyn WorldModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WorldModel({})", self.descriptor())
    }
}

impl fmt::Debug for dyn PolicyModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PolicyModel({})", self.descriptor())
    }
}

/// Uniform over all actions, regardless of history.
#[derive(Debug)]
pub struct UniformPolicy {
    descriptor: String,
    dist: Distribution<Action>,
}

impl UniformPolicy {
    pub fn new(descriptor: impl Into<String>, spaces: &Spaces) -> UniformPolicy {
        let dist = Distribution::uniform(spaces.actions().collect()).expect("nonempty action set");
        UniformPolicy { descriptor: descriptor.into(), dist }
    }
}

impl PolicyModel for UniformPolicy {
    fn descriptor(&self) -> &str {
        &self.descriptor
    }

    fn initial_context(&self) -> Context {
        Context::Index(0)
    }

    fn act_in(&self, _ctx: &Context) -> Cow<'_, Distribution<Action>> {
        Cow::Borrowed(&self.dist)
    }

    fn advance(&self, ctx: &Context, _step: &Step) -> Context {
        ctx.clone()
    }
}

/// Always the same action.
#[derive(Debug)]
pub struct ConstantPolicy {
    descriptor: String,
    dist: Distribution<Action>,
}

impl ConstantPolicy {
    pub fn new(descriptor: impl Into<String>, action: Action) -> ConstantPolicy {
        ConstantPolicy { descriptor: descriptor.into(), dist: Distribution::point(action) }
    }
}

impl PolicyModel for ConstantPolicy {
    fn descriptor(&self) -> &str {
        &self.descriptor
    }

    fn initial_context(&self) -> Context {
        Context::Index(0)
    }

    fn act_in(&self, _ctx: &Context) -> Cow<'_, Distribution<Action>> {
        Cow::Borrowed(&self.dist)
    }

    fn advance(&self, ctx: &Context, _step: &Step) -> Context {
        ctx.clone()
    }
}

/// `ln P^π_ν(steps | prefix)`; `-inf` when some factor is zero.
pub fn log_block_probability(
    nu: &dyn WorldModel,
    pi: &dyn PolicyModel,
    prefix: &[Step],
    block: &[Step],
) -> f64 {
    let mut nc = nu.context_for(prefix);
    let mut pc = pi.context_for(prefix);
    let mut lp = 0.0;
    for s in block {
        let pa = pi.action_prob(&pc, s.action);
        let po = nu.percept_prob(&nc, s.action, &s.percept);
        if pa == 0.0 || po == 0.0 {
            return f64::NEG_INFINITY;
        }
        lp += pa.ln() + po.ln();
        nc = nu.advance(&nc, s);
        pc = pi.advance(&pc, s);
    }
    lp
}

/// `P^π_ν(h)`: the product of `π(a|h_<)·ν(o,r|h_<,a)` over all steps.
pub fn history_probability(nu: &dyn WorldModel, pi: &dyn PolicyModel, h: &History) -> f64 {
    log_block_probability(nu, pi, &[], h.steps()).exp()
}

/// `P^π_ν(h_i | h_{<i})` for one episode block.
pub fn conditional_history_probability(
    nu: &dyn WorldModel,
    pi: &dyn PolicyModel,
    block: &[Step],
    given: &History,
) -> f64 {
    log_block_probability(nu, pi, given.steps(), block).exp()
}
