//! Finite-state world-models and policies given by explicit tables.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dist::Distribution;
use crate::error::{CoreError, Result};
use crate::model::{Context, PolicyModel, SpaceParams, WorldModel};
use crate::spaces::{Action, Percept, Reward, Spaces, Step};

#[derive(Clone, Debug)]
struct Row {
    dist: Distribution<Percept>,
    /// Successor state for each support entry of `dist`.
    next: Vec<u32>,
}

/// A world-model whose context is a finite state updated deterministically
/// by each step, with an extra state map applied at episode boundaries.
///
/// Percepts outside a row's support leave the state unchanged.
#[derive(Clone, Debug)]
pub struct TabularWorldModel {
    descriptor: String,
    spaces: Arc<Spaces>,
    state_names: Vec<String>,
    initial: u32,
    episode_start: Vec<u32>,
    rows: Vec<Row>,
    space: Option<SpaceParams>,
}

const POS_SHIFT: u32 = 32;

impl TabularWorldModel {
    pub fn builder(
        descriptor: impl Into<String>,
        spaces: Arc<Spaces>,
        state_names: Vec<String>,
    ) -> TabularBuilder {
        let n = state_names.len();
        TabularBuilder {
            descriptor: descriptor.into(),
            rows: vec![None; n * spaces.n_actions()],
            episode_start: (0..n as u32).collect(),
            spaces,
            state_names,
            initial: 0,
            space: None,
        }
    }

    pub fn from_spec(spec: &TabularSpec, spaces: Arc<Spaces>) -> Result<TabularWorldModel> {
        let state = |name: &str| -> Result<u32> {
            spec.states
                .iter()
                .position(|s| s == name)
                .map(|k| k as u32)
                .ok_or_else(|| CoreError::Config(format!("{}: unknown state {name:?}", spec.name)))
        };
        let mut b = TabularWorldModel::builder(&spec.name, spaces.clone(), spec.states.clone());
        let initial = state(&spec.initial)?;
        b.initial(initial);
        match &spec.episode_start {
            None => {
                for s in 0..spec.states.len() as u32 {
                    b.episode_start(s, initial);
                }
            }
            Some(map) => {
                for (from, to) in map {
                    b.episode_start(state(from)?, state(to)?);
                }
            }
        }
        for row in &spec.rows {
            let s = state(&row.state)?;
            let a = spaces.action_by_name(&row.action)?;
            let mut outcomes = Vec::new();
            for o in &row.outcomes {
                let obs = spaces.any_observation_by_name(&o.obs)?;
                outcomes.push((Percept::new(obs, o.reward), o.prob, state(&o.next)?));
            }
            b.row(s, a, outcomes)?;
        }
        if let Some(sp) = spec.space {
            b.space(sp);
        }
        b.build()
    }

    pub fn spaces(&self) -> &Arc<Spaces> {
        &self.spaces
    }

    pub fn n_states(&self) -> usize {
        self.state_names.len()
    }

    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }

    pub fn initial_state(&self) -> u32 {
        self.initial
    }

    pub fn episode_start_state(&self, s: u32) -> u32 {
        self.episode_start[s as usize]
    }

    pub fn emission(&self, state: u32, action: Action) -> &Distribution<Percept> {
        &self.row(state, action).dist
    }

    fn row(&self, state: u32, action: Action) -> &Row {
        &self.rows[state as usize * self.spaces.n_actions() + action.0 as usize]
    }

    /// Successor state after `percept` within an episode.
    pub fn next_state(&self, state: u32, action: Action, percept: &Percept) -> u32 {
        let row = self.row(state, action);
        row.dist
            .items()
            .iter()
            .position(|(p, _)| p == percept)
            .map_or(state, |k| row.next[k])
    }

    /// Internal state and position in the episode encoded by a context.
    pub fn decode(ctx: &Context) -> (u32, u32) {
        let k = ctx.index();
        (k as u32, (k >> POS_SHIFT) as u32)
    }

    fn encode(state: u32, pos: u32) -> Context {
        Context::Index(u64::from(state) | (u64::from(pos) << POS_SHIFT))
    }

    /// A copy with a different descriptor and declared space.
    pub fn renamed(&self, descriptor: impl Into<String>, space: Option<SpaceParams>) -> TabularWorldModel {
        TabularWorldModel { descriptor: descriptor.into(), space, ..self.clone() }
    }

    pub fn to_spec(&self) -> TabularSpec {
        let mut rows = Vec::new();
        for s in 0..self.n_states() as u32 {
            for a in self.spaces.actions() {
                let row = self.row(s, a);
                rows.push(RowSpec {
                    state: self.state_names[s as usize].clone(),
                    action: self.spaces.action_name(a).to_string(),
                    outcomes: row
                        .dist
                        .items()
                        .iter()
                        .zip(&row.next)
                        .map(|((p, prob), next)| OutcomeSpec {
                            obs: self.spaces.observation_name(p.obs).to_string(),
                            reward: p.reward,
                            prob: *prob,
                            next: self.state_names[*next as usize].clone(),
                        })
                        .collect(),
                });
            }
        }
        let episode_start = (0..self.n_states())
            .map(|s| {
                (self.state_names[s].clone(), self.state_names[self.episode_start[s] as usize].clone())
            })
            .collect();
        TabularSpec {
            name: self.descriptor.clone(),
            states: self.state_names.clone(),
            initial: self.state_names[self.initial as usize].clone(),
            episode_start: Some(episode_start),
            rows,
            space: self.space,
        }
    }
}

impl WorldModel for TabularWorldModel {
    fn descriptor(&self) -> &str {
        &self.descriptor
    }

    fn space_params(&self) -> Option<SpaceParams> {
        self.space
    }

    fn initial_context(&self) -> Context {
        Self::encode(self.initial, 0)
    }

    fn predict_in(&self, ctx: &Context, action: Action) -> Cow<'_, Distribution<Percept>> {
        let (s, _) = Self::decode(ctx);
        Cow::Borrowed(&self.row(s, action).dist)
    }

    fn percept_prob(&self, ctx: &Context, action: Action, percept: &Percept) -> f64 {
        let (s, _) = Self::decode(ctx);
        self.row(s, action).dist.prob(percept)
    }

    fn advance(&self, ctx: &Context, step: &Step) -> Context {
        let (s, pos) = Self::decode(ctx);
        let next = self.next_state(s, step.action, &step.percept);
        if pos as usize + 1 == self.spaces.m() {
            Self::encode(self.episode_start[next as usize], 0)
        } else {
            Self::encode(next, pos + 1)
        }
    }
}

pub struct TabularBuilder {
    descriptor: String,
    spaces: Arc<Spaces>,
    state_names: Vec<String>,
    initial: u32,
    episode_start: Vec<u32>,
    rows: Vec<Option<Row>>,
    space: Option<SpaceParams>,
}

impl TabularBuilder {
    pub fn initial(&mut self, s: u32) -> &mut Self {
        self.initial = s;
        self
    }

    pub fn episode_start(&mut self, from: u32, to: u32) -> &mut Self {
        self.episode_start[from as usize] = to;
        self
    }

    pub fn space(&mut self, sp: SpaceParams) -> &mut Self {
        self.space = Some(sp);
        self
    }

    /// Sets the emission row for `(state, action)`; outcomes are
    /// `(percept, probability, successor)` and zero-probability entries are dropped.
    pub fn row(&mut self, state: u32, action: Action, outcomes: Vec<(Percept, f64, u32)>) -> Result<&mut Self> {
        let n = self.state_names.len() as u32;
        if state >= n {
            return Err(CoreError::Config(format!("{}: state {state} out of range", self.descriptor)));
        }
        self.spaces.check_action(action)?;
        let mut items = Vec::new();
        let mut next = Vec::new();
        for (p, prob, s) in outcomes {
            self.spaces.check_percept(p)?;
            if s >= n {
                return Err(CoreError::Config(format!("{}: successor {s} out of range", self.descriptor)));
            }
            if prob == 0.0 {
                continue;
            }
            items.push((p, prob));
            next.push(s);
        }
        let dist = Distribution::new(items)
            .map_err(|e| CoreError::Config(format!("{}: row ({state}, {}): {e}", self.descriptor, action.0)))?;
        self.rows[state as usize * self.spaces.n_actions() + action.0 as usize] = Some(Row { dist, next });
        Ok(self)
    }

    pub fn build(&self) -> Result<TabularWorldModel> {
        let n = self.state_names.len();
        if n == 0 || self.initial as usize >= n {
            return Err(CoreError::Config(format!("{}: bad state set", self.descriptor)));
        }
        let mut rows = Vec::with_capacity(self.rows.len());
        for (k, r) in self.rows.iter().enumerate() {
            match r {
                Some(r) => rows.push(r.clone()),
                None => {
                    let na = self.spaces.n_actions();
                    return Err(CoreError::Config(format!(
                        "{}: missing row for state {:?}, action {:?}",
                        self.descriptor,
                        self.state_names[k / na],
                        self.spaces.action_name(Action((k % na) as u8))
                    )));
                }
            }
        }
        Ok(TabularWorldModel {
            descriptor: self.descriptor.clone(),
            spaces: self.spaces.clone(),
            state_names: self.state_names.clone(),
            initial: self.initial,
            episode_start: self.episode_start.clone(),
            rows,
            space: self.space,
        })
    }
}

/// Declarative form of a [`TabularWorldModel`] for config files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabularSpec {
    pub name: String,
    pub states: Vec<String>,
    pub initial: String,
    /// State entered at the next episode start; unlisted states reset to `initial`
    /// when the map is absent, and stay put when the map is present.
    #[serde(default)]
    pub episode_start: Option<BTreeMap<String, String>>,
    pub rows: Vec<RowSpec>,
    #[serde(default)]
    pub space: Option<SpaceParams>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowSpec {
    pub state: String,
    pub action: String,
    pub outcomes: Vec<OutcomeSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSpec {
    pub obs: String,
    pub reward: Reward,
    pub prob: f64,
    pub next: String,
}

/// A policy that reads its decision state off a tabular model's state machine.
#[derive(Debug)]
pub struct TabularPolicy {
    descriptor: String,
    tracker: Arc<TabularWorldModel>,
    per_state: Vec<Distribution<Action>>,
}

impl TabularPolicy {
    pub fn new(
        descriptor: impl Into<String>,
        tracker: Arc<TabularWorldModel>,
        per_state: Vec<Distribution<Action>>,
    ) -> Result<TabularPolicy> {
        let descriptor = descriptor.into();
        if per_state.len() != tracker.n_states() {
            return Err(CoreError::Config(format!("{descriptor}: one action distribution per state required")));
        }
        Ok(TabularPolicy { descriptor, tracker, per_state })
    }

    pub fn state_distribution(&self, s: u32) -> &Distribution<Action> {
        &self.per_state[s as usize]
    }
}

impl PolicyModel for TabularPolicy {
    fn descriptor(&self) -> &str {
        &self.descriptor
    }

    fn initial_context(&self) -> Context {
        self.tracker.initial_context()
    }

    fn act_in(&self, ctx: &Context) -> Cow<'_, Distribution<Action>> {
        let (s, _) = TabularWorldModel::decode(ctx);
        Cow::Borrowed(&self.per_state[s as usize])
    }

    fn action_prob(&self, ctx: &Context, action: Action) -> f64 {
        let (s, _) = TabularWorldModel::decode(ctx);
        self.per_state[s as usize].prob(&action)
    }

    fn advance(&self, ctx: &Context, step: &Step) -> Context {
        self.tracker.advance(ctx, step)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::Observation;

    fn coin(spaces: Arc<Spaces>) -> TabularWorldModel {
        let mut b = TabularWorldModel::builder("coin", spaces.clone(), vec!["s0".into(), "s1".into()]);
        let p0 = Percept::new(Observation(1), Reward::ZERO);
        let p1 = Percept::new(Observation(2), Reward::ONE);
        for s in 0..2 {
            for a in spaces.actions() {
                b.row(s, a, vec![(p0, 0.5, 0), (p1, 0.5, 1)]).unwrap();
            }
        }
        b.build().unwrap()
    }

    #[test]
    fn missing_row_rejected() {
        let sp = Arc::new(Spaces::default_acceptance());
        let b = TabularWorldModel::builder("x", sp, vec!["s".into()]);
        assert!(b.build().is_err());
    }

    #[test]
    fn spec_round_trip() {
        let sp = Arc::new(Spaces::default_acceptance());
        let m = coin(sp.clone());
        let spec = m.to_spec();
        let text = serde_json::to_string(&spec).unwrap();
        let back: TabularSpec = serde_json::from_str(&text).unwrap();
        let m2 = TabularWorldModel::from_spec(&back, sp).unwrap();
        assert_eq!(m2.to_spec(), spec);
    }

    #[test]
    fn state_follows_percepts_and_boundary() {
        let sp = Arc::new(Spaces::default_acceptance());
        let mut b = TabularWorldModel::builder("c", sp.clone(), vec!["s0".into(), "s1".into()]);
        let p0 = Percept::new(Observation(1), Reward::ZERO);
        let p1 = Percept::new(Observation(2), Reward::ONE);
        for s in 0..2 {
            for a in sp.actions() {
                b.row(s, a, vec![(p0, 0.5, 0), (p1, 0.5, 1)]).unwrap();
            }
        }
        b.episode_start(1, 0);
        let m = b.build().unwrap();
        let c = m.initial_context();
        let c = m.advance(&c, &Step { action: Action(0), percept: p1 });
        assert_eq!(TabularWorldModel::decode(&c), (1, 1));
        let c = m.advance(&c, &Step { action: Action(0), percept: p1 });
        assert_eq!(TabularWorldModel::decode(&c), (0, 0));
    }
}
