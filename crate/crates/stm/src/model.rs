//! World-models simulated by machines, with exact noise marginalization.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use bomai_core::{Action, Context, Distribution, Observation, Percept, SpaceParams, Spaces, Step, WorldModel};

use crate::error::{Result, StmError};
use crate::exec::{step, Config, DEFAULT_BUDGET, DEFAULT_NOISE_DEPTH};
use crate::machine::{Head, Machine, Signature};

/// `dec`: output bits of one timestep → percept. Undecodable strings give `(∅, 0)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Decoder {
    /// Observation index (∅ = 0) in `obs_bits` bits, then reward index in
    /// `reward_bits` bits, most significant bit first.
    FixedWidth { obs_bits: u32, reward_bits: u32 },
    Table(BTreeMap<Vec<bool>, Percept>),
}

impl Decoder {
    /// The narrowest fixed-width code covering the spaces.
    pub fn for_spaces(spaces: &Spaces) -> Decoder {
        let bits = |n: usize| usize::BITS - (n.max(2) - 1).leading_zeros();
        Decoder::FixedWidth { obs_bits: bits(spaces.n_observations()), reward_bits: bits(spaces.rewards().len()) }
    }

    pub fn decode(&self, bits: &[bool], spaces: &Spaces) -> Percept {
        match self {
            Decoder::FixedWidth { obs_bits, reward_bits } => {
                if bits.len() != (obs_bits + reward_bits) as usize {
                    return Percept::null();
                }
                let num = |b: &[bool]| b.iter().fold(0usize, |acc, &x| acc << 1 | usize::from(x));
                let (o, r) = bits.split_at(*obs_bits as usize);
                let (o, r) = (num(o), num(r));
                if o >= spaces.n_observations() || r >= spaces.rewards().len() {
                    return Percept::null();
                }
                Percept::new(Observation(o as u8), spaces.rewards()[r])
            }
            Decoder::Table(t) => t.get(bits).copied().unwrap_or_else(Percept::null),
        }
    }

    pub fn encode(&self, p: Percept, spaces: &Spaces) -> Option<Vec<bool>> {
        match self {
            Decoder::FixedWidth { obs_bits, reward_bits } => {
                let r = spaces.reward_index(p.reward)?;
                let bits = |v: usize, w: u32| (0..w).rev().map(move |k| (v >> k) & 1 == 1);
                Some(bits(p.obs.0 as usize, *obs_bits).chain(bits(r, *reward_bits)).collect())
            }
            Decoder::Table(t) => t.iter().find(|(_, q)| **q == p).map(|(b, _)| b.clone()),
        }
    }
}

/// `ν_k^{≤ℓ}`.
#[derive(Debug)]
pub struct StmWorldModel {
    descriptor: String,
    machine: Arc<Machine>,
    ell: u32,
    decoder: Decoder,
    spaces: Arc<Spaces>,
    budget: u64,
    noise_depth: u32,
}

/// `None` marks a branch that stopped moving the action head.
type Branch = Option<Config>;

struct Belief {
    /// Flat index of the next timestep.
    t: u64,
    prev_action: u8,
    entries: Vec<(Branch, f64)>,
    expansions: Vec<OnceLock<Expansion>>,
}

struct Expansion {
    dist: Distribution<Percept>,
    next: BTreeMap<Percept, Vec<(Branch, f64)>>,
}

impl StmWorldModel {
    pub fn new(machine: Arc<Machine>, ell: u32, decoder: Decoder, spaces: Arc<Spaces>) -> Result<StmWorldModel> {
        match machine.signature() {
            Signature::Full { actions } if actions as usize == spaces.n_actions() => {}
            _ => return Err(StmError::Config("machine signature does not match the action space".into())),
        }
        if ell > 64 {
            return Err(StmError::Config(format!("bounded tape length {ell} exceeds 64")));
        }
        let descriptor = match machine.index() {
            Some(k) => format!("stm[S={},k={k},l={ell}]", machine.n_states()),
            None => format!("stm[S={},l={ell}]", machine.n_states()),
        };
        Ok(StmWorldModel {
            descriptor,
            machine,
            ell,
            decoder,
            spaces,
            budget: DEFAULT_BUDGET,
            noise_depth: DEFAULT_NOISE_DEPTH,
        })
    }

    pub fn with_limits(mut self, budget: u64, noise_depth: u32) -> StmWorldModel {
        self.budget = budget;
        self.noise_depth = noise_depth;
        self
    }

    pub fn with_descriptor(mut self, descriptor: impl Into<String>) -> StmWorldModel {
        self.descriptor = descriptor.into();
        self
    }

    pub fn machine(&self) -> &Arc<Machine> {
        &self.machine
    }

    pub fn ell(&self) -> u32 {
        self.ell
    }

    fn belief(&self, t: u64, prev_action: u8, entries: Vec<(Branch, f64)>) -> Context {
        let expansions = (0..self.spaces.n_actions()).map(|_| OnceLock::new()).collect();
        Context::Shared(Arc::new(Belief { t, prev_action, entries, expansions }))
    }

    fn expansion<'a>(&self, b: &'a Belief, action: Action) -> &'a Expansion {
        b.expansions[action.0 as usize].get_or_init(|| self.expand(b, action))
    }

    fn expand(&self, b: &Belief, action: Action) -> Expansion {
        let mut out: BTreeMap<(Percept, Branch), f64> = BTreeMap::new();
        for (branch, w) in &b.entries {
            match branch {
                None => *out.entry((Percept::null(), None)).or_default() += w,
                Some(cfg) => {
                    let mut walk = Walk { model: self, t: b.t, action: action.0, prev: b.prev_action, out: &mut out };
                    walk.run(cfg.clone(), 0, 0, *w);
                }
            }
        }
        let mut mass: BTreeMap<Percept, f64> = BTreeMap::new();
        let mut next: BTreeMap<Percept, Vec<(Branch, f64)>> = BTreeMap::new();
        for ((p, branch), w) in out {
            *mass.entry(p).or_default() += w;
            next.entry(p).or_default().push((branch, w));
        }
        let total: f64 = mass.values().sum();
        let dist = Distribution::with_tolerance(mass.into_iter().map(|(p, w)| (p, w / total)).collect(), 1e-9)
            .expect("normalized by construction");
        Expansion { dist, next }
    }
}

struct Walk<'a> {
    model: &'a StmWorldModel,
    t: u64,
    action: u8,
    prev: u8,
    out: &'a mut BTreeMap<(Percept, Branch), f64>,
}

impl Walk<'_> {
    /// Runs one branch to the next decode point, forking on fresh noise cells.
    fn run(&mut self, mut cfg: Config, mut steps: u64, reveals: u32, w: f64) {
        let machine = &self.model.machine;
        let m = self.model.spaces.m() as u64;
        let dummy = machine.signature().dummy_symbol();
        loop {
            if steps >= self.model.budget {
                *self.out.entry((Percept::null(), None)).or_default() += w;
                return;
            }
            if machine.rule(cfg.state).head == Head::Noise && cfg.noise_under_head.is_none() {
                if reveals >= self.model.noise_depth {
                    *self.out.entry((Percept::null(), None)).or_default() += w;
                    return;
                }
                for bit in [false, true] {
                    let mut c = cfg.clone();
                    c.noise_under_head = Some(bit);
                    self.run(c, steps, reveals + 1, w * 0.5);
                }
                return;
            }
            let symbol = match cfg.action_pos {
                0 => dummy,
                p if p == self.t + 1 => self.action,
                _ => self.prev,
            };
            let effect = step(machine, &mut cfg, self.model.ell, m, symbol);
            steps += 1;
            if effect.is_decode_point() {
                let p = self.model.decoder.decode(&cfg.pending, &self.model.spaces);
                cfg.pending.clear();
                *self.out.entry((p, Some(cfg))).or_default() += w;
                return;
            }
        }
    }
}

impl WorldModel for StmWorldModel {
    fn descriptor(&self) -> &str {
        &self.descriptor
    }

    fn space_params(&self) -> Option<SpaceParams> {
        Some(SpaceParams { ell: self.ell, states: self.machine.n_states() })
    }

    fn initial_context(&self) -> Context {
        self.belief(0, 0, vec![(Some(Config::initial()), 1.0)])
    }

    fn predict_in(&self, ctx: &Context, action: Action) -> Cow<'_, Distribution<Percept>> {
        let b = ctx.shared::<Belief>();
        Cow::Owned(self.expansion(b, action).dist.clone())
    }

    fn percept_prob(&self, ctx: &Context, action: Action, percept: &Percept) -> f64 {
        self.expansion(ctx.shared::<Belief>(), action).dist.prob(percept)
    }

    fn advance(&self, ctx: &Context, s: &Step) -> Context {
        let b = ctx.shared::<Belief>();
        let e = self.expansion(b, s.action);
        let entries = match e.next.get(&s.percept) {
            Some(v) => {
                let total: f64 = v.iter().map(|(_, w)| w).sum();
                v.iter().map(|(c, w)| (c.clone(), w / total)).collect()
            }
            None => vec![(None, 1.0)],
        };
        self.belief(b.t + 1, s.action.0, entries)
    }
}
