//! Interaction spaces, timesteps and single interaction steps.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{CoreError, Result};

/// Index into the declared action set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Action(pub u8);

/// Index into the observation set. Index 0 is always the empty observation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Observation(pub u8);

impl Observation {
    pub const EMPTY: Observation = Observation(0);

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

/// An exact rational reward in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Reward(Ratio<u32>);

impl Reward {
    pub const ZERO: Reward = Reward(Ratio::new_raw(0, 1));
    pub const ONE: Reward = Reward(Ratio::new_raw(1, 1));

    pub fn new(num: u32, den: u32) -> Result<Reward> {
        if den == 0 || num > den {
            return Err(CoreError::Domain(format!("reward {num}/{den} is not in [0, 1]")));
        }
        Ok(Reward(Ratio::new(num, den)))
    }

    pub fn numer(self) -> u32 {
        *self.0.numer()
    }

    pub fn denom(self) -> u32 {
        *self.0.denom()
    }

    /// Exact for dyadic rewards; otherwise the nearest double.
    pub fn to_f64(self) -> f64 {
        f64::from(self.numer()) / f64::from(self.denom())
    }
}

impl fmt::Display for Reward {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom() == 1 {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl FromStr for Reward {
    type Err = CoreError;

    /// Accepts `p/q`, integers and finite decimal fractions such as `0.25`.
    fn from_str(s: &str) -> Result<Reward> {
        let s = s.trim();
        let bad = || CoreError::Domain(format!("cannot parse reward {s:?}"));
        if let Some((n, d)) = s.split_once('/') {
            let n: u32 = n.trim().parse().map_err(|_| bad())?;
            let d: u32 = d.trim().parse().map_err(|_| bad())?;
            return Reward::new(n, d);
        }
        if let Some((int, frac)) = s.split_once('.') {
            if frac.is_empty() || frac.len() > 9 || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            let int: u32 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
            let den = 10u64.pow(frac.len() as u32);
            let num = u64::from(int) * den + frac.parse::<u64>().map_err(|_| bad())?;
            let r = Ratio::new(num, den);
            let (n, d) = (u32::try_from(*r.numer()), u32::try_from(*r.denom()));
            return match (n, d) {
                (Ok(n), Ok(d)) => Reward::new(n, d),
                _ => Err(bad()),
            };
        }
        let n: u32 = s.parse().map_err(|_| bad())?;
        Reward::new(n, 1)
    }
}

impl Serialize for Reward {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Reward {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Int(u32),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::Int(n) => Reward::new(n, 1).map_err(serde::de::Error::custom),
        }
    }
}

/// What the agent receives after acting: an observation and a reward.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Percept {
    pub obs: Observation,
    pub reward: Reward,
}

impl Percept {
    pub fn new(obs: Observation, reward: Reward) -> Percept {
        Percept { obs, reward }
    }

    /// Observation ∅ with reward 0: door truncation and non-halting models.
    pub fn null() -> Percept {
        Percept { obs: Observation::EMPTY, reward: Reward::ZERO }
    }
}

/// One `(a, o, r)` triple.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Step {
    pub action: Action,
    pub percept: Percept,
}

impl Step {
    pub fn new(action: Action, obs: Observation, reward: Reward) -> Step {
        Step { action, percept: Percept { obs, reward } }
    }

    pub fn reward(&self) -> Reward {
        self.percept.reward
    }
}

/// `(episode, step)` coordinates. The derived order is the lexicographic one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Timestep {
    pub episode: u64,
    pub step: u32,
}

impl Timestep {
    pub fn from_flat(t: usize, m: usize) -> Timestep {
        Timestep { episode: (t / m) as u64, step: (t % m) as u32 }
    }

    pub fn flat(self, m: usize) -> usize {
        self.episode as usize * m + self.step as usize
    }
}

/// Declared action, observation and reward sets plus the episode length.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Spaces {
    actions: Vec<String>,
    /// Non-empty observation names; observation index `k + 1` is `observations[k]`.
    observations: Vec<String>,
    rewards: Vec<Reward>,
    m: usize,
}

/// Name used for the empty observation when rendering.
pub const EMPTY_OBSERVATION: &str = "∅";

impl Spaces {
    pub fn new(
        actions: Vec<String>,
        observations: Vec<String>,
        rewards: Vec<Reward>,
        m: usize,
    ) -> Result<Spaces> {
        if actions.len() < 2 || actions.len() > 255 {
            return Err(CoreError::Config("need between 2 and 255 actions".into()));
        }
        if observations.is_empty() || observations.len() > 254 {
            return Err(CoreError::Config("need between 1 and 254 observations besides ∅".into()));
        }
        if rewards.is_empty() {
            return Err(CoreError::Config("reward set is empty".into()));
        }
        if m == 0 {
            return Err(CoreError::Config("episode length must be positive".into()));
        }
        if !rewards.contains(&Reward::ZERO) {
            return Err(CoreError::Config("reward set must contain 0".into()));
        }
        for (k, name) in actions.iter().enumerate() {
            if actions[..k].contains(name) {
                return Err(CoreError::Config(format!("duplicate action {name:?}")));
            }
        }
        for (k, name) in observations.iter().enumerate() {
            if name == EMPTY_OBSERVATION || name.is_empty() || observations[..k].contains(name) {
                return Err(CoreError::Config(format!("invalid or duplicate observation {name:?}")));
            }
        }
        for (k, r) in rewards.iter().enumerate() {
            if rewards[..k].contains(r) {
                return Err(CoreError::Config(format!("duplicate reward {r}")));
            }
        }
        Ok(Spaces { actions, observations, rewards, m })
    }

    /// Two actions, two observations, rewards {0, 1/2, 1}, two steps per episode.
    pub fn default_acceptance() -> Spaces {
        Spaces::new(
            vec!["a0".into(), "a1".into()],
            vec!["o0".into(), "o1".into()],
            vec![Reward::ZERO, Reward::new(1, 2).unwrap(), Reward::ONE],
            2,
        )
        .unwrap()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    /// Including ∅.
    pub fn n_observations(&self) -> usize {
        self.observations.len() + 1
    }

    pub fn rewards(&self) -> &[Reward] {
        &self.rewards
    }

    pub fn actions(&self) -> impl Iterator<Item = Action> + '_ {
        (0..self.actions.len()).map(|k| Action(k as u8))
    }

    /// All observations in index order, starting with ∅.
    pub fn observations(&self) -> impl Iterator<Item = Observation> + '_ {
        (0..self.n_observations()).map(|k| Observation(k as u8))
    }

    /// Every `(o, r)` pair in declaration order.
    pub fn percepts(&self) -> Vec<Percept> {
        let mut out = Vec::with_capacity(self.n_observations() * self.rewards.len());
        for o in self.observations() {
            for &r in &self.rewards {
                out.push(Percept::new(o, r));
            }
        }
        out
    }

    /// `|A × O × R|`.
    pub fn step_outcomes(&self) -> usize {
        self.n_actions() * self.n_observations() * self.rewards.len()
    }

    pub fn action_name(&self, a: Action) -> &str {
        &self.actions[a.0 as usize]
    }

    pub fn observation_name(&self, o: Observation) -> &str {
        if o.is_empty() {
            EMPTY_OBSERVATION
        } else {
            &self.observations[o.0 as usize - 1]
        }
    }

    pub fn action_by_name(&self, name: &str) -> Result<Action> {
        self.actions
            .iter()
            .position(|n| n == name)
            .map(|k| Action(k as u8))
            .ok_or_else(|| CoreError::Domain(format!("unknown action {name:?}")))
    }

    /// Resolves operator-enterable observation text. ∅ is never returned.
    pub fn observation_by_name(&self, name: &str) -> Result<Observation> {
        self.observations
            .iter()
            .position(|n| n == name)
            .map(|k| Observation(k as u8 + 1))
            .ok_or_else(|| CoreError::Domain(format!("unknown observation {name:?}")))
    }

    /// Like [`Spaces::observation_by_name`] but also accepts the ∅ symbol.
    pub fn any_observation_by_name(&self, name: &str) -> Result<Observation> {
        if name == EMPTY_OBSERVATION {
            Ok(Observation::EMPTY)
        } else {
            self.observation_by_name(name)
        }
    }

    pub fn reward_index(&self, r: Reward) -> Option<usize> {
        self.rewards.iter().position(|&x| x == r)
    }

    pub fn check_action(&self, a: Action) -> Result<()> {
        if (a.0 as usize) < self.actions.len() {
            Ok(())
        } else {
            Err(CoreError::Domain(format!("action index {} out of range", a.0)))
        }
    }

    pub fn check_percept(&self, p: Percept) -> Result<()> {
        if p.obs.0 as usize >= self.n_observations() {
            return Err(CoreError::Domain(format!("observation index {} out of range", p.obs.0)));
        }
        if self.reward_index(p.reward).is_none() {
            return Err(CoreError::Domain(format!("reward {} not in the reward set", p.reward)));
        }
        Ok(())
    }

    pub fn check_step(&self, s: &Step) -> Result<()> {
        self.check_action(s.action)?;
        self.check_percept(s.percept)
    }

    pub fn format_step(&self, s: &Step) -> String {
        format!(
            "({}, {}, {})",
            self.action_name(s.action),
            self.observation_name(s.percept.obs),
            s.percept.reward
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reward_parsing() {
        assert_eq!("1/2".parse::<Reward>().unwrap(), Reward::new(1, 2).unwrap());
        assert_eq!("0.5".parse::<Reward>().unwrap(), Reward::new(2, 4).unwrap());
        assert_eq!("1".parse::<Reward>().unwrap(), Reward::ONE);
        assert_eq!(".25".parse::<Reward>().unwrap(), Reward::new(1, 4).unwrap());
        assert!("1.5".parse::<Reward>().is_err());
        assert!("3/2".parse::<Reward>().is_err());
        assert!("x".parse::<Reward>().is_err());
    }

    #[test]
    fn reward_serde_round_trip() {
        let r = Reward::new(1, 2).unwrap();
        let s = serde_json::to_string(&r).unwrap();
        assert_eq!(s, "\"1/2\"");
        assert_eq!(serde_json::from_str::<Reward>(&s).unwrap(), r);
        assert_eq!(serde_json::from_str::<Reward>("1").unwrap(), Reward::ONE);
    }

    #[test]
    fn timestep_order_matches_flat_index() {
        let m = 3;
        let mut ts: Vec<Timestep> = (0..12).rev().map(|t| Timestep::from_flat(t, m)).collect();
        ts.sort();
        for (t, ts) in ts.iter().enumerate() {
            assert_eq!(ts.flat(m), t);
        }
        let a = Timestep { episode: 1, step: 2 };
        let b = Timestep { episode: 2, step: 0 };
        assert!(a < b);
    }

    #[test]
    fn empty_observation_not_enterable() {
        let sp = Spaces::default_acceptance();
        assert!(sp.observation_by_name(EMPTY_OBSERVATION).is_err());
        assert_eq!(sp.observation_by_name("o1").unwrap(), Observation(2));
        assert_eq!(sp.any_observation_by_name(EMPTY_OBSERVATION).unwrap(), Observation::EMPTY);
    }

    #[test]
    fn spaces_validation() {
        let r = vec![Reward::ZERO];
        assert!(Spaces::new(vec!["a".into()], vec!["o".into()], r.clone(), 1).is_err());
        assert!(Spaces::new(vec!["a".into(), "b".into()], vec!["o".into()], r.clone(), 0).is_err());
        assert!(Spaces::new(vec!["a".into(), "a".into()], vec!["o".into()], r.clone(), 1).is_err());
        assert!(Spaces::new(vec!["a".into(), "b".into()], vec!["∅".into()], r.clone(), 1).is_err());
        assert!(Spaces::new(vec!["a".into(), "b".into()], vec!["o".into()], r, 1).is_ok());
    }

    #[test]
    fn default_step_outcomes() {
        let sp = Spaces::default_acceptance();
        assert_eq!(sp.step_outcomes(), 18);
        assert_eq!(sp.percepts().len(), 9);
    }
}
