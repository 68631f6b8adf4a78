//! The interaction history container.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::spaces::{Spaces, Step, Timestep};

/// Steps plus one exploration flag per episode whose flag has been sampled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct History {
    #[serde(skip, default = "default_spaces")]
    spaces: Arc<Spaces>,
    steps: Vec<Step>,
    flags: Vec<bool>,
}

fn default_spaces() -> Arc<Spaces> {
    Arc::new(Spaces::default_acceptance())
}

impl History {
    pub fn new(spaces: Arc<Spaces>) -> History {
        History { spaces, steps: Vec::new(), flags: Vec::new() }
    }

    pub fn from_parts(spaces: Arc<Spaces>, steps: Vec<Step>, flags: Vec<bool>) -> Result<History> {
        let mut h = History::new(spaces);
        for s in steps {
            h.push_step(s)?;
        }
        for f in flags {
            h.push_flag(f)?;
        }
        Ok(h)
    }

    pub fn spaces(&self) -> &Arc<Spaces> {
        &self.spaces
    }

    pub fn m(&self) -> usize {
        self.spaces.m()
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Number of fully completed episodes.
    pub fn completed_episodes(&self) -> usize {
        self.steps.len() / self.m()
    }

    pub fn at_boundary(&self) -> bool {
        self.steps.len().is_multiple_of(self.m())
    }

    /// Coordinates of the next step to be taken.
    pub fn next_timestep(&self) -> Timestep {
        Timestep::from_flat(self.steps.len(), self.m())
    }

    /// Returns a new history with `s` appended; `self` is left untouched.
    pub fn append_step(&self, s: Step) -> Result<History> {
        let mut h = self.clone();
        h.push_step(s)?;
        Ok(h)
    }

    /// Returns a new history with the flag for the next episode recorded.
    pub fn append_flag(&self, e: bool) -> Result<History> {
        let mut h = self.clone();
        h.push_flag(e)?;
        Ok(h)
    }

    pub fn push_step(&mut self, s: Step) -> Result<()> {
        self.spaces.check_step(&s)?;
        self.steps.push(s);
        Ok(())
    }

    /// Flags are sampled at the start of an episode, so at most one flag may
    /// run ahead of the completed steps.
    pub fn push_flag(&mut self, e: bool) -> Result<()> {
        if self.flags.len() > self.completed_episodes() {
            return Err(CoreError::Range(format!(
                "flag for episode {} already sampled",
                self.flags.len() - 1
            )));
        }
        self.flags.push(e);
        Ok(())
    }

    /// Drops steps and flags back to the start of episode `i`.
    pub fn truncate_to_episode(&mut self, i: usize) {
        self.steps.truncate(i * self.m());
        self.flags.truncate(i);
    }

    /// `h_{<i}`: the first `i·m` steps and first `i` flags.
    pub fn episode_prefix(&self, i: usize) -> Result<History> {
        let n = i * self.m();
        if n > self.steps.len() {
            return Err(CoreError::Range(format!(
                "history has {} steps, episode prefix {i} needs {n}",
                self.steps.len()
            )));
        }
        Ok(History {
            spaces: self.spaces.clone(),
            steps: self.steps[..n].to_vec(),
            flags: self.flags[..i.min(self.flags.len())].to_vec(),
        })
    }

    /// The steps of episode `i` that have been taken so far.
    pub fn episode_block(&self, i: usize) -> &[Step] {
        let m = self.m();
        let lo = (i * m).min(self.steps.len());
        let hi = ((i + 1) * m).min(self.steps.len());
        &self.steps[lo..hi]
    }

    /// Steps of the current (possibly empty) episode.
    pub fn current_suffix(&self) -> &[Step] {
        let m = self.m();
        &self.steps[self.steps.len() / m * m..]
    }

    pub fn flag(&self, i: usize) -> Option<bool> {
        self.flags.get(i).copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::{Action, Observation, Reward};

    fn sp() -> Arc<Spaces> {
        Arc::new(Spaces::default_acceptance())
    }

    fn step(a: u8, o: u8) -> Step {
        Step::new(Action(a), Observation(o), Reward::ONE)
    }

    #[test]
    fn append_to_empty() {
        let h = History::new(sp());
        let h1 = h.append_step(step(0, 1)).unwrap();
        assert_eq!(h1.len(), 1);
        assert!(h.is_empty());
    }

    #[test]
    fn append_preserves_prefix() {
        let h = History::from_parts(sp(), vec![step(0, 1), step(1, 2), step(0, 0)], vec![]).unwrap();
        let h2 = h.append_step(step(1, 1)).unwrap();
        assert_eq!(h2.len(), 4);
        assert_eq!(&h2.steps()[..3], h.steps());
    }

    #[test]
    fn out_of_range_reward_rejected() {
        let h = History::new(sp());
        let bad = Step::new(Action(0), Observation(1), Reward::new(3, 4).unwrap());
        assert!(matches!(h.append_step(bad), Err(CoreError::Domain(_))));
        assert!(Reward::new(3, 2).is_err());
    }

    #[test]
    fn prefixes() {
        let steps: Vec<Step> = (0..6).map(|k| step((k % 2) as u8, 1)).collect();
        let h = History::from_parts(sp(), steps.clone(), vec![true, false, true]).unwrap();
        let p = h.episode_prefix(2).unwrap();
        assert_eq!(p.steps(), &steps[..4]);
        assert_eq!(p.flags(), &[true, false]);
        assert!(h.episode_prefix(0).unwrap().is_empty());
        let short = History::from_parts(sp(), steps[..4].to_vec(), vec![]).unwrap();
        assert!(matches!(short.episode_prefix(3), Err(CoreError::Range(_))));
    }

    #[test]
    fn flags_cannot_run_ahead() {
        let mut h = History::new(sp());
        h.push_flag(true).unwrap();
        assert!(h.push_flag(false).is_err());
        h.push_step(step(0, 1)).unwrap();
        h.push_step(step(0, 1)).unwrap();
        h.push_flag(false).unwrap();
    }
}
