//! The live session protocol: a human supplies percepts (and mentor actions in
//! exploratory episodes) while the agent plans and records.

use std::sync::Arc;

use bomai_core::{Action, Percept, Reward, Step};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{Agent, Checkpoint, EpisodeStart};
use crate::config::Experiment;
use crate::error::{HarnessError, Result};
use crate::record::{AbortedEpisode, EpisodeRow, RunRecord};
use crate::runner::{stream, EXPLORATION_STREAM};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    State,
    Observation { text: String, reward: String },
    MentorAction { action: String },
    OpenDoor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerBody {
    State { waiting_for: Waiting, explore: Option<bool>, door_open: bool },
    NeedObservation { action: String, explore: bool },
    NeedMentorAction { actions: Vec<String> },
    EpisodeClosed { e: bool, p_exp: f64, episode_reward: f64, map_id: String, steps: Vec<String> },
    Finished { episodes: usize },
    Error { message: String },
}

/// Every server message carries the coordinates of the next step and the
/// history so far.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServerMessage {
    pub i: usize,
    pub j: usize,
    pub history: Vec<String>,
    #[serde(flatten)]
    pub body: ServerBody,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Waiting {
    Observation,
    MentorAction,
    Nothing,
}

struct Open {
    start: EpisodeStart,
    checkpoint: Checkpoint,
    rng: ChaCha8Rng,
    action: Option<Action>,
    door_open: bool,
}

pub struct Session {
    agent: Agent,
    seed: u64,
    explore_rng: ChaCha8Rng,
    open: Option<Open>,
    rows: Vec<EpisodeRow>,
    aborted: Vec<AbortedEpisode>,
}

impl Session {
    pub fn new(exp: Arc<Experiment>, seed: u64) -> Session {
        Session {
            agent: Agent::new(exp),
            seed,
            explore_rng: stream(seed, EXPLORATION_STREAM),
            open: None,
            rows: Vec::new(),
            aborted: Vec::new(),
        }
    }

    fn episodes(&self) -> usize {
        self.agent.experiment().config.episodes
    }

    pub fn finished(&self) -> bool {
        self.rows.len() >= self.episodes()
    }

    /// Opens the next episode if needed and returns the current prompt.
    pub fn resume(&mut self) -> Result<Vec<ServerMessage>> {
        let mut out = Vec::new();
        self.advance(&mut out)?;
        Ok(out)
    }

    pub fn handle(&mut self, msg: ClientMessage) -> Result<Vec<ServerMessage>> {
        let mut out = Vec::new();
        match self.apply(msg, &mut out) {
            Ok(()) => Ok(out),
            Err(HarnessError::Protocol(message)) => Ok(vec![self.message(ServerBody::Error { message })]),
            Err(e) => Err(e),
        }
    }

    pub fn handle_json(&mut self, text: &str) -> Result<Vec<ServerMessage>> {
        match serde_json::from_str::<ClientMessage>(text) {
            Ok(msg) => self.handle(msg),
            Err(e) => Ok(vec![self.message(ServerBody::Error { message: format!("bad message: {e}") })]),
        }
    }

    fn apply(&mut self, msg: ClientMessage, out: &mut Vec<ServerMessage>) -> Result<()> {
        let exp = Arc::clone(self.agent.experiment());
        let spaces = &exp.spaces;
        match msg {
            ClientMessage::State => {
                out.push(self.state());
                return Ok(());
            }
            ClientMessage::MentorAction { action } => {
                if self.waiting() != Waiting::MentorAction {
                    return Err(HarnessError::Protocol("no mentor action is expected".into()));
                }
                let a = spaces.action_by_name(&action).map_err(|e| HarnessError::Protocol(e.to_string()))?;
                if self.agent.tracker.mixture_act(&exp.policies)?.prob(&a) <= 0.0 {
                    return Err(HarnessError::Protocol(format!("no policy in the class takes {action}")));
                }
                self.open.as_mut().expect("episode open").action = Some(a);
            }
            ClientMessage::Observation { text, reward } => {
                if self.waiting() != Waiting::Observation {
                    return Err(HarnessError::Protocol("no observation is expected".into()));
                }
                let obs = spaces.observation_by_name(&text).map_err(|e| HarnessError::Protocol(e.to_string()))?;
                let r: Reward = reward.parse().map_err(|e: bomai_core::CoreError| HarnessError::Protocol(e.to_string()))?;
                if spaces.reward_index(r).is_none() {
                    return Err(HarnessError::Protocol(format!("reward {r} is not in the reward set")));
                }
                self.admissible(Percept::new(obs, r))?;
                self.take_step(Percept::new(obs, r))?;
            }
            ClientMessage::OpenDoor => {
                if self.waiting() != Waiting::Observation {
                    return Err(HarnessError::Protocol("the door can only open while a percept is awaited".into()));
                }
                self.admissible(Percept::null())?;
                self.open.as_mut().expect("episode open").door_open = true;
                self.take_step(Percept::null())?;
            }
        }
        self.advance(out)
    }

    /// Refuses percepts that every world-model in the class rules out.
    fn admissible(&self, percept: Percept) -> Result<()> {
        let exp = self.agent.experiment();
        let action = self.open.as_ref().and_then(|o| o.action).expect("action chosen");
        if self.agent.tracker.mixture_predict(&exp.models, action)?.prob(&percept) <= 0.0 {
            let step = exp.spaces.format_step(&Step { action, percept });
            return Err(HarnessError::Protocol(format!("no world-model in the class admits {step}")));
        }
        Ok(())
    }

    fn take_step(&mut self, percept: Percept) -> Result<()> {
        let open = self.open.as_mut().expect("episode open");
        let action = open.action.take().expect("action chosen");
        self.agent.observe(Step { action, percept })
    }

    /// Runs automatic steps until the session needs input, closing and
    /// opening episodes on the way.
    fn advance(&mut self, out: &mut Vec<ServerMessage>) -> Result<()> {
        loop {
            if self.open.is_none() {
                if self.finished() {
                    out.push(self.message(ServerBody::Finished { episodes: self.rows.len() }));
                    return Ok(());
                }
                let checkpoint = self.agent.checkpoint();
                let rng = self.explore_rng.clone();
                let start = self.agent.begin_episode(&mut self.explore_rng)?;
                self.open = Some(Open { start, checkpoint, rng, action: None, door_open: false });
            }
            let open = self.open.as_ref().expect("episode open");
            if self.agent.episode_complete(&open.start) {
                let open = self.open.take().expect("episode open");
                let row = self.agent.finish_episode(open.start)?;
                out.push(self.message(ServerBody::EpisodeClosed {
                    e: row.e,
                    p_exp: row.p_exp,
                    episode_reward: row.episode_reward,
                    map_id: row.map_id.clone(),
                    steps: row.steps.clone(),
                }));
                self.rows.push(row);
                continue;
            }
            if open.action.is_none() {
                match self.agent.planned_action(&open.start) {
                    Some(a) => self.open.as_mut().expect("episode open").action = Some(a),
                    None => {
                        out.push(self.prompt());
                        return Ok(());
                    }
                }
            }
            if self.open.as_ref().expect("episode open").door_open {
                self.admissible(Percept::null())?;
                self.take_step(Percept::null())?;
                continue;
            }
            out.push(self.prompt());
            return Ok(());
        }
    }

    pub fn waiting(&self) -> Waiting {
        match &self.open {
            None => Waiting::Nothing,
            Some(o) if o.action.is_some() => Waiting::Observation,
            Some(_) => Waiting::MentorAction,
        }
    }

    fn prompt(&self) -> ServerMessage {
        let exp = self.agent.experiment();
        let open = self.open.as_ref().expect("episode open");
        let body = match open.action {
            Some(a) => ServerBody::NeedObservation { action: exp.spaces.action_name(a).to_string(), explore: open.start.explore },
            None => ServerBody::NeedMentorAction {
                actions: exp.spaces.actions().map(|a| exp.spaces.action_name(a).to_string()).collect(),
            },
        };
        self.message(body)
    }

    pub fn state(&self) -> ServerMessage {
        let open = self.open.as_ref();
        self.message(ServerBody::State {
            waiting_for: self.waiting(),
            explore: open.map(|o| o.start.explore),
            door_open: open.is_some_and(|o| o.door_open),
        })
    }

    fn message(&self, body: ServerBody) -> ServerMessage {
        let h = &self.agent.history;
        let m = h.m();
        let spaces = &self.agent.experiment().spaces;
        ServerMessage {
            i: h.len() / m,
            j: h.len() % m,
            history: h.steps().iter().map(|s| spaces.format_step(s)).collect(),
            body,
        }
    }

    /// Drops a half-finished episode and rewinds to its boundary, including the
    /// exploration draw, so the episode replays with the same `e_i`.
    pub fn abort(&mut self, reason: &str) {
        if let Some(open) = self.open.take() {
            let steps_taken = self.agent.history.len() - open.start.episode * self.agent.history.m();
            self.agent.restore(open.checkpoint);
            self.explore_rng = open.rng;
            self.aborted.push(AbortedEpisode { episode: open.start.episode, steps_taken, reason: reason.into() });
        }
    }

    pub fn record(&self) -> RunRecord {
        RunRecord { meta: self.agent.meta(self.seed), rows: self.rows.clone(), aborted: self.aborted.clone() }
    }

    pub fn error_message(&self, message: &str) -> ServerMessage {
        self.message(ServerBody::Error { message: message.into() })
    }

    pub fn episodes_done(&self) -> usize {
        self.rows.len()
    }

    pub fn agent(&self) -> &Agent {
        &self.agent
    }
}
