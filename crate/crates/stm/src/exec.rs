//! Two-phase execution semantics.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::machine::{Head, Machine, Op, Signature};

pub const DEFAULT_BUDGET: u64 = 10_000;
pub const DEFAULT_NOISE_DEPTH: u32 = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    Episode,
    InterEpisode,
}

/// Everything about a running machine that can influence its future output.
///
/// Noise cells left of the head are never read again and cells right of it are
/// unsampled, so only the cell under the head is kept.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Config {
    pub state: u32,
    pub phase: Phase,
    /// Action tape position; cell 0 holds the dummy action and cell `t + 1`
    /// the action of flat timestep `t`.
    pub action_pos: u64,
    pub bounded: u64,
    pub bounded_head: u32,
    /// Cells of the unbounded work tape holding 1.
    pub unbounded: BTreeSet<i64>,
    pub unbounded_head: i64,
    pub noise_under_head: Option<bool>,
    /// Output bits since the action head last advanced.
    pub pending: Vec<bool>,
}

impl Config {
    pub fn initial() -> Config {
        Config {
            state: 0,
            phase: Phase::InterEpisode,
            action_pos: 0,
            bounded: 0,
            bounded_head: 0,
            unbounded: BTreeSet::new(),
            unbounded_head: 0,
            noise_under_head: None,
            pending: Vec::new(),
        }
    }

    fn bounded_bit(&self, ell: u32) -> bool {
        ell > 0 && (self.bounded >> self.bounded_head) & 1 == 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Effect {
    None,
    /// Moved from the dummy or an episode's last cell into a new episode.
    EnteredEpisode,
    /// Advanced within an episode; the pending bits belong to the step just ended.
    Advanced,
    /// Would have advanced past a multiple of `m`: the episode phase ended and
    /// the pending bits belong to the episode's last step.
    EnteredInterEpisode,
    NoiseAdvanced,
    Emitted(bool),
    /// A forbidden move or write was dropped.
    Suppressed(Op),
}

impl Effect {
    /// Whether this step ended a timestep.
    pub fn is_decode_point(self) -> bool {
        matches!(self, Effect::Advanced | Effect::EnteredInterEpisode)
    }
}

/// Executes one transition. `action_symbol` is the symbol under the action
/// head and the noise cell under the head must already be sampled if read.
pub fn step(machine: &Machine, cfg: &mut Config, ell: u32, m: u64, action_symbol: u8) -> Effect {
    let rule = machine.rule(cfg.state);
    let symbol = match rule.head {
        Head::Action => action_symbol as usize,
        Head::Noise => usize::from(cfg.noise_under_head.expect("noise cell sampled before reading")),
        Head::Bounded => usize::from(cfg.bounded_bit(ell)),
        Head::Unbounded => usize::from(cfg.unbounded.contains(&cfg.unbounded_head)),
    };
    let t = rule.branches[symbol];
    cfg.state = t.next;
    let plain = machine.signature() == Signature::Plain;
    match t.op {
        Op::AdvanceAction => match cfg.phase {
            Phase::InterEpisode => {
                cfg.action_pos += 1;
                cfg.phase = Phase::Episode;
                Effect::EnteredEpisode
            }
            Phase::Episode if cfg.action_pos.is_multiple_of(m) => {
                cfg.phase = Phase::InterEpisode;
                Effect::EnteredInterEpisode
            }
            Phase::Episode => {
                cfg.action_pos += 1;
                Effect::Advanced
            }
        },
        Op::AdvanceNoise => {
            cfg.noise_under_head = None;
            Effect::NoiseAdvanced
        }
        Op::Emit0 | Op::Emit1 => {
            if cfg.phase == Phase::InterEpisode && !plain {
                return Effect::Suppressed(t.op);
            }
            let bit = t.op == Op::Emit1;
            cfg.pending.push(bit);
            Effect::Emitted(bit)
        }
        Op::BoundedWrite0 | Op::BoundedWrite1 => {
            if ell == 0 {
                return Effect::Suppressed(t.op);
            }
            let mask = 1u64 << cfg.bounded_head;
            if t.op == Op::BoundedWrite1 {
                cfg.bounded |= mask;
            } else {
                cfg.bounded &= !mask;
            }
            Effect::None
        }
        Op::BoundedLeft => {
            if cfg.bounded_head == 0 {
                return Effect::Suppressed(t.op);
            }
            cfg.bounded_head -= 1;
            Effect::None
        }
        Op::BoundedRight => {
            if cfg.bounded_head + 1 >= ell {
                return Effect::Suppressed(t.op);
            }
            cfg.bounded_head += 1;
            Effect::None
        }
        Op::UnboundedWrite0 => {
            cfg.unbounded.remove(&cfg.unbounded_head);
            Effect::None
        }
        Op::UnboundedWrite1 => {
            cfg.unbounded.insert(cfg.unbounded_head);
            Effect::None
        }
        Op::UnboundedLeft | Op::UnboundedRight => {
            if cfg.phase == Phase::Episode {
                return Effect::Suppressed(t.op);
            }
            cfg.unbounded_head += if t.op == Op::UnboundedRight { 1 } else { -1 };
            Effect::None
        }
    }
}

/// Head positions observed by instrumented execution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseAudit {
    pub steps: u64,
    /// Unbounded-head moves inside an episode phase plus output writes inside
    /// an inter-episode phase, as seen from the tape positions.
    pub violations: u64,
    /// Transitions whose forbidden part was dropped.
    pub suppressed: u64,
    pub episode_phases: u64,
    pub inter_phases: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawRun {
    /// Output bits grouped by timestep.
    pub outputs: Vec<Vec<bool>>,
    /// First timestep at which the budget ran out; ∅ and 0 from then on.
    pub stalled_at: Option<usize>,
    pub audit: PhaseAudit,
}

/// Runs a machine on a concrete action sequence and noise stream for at most
/// `max_steps` steps, stopping when it needs an action past the given ones.
pub fn run_machine_episode(
    machine: &Machine,
    ell: u32,
    m: u64,
    actions: &[u8],
    noise: &mut dyn FnMut() -> bool,
    budget: u64,
    max_steps: u64,
) -> RawRun {
    let mut cfg = Config::initial();
    let mut audit = PhaseAudit { inter_phases: 1, ..PhaseAudit::default() };
    let mut outputs = Vec::new();
    let mut written: u64 = 0;
    let mut unbounded_at_entry = cfg.unbounded_head;
    let mut written_at_entry = written;
    let mut since_decode = 0u64;
    let dummy = machine.signature().dummy_symbol();
    while audit.steps < max_steps {
        if since_decode >= budget {
            return RawRun { stalled_at: Some(outputs.len()), outputs, audit };
        }
        let pos = cfg.action_pos as usize;
        let symbol = if pos == 0 {
            dummy
        } else {
            match actions.get(pos - 1) {
                Some(a) => *a,
                None => break,
            }
        };
        if machine.rule(cfg.state).head == Head::Noise && cfg.noise_under_head.is_none() {
            cfg.noise_under_head = Some(noise());
        }
        let phase_before = cfg.phase;
        let effect = step(machine, &mut cfg, ell, m, symbol);
        audit.steps += 1;
        since_decode += 1;
        match effect {
            Effect::Emitted(_) => written += 1,
            Effect::Suppressed(_) => audit.suppressed += 1,
            _ => {}
        }
        match phase_before {
            Phase::Episode if cfg.unbounded_head != unbounded_at_entry => audit.violations += 1,
            Phase::InterEpisode if written != written_at_entry => audit.violations += 1,
            _ => {}
        }
        if effect.is_decode_point() {
            outputs.push(std::mem::take(&mut cfg.pending));
            since_decode = 0;
        }
        match effect {
            Effect::EnteredEpisode => {
                audit.episode_phases += 1;
                unbounded_at_entry = cfg.unbounded_head;
            }
            Effect::EnteredInterEpisode => {
                audit.inter_phases += 1;
                written_at_entry = written;
            }
            _ => {}
        }
    }
    RawRun { outputs, stalled_at: None, audit }
}
