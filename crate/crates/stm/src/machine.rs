//! Machine tables, their canonical enumeration and text format.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, StmError};

/// The head a state reads before its transition fires.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Head {
    Action,
    Noise,
    Bounded,
    Unbounded,
}

/// The one elementary operation a transition performs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Op {
    AdvanceAction,
    AdvanceNoise,
    Emit0,
    Emit1,
    BoundedWrite0,
    BoundedWrite1,
    BoundedLeft,
    BoundedRight,
    UnboundedWrite0,
    UnboundedWrite1,
    UnboundedLeft,
    UnboundedRight,
}

const ALL_OPS: [Op; 12] = [
    Op::AdvanceAction,
    Op::AdvanceNoise,
    Op::Emit0,
    Op::Emit1,
    Op::BoundedWrite0,
    Op::BoundedWrite1,
    Op::BoundedLeft,
    Op::BoundedRight,
    Op::UnboundedWrite0,
    Op::UnboundedWrite1,
    Op::UnboundedLeft,
    Op::UnboundedRight,
];

const PLAIN_OPS: [Op; 7] = [
    Op::AdvanceNoise,
    Op::Emit0,
    Op::Emit1,
    Op::BoundedWrite0,
    Op::BoundedWrite1,
    Op::BoundedLeft,
    Op::BoundedRight,
];

const ALL_HEADS: [Head; 4] = [Head::Action, Head::Noise, Head::Bounded, Head::Unbounded];
const PLAIN_HEADS: [Head; 2] = [Head::Noise, Head::Bounded];

impl Head {
    pub fn name(self) -> &'static str {
        match self {
            Head::Action => "action",
            Head::Noise => "noise",
            Head::Bounded => "bounded",
            Head::Unbounded => "unbounded",
        }
    }
}

impl Op {
    pub fn name(self) -> &'static str {
        match self {
            Op::AdvanceAction => "advance-action",
            Op::AdvanceNoise => "advance-noise",
            Op::Emit0 => "emit0",
            Op::Emit1 => "emit1",
            Op::BoundedWrite0 => "b-write0",
            Op::BoundedWrite1 => "b-write1",
            Op::BoundedLeft => "b-left",
            Op::BoundedRight => "b-right",
            Op::UnboundedWrite0 => "u-write0",
            Op::UnboundedWrite1 => "u-write1",
            Op::UnboundedLeft => "u-left",
            Op::UnboundedRight => "u-right",
        }
    }
}

impl FromStr for Head {
    type Err = String;
    fn from_str(s: &str) -> Result<Head, String> {
        ALL_HEADS.into_iter().find(|h| h.name() == s).ok_or_else(|| format!("unknown head {s:?}"))
    }
}

impl FromStr for Op {
    type Err = String;
    fn from_str(s: &str) -> Result<Op, String> {
        ALL_OPS.into_iter().find(|o| o.name() == s).ok_or_else(|| format!("unknown op {s:?}"))
    }
}

/// Which tapes exist. `Full` is the two-phase agent architecture; `Plain`
/// drops the action and unbounded tapes and the phases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Signature {
    Full { actions: u8 },
    Plain,
}

impl Signature {
    pub fn heads(self) -> &'static [Head] {
        match self {
            Signature::Full { .. } => &ALL_HEADS,
            Signature::Plain => &PLAIN_HEADS,
        }
    }

    pub fn ops(self) -> &'static [Op] {
        match self {
            Signature::Full { .. } => &ALL_OPS,
            Signature::Plain => &PLAIN_OPS,
        }
    }

    /// Symbols a head can read; the action tape has a dummy symbol after 𝒜.
    pub fn symbols(self, head: Head) -> usize {
        match (self, head) {
            (Signature::Full { actions }, Head::Action) => actions as usize + 1,
            _ => 2,
        }
    }

    pub fn dummy_symbol(self) -> u8 {
        match self {
            Signature::Full { actions } => actions,
            Signature::Plain => 0,
        }
    }

    fn base(self, states: u64) -> f64 {
        (self.ops().len() as u64 * states) as f64
    }

    /// Distinct rules for one state of an `S`-state machine.
    pub fn choices_per_state(self, states: u64) -> Option<u128> {
        let base = self.ops().len() as u128 * u128::from(states);
        let mut total: u128 = 0;
        for &h in self.heads() {
            total = total.checked_add(base.checked_pow(self.symbols(h) as u32)?)?;
        }
        Some(total)
    }

    /// `N_S`, when it fits in 128 bits.
    pub fn n_machines(self, states: u64) -> Option<u128> {
        self.choices_per_state(states)?.checked_pow(u32::try_from(states).ok()?)
    }

    /// `ln N_S` for any `S`.
    pub fn ln_n_machines(self, states: u64) -> f64 {
        let base = self.base(states);
        let terms: Vec<f64> = self.heads().iter().map(|&h| self.symbols(h) as f64 * base.ln()).collect();
        let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let per_state = max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln();
        states as f64 * per_state
    }

    /// Largest symbol count over heads; `ln N_S ≤ S (k ln(|ops| S) + ln |heads|)`.
    pub fn max_symbols(self) -> usize {
        self.heads().iter().map(|&h| self.symbols(h)).max().unwrap_or(2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Transition {
    pub op: Op,
    pub next: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StateRule {
    pub head: Head,
    /// One transition per symbol under `head`.
    pub branches: Vec<Transition>,
}

/// A total transition table: state `0` is the start state.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Machine {
    signature: Signature,
    rules: Vec<StateRule>,
}

impl Machine {
    pub fn new(signature: Signature, rules: Vec<StateRule>) -> Result<Machine> {
        let n = rules.len();
        if n == 0 {
            return Err(StmError::Config("a machine needs at least one state".into()));
        }
        for (s, r) in rules.iter().enumerate() {
            if !signature.heads().contains(&r.head) {
                return Err(StmError::Config(format!("state {s}: head {} not in signature", r.head.name())));
            }
            if r.branches.len() != signature.symbols(r.head) {
                return Err(StmError::Config(format!("state {s}: table is not total")));
            }
            for t in &r.branches {
                if !signature.ops().contains(&t.op) || t.next as usize >= n {
                    return Err(StmError::Config(format!("state {s}: bad transition {t:?}")));
                }
            }
        }
        Ok(Machine { signature, rules })
    }

    pub fn signature(&self) -> Signature {
        self.signature
    }

    pub fn n_states(&self) -> u64 {
        self.rules.len() as u64
    }

    pub fn rule(&self, s: u32) -> &StateRule {
        &self.rules[s as usize]
    }

    /// The `k`-th machine with `states` states in the canonical order.
    pub fn from_index(signature: Signature, states: u64, k: u128) -> Result<Machine> {
        let per = signature
            .choices_per_state(states)
            .ok_or(StmError::Infeasible { what: "machine index space", size: f64::INFINITY, cap: u128::MAX as f64 })?;
        if let Some(n) = signature.n_machines(states) {
            if k >= n {
                return Err(StmError::Config(format!("index {k} out of range for {states} states")));
            }
        }
        let mut rest = k;
        let mut rules = Vec::with_capacity(states as usize);
        for _ in 0..states {
            rules.push(rule_from_choice(signature, states, rest % per));
            rest /= per;
        }
        Machine::new(signature, rules)
    }

    /// Inverse of [`Machine::from_index`]; `None` if the index overflows.
    pub fn index(&self) -> Option<u128> {
        let states = self.n_states();
        let per = self.signature.choices_per_state(states)?;
        let mut k: u128 = 0;
        for r in self.rules.iter().rev() {
            k = k.checked_mul(per)?.checked_add(choice_of_rule(self.signature, states, r))?;
        }
        Some(k)
    }

    /// One transition per line: `state head symbol -> op next`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let sig = match self.signature {
            Signature::Full { actions } => format!("full actions={actions}"),
            Signature::Plain => "plain".to_string(),
        };
        out.push_str(&format!("stm v1 {sig} states={}\n", self.rules.len()));
        for (s, r) in self.rules.iter().enumerate() {
            for (sym, t) in r.branches.iter().enumerate() {
                out.push_str(&format!("{s} {} {sym} -> {} {}\n", r.head.name(), t.op.name(), t.next));
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Machine> {
        let err = |line: usize, msg: String| StmError::Parse { line, msg };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty text".into()))?;
        let words: Vec<&str> = header.split_whitespace().collect();
        let (signature, states_word) = match words.as_slice() {
            ["stm", "v1", "plain", st] => (Signature::Plain, *st),
            ["stm", "v1", "full", act, st] => {
                let actions = act
                    .strip_prefix("actions=")
                    .and_then(|a| a.parse().ok())
                    .ok_or_else(|| err(1, format!("bad action count {act:?}")))?;
                (Signature::Full { actions }, *st)
            }
            _ => return Err(err(1, format!("bad header {header:?}"))),
        };
        let n: usize = states_word
            .strip_prefix("states=")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| err(1, format!("bad state count {states_word:?}")))?;
        let mut heads: Vec<Option<Head>> = vec![None; n];
        let mut branches: Vec<Vec<Option<Transition>>> = vec![Vec::new(); n];
        for (k, line) in lines {
            let lineno = k + 1;
            let w: Vec<&str> = line.split_whitespace().collect();
            let [s, head, sym, "->", op, next] = w.as_slice() else {
                return Err(err(lineno, format!("expected `state head symbol -> op next`, got {line:?}")));
            };
            let s: usize = s.parse().map_err(|_| err(lineno, format!("bad state {s:?}")))?;
            if s >= n {
                return Err(err(lineno, format!("state {s} out of range")));
            }
            let head: Head = head.parse().map_err(|e| err(lineno, e))?;
            let sym: usize = sym.parse().map_err(|_| err(lineno, format!("bad symbol {sym:?}")))?;
            let op: Op = op.parse().map_err(|e| err(lineno, e))?;
            let next: u32 = next.parse().map_err(|_| err(lineno, format!("bad next state {next:?}")))?;
            if *heads[s].get_or_insert(head) != head {
                return Err(err(lineno, format!("state {s} reads two different heads")));
            }
            let slots = &mut branches[s];
            if slots.is_empty() {
                slots.resize(signature.symbols(head), None);
            }
            let slot = slots.get_mut(sym).ok_or_else(|| err(lineno, format!("symbol {sym} out of range")))?;
            if slot.replace(Transition { op, next }).is_some() {
                return Err(err(lineno, format!("duplicate transition for state {s}, symbol {sym}")));
            }
        }
        let mut rules = Vec::with_capacity(n);
        for s in 0..n {
            let head = heads[s].ok_or_else(|| err(0, format!("state {s} has no transitions")))?;
            let b: Option<Vec<Transition>> = branches[s].iter().cloned().collect();
            let b = b.ok_or_else(|| err(0, format!("state {s}: table is not total")))?;
            rules.push(StateRule { head, branches: b });
        }
        Machine::new(signature, rules)
    }
}

impl fmt::Display for Machine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Decodes a per-state choice: heads in signature order, each owning a block of
/// `(|ops|·S)^symbols` rules; within a block, digit `sym` (least significant
/// first) is `op + |ops|·next`.
fn rule_from_choice(signature: Signature, states: u64, mut c: u128) -> StateRule {
    let n_ops = signature.ops().len() as u128;
    let base = n_ops * u128::from(states);
    for &head in signature.heads() {
        let symbols = signature.symbols(head);
        let block = base.pow(symbols as u32);
        if c < block {
            let mut branches = Vec::with_capacity(symbols);
            for _ in 0..symbols {
                let d = c % base;
                c /= base;
                branches.push(Transition { op: signature.ops()[(d % n_ops) as usize], next: (d / n_ops) as u32 });
            }
            return StateRule { head, branches };
        }
        c -= block;
    }
    unreachable!("choice below choices_per_state")
}

fn choice_of_rule(signature: Signature, states: u64, rule: &StateRule) -> u128 {
    let n_ops = signature.ops().len() as u128;
    let base = n_ops * u128::from(states);
    let mut offset = 0u128;
    for &head in signature.heads() {
        if head == rule.head {
            break;
        }
        offset += base.pow(signature.symbols(head) as u32);
    }
    let mut c = 0u128;
    for t in rule.branches.iter().rev() {
        let op = signature.ops().iter().position(|o| *o == t.op).expect("op in signature") as u128;
        c = c * base + op + n_ops * u128::from(t.next);
    }
    offset + c
}

/// All machines with `states` states, in index order.
pub fn enumerate_machines(signature: Signature, states: u64, cap: f64) -> Result<(Vec<Machine>, u128)> {
    let n = signature.n_machines(states);
    let size = n.map_or(f64::INFINITY, |n| n as f64);
    if size > cap {
        return Err(StmError::Infeasible { what: "machine enumeration", size, cap });
    }
    let n = n.expect("finite below cap");
    let machines = (0..n).map(|k| Machine::from_index(signature, states, k)).collect::<Result<Vec<_>>>()?;
    Ok((machines, n))
}

/// `max_{S ≤ s_max} ln N_S / S`: the smallest `C` with `ln N_S ≤ C·S` so far.
/// It grows like `ln S`, so no constant works for every `S`.
pub fn measured_c(signature: Signature, s_max: u64) -> f64 {
    (1..=s_max).map(|s| signature.ln_n_machines(s) / s as f64).fold(0.0, f64::max)
}
