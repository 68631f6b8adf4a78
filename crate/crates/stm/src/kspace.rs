//! Monte Carlo estimate of space-bounded string complexity `K_β^Space`.

use std::collections::{HashMap, HashSet};

use rand::Rng;
use rand_distr::{Distribution as _, Geometric, Zeta};
use serde::{Deserialize, Serialize};

use crate::error::{Result, StmError};
use crate::exec::DEFAULT_BUDGET;
use crate::machine::{Head, Op, Signature};
use crate::prior::SpacePrior;

/// `−ln P(u ≤ p)` quantile for a 3σ one-sided bound when no sample hit.
const CENSORED_Z: f64 = 6.607_726_653_100_5;
pub const MAX_ELL: u64 = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KSpaceEstimate {
    pub bits: String,
    /// `−ln p̂` in nats, or `ln n` when censored.
    pub k: f64,
    /// Delta-method standard error of `k`; infinite when censored.
    pub std_error: f64,
    /// `k` minus three standard errors, or the 3σ one-sided bound when censored.
    pub k_lower: f64,
    pub hits: u64,
    pub samples: u64,
    pub censored: bool,
}

impl KSpaceEstimate {
    fn from_counts(bits: &[bool], hits: u64, samples: u64) -> KSpaceEstimate {
        let bits: String = bits.iter().map(|&b| if b { '1' } else { '0' }).collect();
        let n = samples as f64;
        if hits == 0 {
            return KSpaceEstimate {
                bits,
                k: n.ln(),
                std_error: f64::INFINITY,
                k_lower: (n / CENSORED_Z).ln(),
                hits,
                samples,
                censored: true,
            };
        }
        if hits == samples {
            return KSpaceEstimate { bits, k: 0.0, std_error: 0.0, k_lower: 0.0, hits, samples, censored: false };
        }
        let p = hits as f64 / n;
        let se = ((1.0 - p) / (n * p)).sqrt();
        KSpaceEstimate { bits, k: -p.ln(), std_error: se, k_lower: -p.ln() - 3.0 * se, hits, samples, censored: false }
    }

    /// Whether `self` is below `other` by at least `sigmas` combined standard
    /// errors; a censored `other` contributes its one-sided bound.
    pub fn separated_below(&self, other: &KSpaceEstimate, sigmas: f64) -> bool {
        if other.censored {
            return other.k_lower - self.k >= sigmas * self.std_error;
        }
        other.k - self.k >= sigmas * (self.std_error.powi(2) + other.std_error.powi(2)).sqrt()
    }
}

pub fn bits_from_hex(hex: &str) -> Result<Vec<bool>> {
    let mut out = Vec::with_capacity(hex.len() * 4);
    for c in hex.chars() {
        let d = c.to_digit(16).ok_or_else(|| StmError::Config(format!("not a hex digit: {c:?}")))?;
        out.extend((0..4).rev().map(|k| (d >> k) & 1 == 1));
    }
    Ok(out)
}

pub fn bits_from_str(s: &str) -> Result<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(StmError::Config(format!("not a bit: {c:?}"))),
        })
        .collect()
}

/// Estimates every string in `xs` from the same sampled machines and noise,
/// so an extension never scores a higher hit count than its prefix.
pub fn k_space_estimates<R: Rng + ?Sized>(
    xs: &[Vec<bool>],
    beta: f64,
    samples: u64,
    budget: u64,
    rng: &mut R,
) -> Result<Vec<KSpaceEstimate>> {
    let prior = SpacePrior::new(beta, Signature::Plain)?;
    if samples == 0 {
        return Err(StmError::Config("need at least one sample".into()));
    }
    let size = Zeta::new(prior.q()).map_err(|e| StmError::Config(e.to_string()))?;
    let tape = Geometric::new(1.0 - beta).map_err(|e| StmError::Config(e.to_string()))?;
    let want = xs.iter().map(Vec::len).max().unwrap_or(0);
    let mut hits = vec![0u64; xs.len()];
    for _ in 0..samples {
        let states = size.sample(rng).min(u64::MAX as f64) as u64;
        let ell = tape.sample(rng).min(MAX_ELL) as u32;
        let out = run_plain(states, ell, want, budget, rng);
        for (x, h) in xs.iter().zip(hits.iter_mut()) {
            if out.len() >= x.len() && out[..x.len()] == x[..] {
                *h += 1;
            }
        }
    }
    Ok(xs.iter().zip(hits).map(|(x, h)| KSpaceEstimate::from_counts(x, h, samples)).collect())
}

pub fn k_space_estimate<R: Rng + ?Sized>(x: &[bool], beta: f64, samples: u64, rng: &mut R) -> Result<KSpaceEstimate> {
    Ok(k_space_estimates(&[x.to_vec()], beta, samples, DEFAULT_BUDGET, rng)?.remove(0))
}

#[derive(Clone, Copy)]
struct LazyTransition {
    op: Op,
    next: u64,
}

#[derive(Clone, Copy)]
struct LazyRule {
    head: Head,
    branches: [LazyTransition; 2],
}

/// Runs a plain machine drawn uniformly among those with `states` states,
/// sampling each state's rule on first visit, until `want` bits are out, the
/// budget is spent, or the machine provably loops without output.
fn run_plain<R: Rng + ?Sized>(states: u64, ell: u32, want: usize, budget: u64, rng: &mut R) -> Vec<bool> {
    let ops = Signature::Plain.ops();
    let mut rules: HashMap<u64, LazyRule> = HashMap::new();
    let mut out = Vec::new();
    let (mut state, mut tape, mut head) = (0u64, 0u64, 0u32);
    let mut noise: Option<bool> = None;
    let mut seen: HashSet<(u64, u64, u32, Option<bool>)> = HashSet::new();
    for _ in 0..budget {
        if out.len() >= want {
            break;
        }
        let rule = *rules.entry(state).or_insert_with(|| {
            let head = if rng.random::<bool>() { Head::Bounded } else { Head::Noise };
            let mut t = || LazyTransition { op: ops[rng.random_range(0..ops.len())], next: rng.random_range(0..states) };
            LazyRule { head, branches: [t(), t()] }
        });
        let symbol = match rule.head {
            Head::Noise => *noise.get_or_insert_with(|| rng.random::<bool>()),
            _ => ell > 0 && (tape >> head) & 1 == 1,
        };
        if !seen.insert((state, tape, head, noise)) {
            break;
        }
        let t = rule.branches[usize::from(symbol)];
        state = t.next;
        match t.op {
            Op::AdvanceNoise => {
                noise = None;
                seen.clear();
            }
            Op::Emit0 | Op::Emit1 => {
                out.push(t.op == Op::Emit1);
                seen.clear();
            }
            Op::BoundedWrite0 if ell > 0 => tape &= !(1 << head),
            Op::BoundedWrite1 if ell > 0 => tape |= 1 << head,
            Op::BoundedLeft if head > 0 => head -= 1,
            Op::BoundedRight if head + 1 < ell => head += 1,
            _ => {}
        }
    }
    out
}
