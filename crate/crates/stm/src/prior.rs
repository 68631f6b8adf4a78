//! The space prior over `(machine, ℓ)` pairs and its entropy.

use bomai_core::SpaceParams;
use serde::{Deserialize, Serialize};

use crate::error::{Result, StmError};
use crate::machine::Signature;

pub fn space_of(p: SpaceParams) -> f64 {
    p.space()
}

/// `ζ(s)` for real `s > 1` by Euler–Maclaurin summation.
pub fn zeta(s: f64) -> f64 {
    assert!(s > 1.0, "zeta needs s > 1");
    const N: usize = 12;
    // B_{2k} / (2k)!
    const COEF: [f64; 6] = [
        1.0 / 12.0,
        -1.0 / 720.0,
        1.0 / 30240.0,
        -1.0 / 1209600.0,
        1.0 / 47900160.0,
        -691.0 / 1307674368000.0,
    ];
    let n = N as f64;
    let mut sum: f64 = (1..N).map(|k| (k as f64).powf(-s)).sum();
    sum += n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s);
    // s (s+1) … (s+2k−2) · N^{−s−2k+1}
    let mut rising = s;
    let mut power = n.powf(-s - 1.0);
    for (k, c) in COEF.iter().enumerate() {
        sum += c * rising * power;
        let j = 2.0 * k as f64;
        rising *= (s + j + 1.0) * (s + j + 2.0);
        power /= n * n;
    }
    sum
}

/// `u(ν_k^{≤ℓ}) = β^{ℓ + log₂ S_k} / (S_k² N_{S_k})`, normalized against the
/// total over every machine of every size and every `ℓ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpacePrior {
    beta: f64,
    signature: Signature,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedPrior {
    /// Renormalized over the given set; sums to 1.
    pub weights: Vec<f64>,
    /// Share of the full prior's mass covered by the set.
    pub enumerated_mass: f64,
    pub tail_mass: f64,
}

impl SpacePrior {
    pub fn new(beta: f64, signature: Signature) -> Result<SpacePrior> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(StmError::Config(format!("β must lie in (0, 1), got {beta}")));
        }
        Ok(SpacePrior { beta, signature })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn signature(&self) -> Signature {
        self.signature
    }

    /// Exponent of the zeta series after summing over machines: `2 − log₂ β`.
    pub fn q(&self) -> f64 {
        2.0 - self.beta.log2()
    }

    pub fn ln_unnormalized(&self, p: SpaceParams) -> f64 {
        let s = p.states as f64;
        p.space() * self.beta.ln() - 2.0 * s.ln() - self.signature.ln_n_machines(p.states)
    }

    pub fn unnormalized(&self, p: SpaceParams) -> f64 {
        self.ln_unnormalized(p).exp()
    }

    /// `Σ_{S,k,ℓ} u = ζ(q) / (1 − β)`.
    pub fn total(&self) -> f64 {
        zeta(self.q()) / (1.0 - self.beta)
    }

    pub fn weight(&self, p: SpaceParams) -> f64 {
        (self.ln_unnormalized(p) - self.total().ln()).exp()
    }

    pub fn normalize(&self, set: &[SpaceParams]) -> NormalizedPrior {
        let ln_u: Vec<f64> = set.iter().map(|p| self.ln_unnormalized(*p)).collect();
        let max = ln_u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let scaled: Vec<f64> = ln_u.iter().map(|l| (l - max).exp()).collect();
        let sum: f64 = scaled.iter().sum();
        let enumerated_mass = (max + sum.ln() - self.total().ln()).exp();
        NormalizedPrior {
            weights: scaled.iter().map(|x| x / sum).collect(),
            enumerated_mass,
            tail_mass: 1.0 - enumerated_mass,
        }
    }

    /// Entropy (nats) of the normalized prior restricted to `S ≤ s_max`,
    /// `ℓ ≤ ell_max`, plus an upper bound on the rest.
    pub fn entropy(&self, s_max: u64, ell_max: u32) -> EntropyEstimate {
        let beta = self.beta;
        let ln_beta = beta.ln();
        let q = self.q();
        let ln_z = self.total().ln();
        // −ln w for one machine of size S at ℓ = 0
        let surprisal = |s: u64, ln_n: f64| ln_n + ln_z + q * (s as f64).ln();
        let mut partial = 0.0;
        let mut tail_ell = 0.0;
        let l1 = f64::from(ell_max) + 1.0;
        let g0 = beta.powf(l1) / (1.0 - beta);
        let g1 = beta.powf(l1) * (l1 * (1.0 - beta) + beta) / (1.0 - beta).powi(2);
        for s in 1..=s_max {
            let ln_n = self.signature.ln_n_machines(s);
            let group = (s as f64).powf(-q) / ln_z.exp();
            for ell in 0..=ell_max {
                let b = beta.powi(ell as i32);
                partial += group * b * (surprisal(s, ln_n) - f64::from(ell) * ln_beta);
            }
            tail_ell += group * (surprisal(s, ln_n) * g0 - ln_beta * g1);
        }
        let tail_s = self.size_tail_bound(s_max);
        EntropyEstimate {
            partial,
            tail: tail_ell + tail_s,
            total: partial + tail_ell + tail_s,
            measured_c: crate::machine::measured_c(self.signature, s_max),
        }
    }

    /// Upper bound on the entropy contributed by all sizes `S > s_max`, using
    /// `ln N_S ≤ S (k ln(|ops| S) + ln |heads|)` with `k` the largest symbol count.
    fn size_tail_bound(&self, s_max: u64) -> f64 {
        let beta = self.beta;
        let q = self.q();
        let ln_z = self.total().ln();
        let k = self.signature.max_symbols() as f64;
        let n_ops = self.signature.ops().len() as f64;
        let ln_heads = (self.signature.heads().len() as f64).ln();
        let ell_mean = -beta.ln() * beta / (1.0 - beta).powi(2);
        // per-size bound times S^q (1 − β) Z:
        //   S (k ln n_ops + ln heads) + S k ln S + ln Z + q ln S + ell_mean (1 − β)
        let term = |s: f64| {
            s.powf(-q)
                * (s * (k * n_ops.ln() + ln_heads) + s * k * s.ln() + ln_z + q * s.ln() + ell_mean * (1.0 - beta))
        };
        // x^{1−q} ln x is decreasing past e^{1/(q−1)}
        let knee = (1.0 / (q - 1.0)).exp().ceil() as u64;
        let start = s_max.max(knee);
        let explicit: f64 = (s_max + 1..=start).map(|s| term(s as f64)).sum();
        let a = start as f64;
        let pow_int = |p: f64| a.powf(1.0 - p) / (p - 1.0);
        let log_int = |p: f64| a.powf(1.0 - p) * (a.ln() / (p - 1.0) + 1.0 / (p - 1.0).powi(2));
        let integral = (k * n_ops.ln() + ln_heads) * pow_int(q - 1.0)
            + k * log_int(q - 1.0)
            + (ln_z + ell_mean * (1.0 - beta)) * pow_int(q)
            + q * log_int(q);
        (explicit + integral) / ((1.0 - beta) * ln_z.exp())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub partial: f64,
    pub tail: f64,
    pub total: f64,
    /// `max_{S ≤ s_max} ln N_S / S`.
    pub measured_c: f64,
}
