//! Exact comparisons of future-history distributions under a shared policy.

use bomai_core::error::check_cap;
use bomai_core::{Context, History, Percept, PolicyModel, Spaces, Step, WorldModel};

use crate::error::Result;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FutureGap {
    /// `½ Σ |P^π_μ − P^π_ν|` over complete futures.
    pub tv: f64,
    /// `max |P^π_μ − P^π_ν|` over complete futures.
    pub max_gap: f64,
}

/// Compares `P^π_μ` and `P^π_ν` over the next `steps` steps from the given contexts.
#[allow(clippy::too_many_arguments)]
pub fn compare_futures(
    mu: &dyn WorldModel,
    mu_ctx: &Context,
    nu: &dyn WorldModel,
    nu_ctx: &Context,
    pi: &dyn PolicyModel,
    pi_ctx: &Context,
    steps: usize,
    spaces: &Spaces,
    cap: f64,
) -> Result<FutureGap> {
    check_cap(spaces.step_outcomes(), steps, cap)?;
    let mut walk = Walk { mu, nu, pi, gap: FutureGap::default() };
    walk.visit(mu_ctx, nu_ctx, pi_ctx, 1.0, 1.0, steps);
    walk.gap.tv *= 0.5;
    Ok(walk.gap)
}

struct Walk<'a> {
    mu: &'a dyn WorldModel,
    nu: &'a dyn WorldModel,
    pi: &'a dyn PolicyModel,
    gap: FutureGap,
}

impl Walk<'_> {
    fn visit(&mut self, mc: &Context, nc: &Context, pc: &Context, p: f64, q: f64, left: usize) {
        if left == 0 {
            let d = (p - q).abs();
            self.gap.tv += d;
            self.gap.max_gap = self.gap.max_gap.max(d);
            return;
        }
        let acts = self.pi.act_in(pc).into_owned();
        for (a, pa) in acts.items() {
            if *pa <= 0.0 {
                continue;
            }
            let mut outcomes: Vec<(Percept, f64, f64)> =
                self.mu.predict_in(mc, *a).items().iter().map(|(x, px)| (*x, *px, 0.0)).collect();
            for (x, qx) in self.nu.predict_in(nc, *a).items() {
                match outcomes.iter_mut().find(|o| o.0 == *x) {
                    Some(o) => o.2 = *qx,
                    None => outcomes.push((*x, 0.0, *qx)),
                }
            }
            for (x, px, qx) in outcomes {
                let (np, nq) = (p * pa * px, q * pa * qx);
                if np <= 0.0 && nq <= 0.0 {
                    continue;
                }
                let step = Step { action: *a, percept: x };
                let mc2 = if px > 0.0 { self.mu.advance(mc, &step) } else { mc.clone() };
                let nc2 = if qx > 0.0 { self.nu.advance(nc, &step) } else { nc.clone() };
                self.visit(&mc2, &nc2, &self.pi.advance(pc, &step), np, nq, left - 1);
            }
        }
    }
}

/// Truncated accuracy: total variation over the next `k` episodes after `h`.
pub fn tv_accuracy(
    nu: &dyn WorldModel,
    mu: &dyn WorldModel,
    pi: &dyn PolicyModel,
    h: &History,
    k: usize,
    cap: f64,
) -> Result<f64> {
    let steps = k * h.m() - h.len() % h.m();
    let gap = compare_futures(
        mu,
        &mu.context_for(h.steps()),
        nu,
        &nu.context_for(h.steps()),
        pi,
        &pi.context_for(h.steps()),
        steps,
        h.spaces(),
        cap,
    )?;
    Ok(gap.tv)
}
