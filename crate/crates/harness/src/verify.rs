//! Verifiers that read run records and decide each theorem-level check.

use serde::{Deserialize, Serialize};

use crate::record::{EpisodeRow, RunRecord};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub name: String,
    pub pass: bool,
    /// The measured quantity that is compared against `bound`.
    pub statistic: f64,
    pub bound: f64,
    pub runs: usize,
    pub details: String,
}

impl TheoremReport {
    pub fn line(&self) -> String {
        format!(
            "{} {}: statistic {:.6e} vs bound {:.6e} over {} runs; {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.statistic,
            self.bound,
            self.runs,
            self.details
        )
    }
}

fn no_runs(name: &str) -> TheoremReport {
    TheoremReport { name: name.into(), pass: false, statistic: f64::NAN, bound: f64::NAN, runs: 0, details: "no runs".into() }
}

/// Share of runs in which `ok` holds on every row from `from` on. A run too
/// short to reach `from` does not count as satisfying it.
pub fn fraction_from<F: Fn(&EpisodeRow) -> bool>(runs: &[RunRecord], from: usize, ok: F) -> f64 {
    if runs.is_empty() {
        return 0.0;
    }
    let good = runs.iter().filter(|r| r.rows.len() > from && r.rows[from..].iter().all(&ok)).count();
    good as f64 / runs.len() as f64
}

/// Incremental joint posterior against the closed form.
pub fn verify_lemma1(runs: &[RunRecord]) -> TheoremReport {
    let name = "oracle equivalence";
    let Some(first) = runs.first() else { return no_runs(name) };
    let tol = first.meta.thresholds.lemma1_rel_tol;
    let mut worst: f64 = 0.0;
    let mut missing = 0usize;
    for row in runs.iter().flat_map(|r| &r.rows) {
        match row.lemma1_rel_err {
            Some(e) if e.is_finite() => worst = worst.max(e),
            _ => missing += 1,
        }
    }
    let checked = runs.iter().map(|r| r.rows.len()).sum::<usize>() - missing;
    TheoremReport {
        name: name.into(),
        pass: missing == 0 && worst <= tol,
        statistic: worst,
        bound: tol,
        runs: runs.len(),
        details: format!("max relative error over {checked} boundaries, {missing} unchecked"),
    }
}

/// `E[z_{i+1} | ·] ≤ z_i + tol` at every boundary.
pub fn verify_martingale(runs: &[RunRecord]) -> TheoremReport {
    let name = "supermartingale";
    let Some(first) = runs.first() else { return no_runs(name) };
    let tol = first.meta.thresholds.martingale_tol;
    let mut worst = f64::NEG_INFINITY;
    let mut missing = 0usize;
    for row in runs.iter().flat_map(|r| &r.rows) {
        match row.z_next {
            Some(zn) if zn.is_finite() => worst = worst.max(zn - row.z),
            _ => missing += 1,
        }
    }
    TheoremReport {
        name: name.into(),
        pass: missing == 0 && worst <= tol,
        statistic: worst,
        bound: tol,
        runs: runs.len(),
        details: format!("max of E[z_next] - z, {missing} unchecked"),
    }
}

/// Mean `Σ p_exp²` against the bound, plus late exploration dying out.
pub fn verify_theorem1(runs: &[RunRecord]) -> TheoremReport {
    let name = "exploration bound";
    let Some(first) = runs.first() else { return no_runs(name) };
    let t = first.meta.thresholds;
    let bound = first.meta.theorem1_bound;
    let mean = runs.iter().map(RunRecord::sum_p_exp_sq).sum::<f64>() / runs.len() as f64;
    let frac = fraction_from(runs, t.convergence_index, |r| r.p_exp < t.p_exp_tol);
    TheoremReport {
        name: name.into(),
        pass: mean <= bound && frac >= t.run_fraction,
        statistic: mean,
        bound,
        runs: runs.len(),
        details: format!(
            "mean sum of p_exp^2; {:.3} of runs keep p_exp < {} from episode {} (need {})",
            frac, t.p_exp_tol, t.convergence_index, t.run_fraction
        ),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnderPolicy {
    Mentor,
    Star,
}

/// Per-episode max-block prediction gap of the MAP model.
pub fn verify_prediction(runs: &[RunRecord], under: UnderPolicy) -> TheoremReport {
    let name = match under {
        UnderPolicy::Mentor => "prediction under mentor",
        UnderPolicy::Star => "prediction under planner",
    };
    let Some(first) = runs.first() else { return no_runs(name) };
    let t = first.meta.thresholds;
    let gap = |r: &EpisodeRow| match under {
        UnderPolicy::Mentor => r.gap_mentor,
        UnderPolicy::Star => r.gap_star,
    };
    let frac = fraction_from(runs, t.convergence_index, |r| gap(r) <= t.tv_tol);
    TheoremReport {
        name: name.into(),
        pass: frac >= t.run_fraction,
        statistic: frac,
        bound: t.run_fraction,
        runs: runs.len(),
        details: format!("fraction of runs with gap <= {} from episode {}", t.tv_tol, t.convergence_index),
    }
}

/// Value of the planner in μ against the mentor's, and the planner beating
/// the mentor in the MAP model at every boundary.
pub fn verify_value(runs: &[RunRecord]) -> TheoremReport {
    let name = "value";
    let Some(first) = runs.first() else { return no_runs(name) };
    let t = first.meta.thresholds;
    let frac = fraction_from(runs, t.convergence_index, |r| r.v_star_mu - r.v_mentor_mu >= -t.eps_val);
    let rows: Vec<&EpisodeRow> = runs.iter().flat_map(|r| &r.rows).collect();
    let failures = rows.iter().filter(|r| !r.eq20_holds(t.eq20_slack)).count();
    TheoremReport {
        name: name.into(),
        pass: frac >= t.run_fraction && failures == 0,
        statistic: frac,
        bound: t.run_fraction,
        runs: runs.len(),
        details: format!(
            "fraction of runs with V*_mu - Vh_mu >= -{} from episode {}; planner below mentor in MAP model on {}/{} boundaries",
            t.eps_val,
            t.convergence_index,
            failures,
            rows.len()
        ),
    }
}

/// Share of runs whose MAP model counts as benign from the convergence index on.
pub fn benign_fraction(runs: &[RunRecord]) -> f64 {
    let Some(first) = runs.first() else { return 0.0 };
    fraction_from(runs, first.meta.thresholds.convergence_index, |r| r.benign)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub beta: f64,
    pub fraction: f64,
    pub runs: usize,
}

/// Fractions must not decrease as β decreases and the smallest β must reach
/// the run fraction. Points may come in any order.
pub fn sweep_shows_trend(points: &[SweepPoint], run_fraction: f64) -> bool {
    let mut p = points.to_vec();
    p.sort_by(|a, b| b.beta.total_cmp(&a.beta));
    match p.last() {
        Some(last) => p.windows(2).all(|w| w[1].fraction >= w[0].fraction) && last.fraction >= run_fraction,
        None => false,
    }
}

pub fn verify_sweep(main: &[SweepPoint], control: &[SweepPoint], run_fraction: f64) -> TheoremReport {
    let main_ok = sweep_shows_trend(main, run_fraction);
    let control_ok = sweep_shows_trend(control, run_fraction);
    let show = |ps: &[SweepPoint]| ps.iter().map(|p| format!("β={}: {:.3}", p.beta, p.fraction)).collect::<Vec<_>>().join(", ");
    let smallest = main.iter().min_by(|a, b| a.beta.total_cmp(&b.beta));
    TheoremReport {
        name: "benignity sweep".into(),
        pass: main_ok && !control_ok,
        statistic: smallest.map_or(f64::NAN, |p| p.fraction),
        bound: run_fraction,
        runs: main.iter().chain(control).map(|p| p.runs).sum(),
        details: format!(
            "space prior [{}] trend {}; equal-space control [{}] trend {}",
            show(main),
            main_ok,
            show(control),
            control_ok
        ),
    }
}

/// Groups saved sweep records by β into space-prior and equal-space points.
/// Records without a β are skipped.
pub fn sweep_points(runs: &[RunRecord]) -> (Vec<SweepPoint>, Vec<SweepPoint>) {
    let mut groups: Vec<(f64, bool, Vec<RunRecord>)> = Vec::new();
    for r in runs {
        let Some(beta) = r.meta.beta else { continue };
        let key = (beta, r.meta.hack_equal_space);
        match groups.iter_mut().find(|g| (g.0, g.1) == key) {
            Some(g) => g.2.push(r.clone()),
            None => groups.push((beta, key.1, vec![r.clone()])),
        }
    }
    let (mut main, mut control) = (Vec::new(), Vec::new());
    for (beta, equal, rs) in groups {
        let p = SweepPoint { beta, fraction: benign_fraction(&rs), runs: rs.len() };
        if equal { control.push(p) } else { main.push(p) }
    }
    (main, control)
}
