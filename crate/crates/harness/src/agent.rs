//! The agent loop shared by scripted runs and live sessions.

use std::sync::Arc;

use bomai_core::bayes::{lemma1_closed_form, martingale_step_check};
use bomai_core::explorer::{information_gain, sample_exploration};
use bomai_core::planner::{optimal_policy, star_value_in, value_from};
use bomai_core::{
    Action, DeterministicEpisodePolicy, ExplorationTrace, History, IGReport, PolicyModel, Step, Tracker, WorldModel,
};
use bomai_envs::compare_futures;
use rand::Rng;

use crate::config::Experiment;
use crate::error::{HarnessError, Result};
use crate::record::{EpisodeRow, RunMeta};

/// What the agent decided at an episode boundary, plus the statistics logged
/// for that boundary.
#[derive(Clone, Debug)]
pub struct EpisodeStart {
    pub episode: usize,
    pub explore: bool,
    pub star: Arc<DeterministicEpisodePolicy>,
    pub ig: IGReport,
    row: EpisodeRow,
}

/// Posterior, history and exploration trace of one run.
pub struct Agent {
    exp: Arc<Experiment>,
    pub tracker: Tracker,
    pub history: History,
    pub trace: ExplorationTrace,
}

impl Agent {
    pub fn new(exp: Arc<Experiment>) -> Agent {
        Agent {
            tracker: Tracker::new(&exp.models, &exp.policies),
            history: History::new(exp.spaces.clone()),
            trace: ExplorationTrace::default(),
            exp,
        }
    }

    pub fn experiment(&self) -> &Arc<Experiment> {
        &self.exp
    }

    pub fn episode(&self) -> usize {
        self.history.completed_episodes()
    }

    /// Plans, measures and samples `e_i` at a boundary.
    pub fn begin_episode<R: Rng + ?Sized>(&mut self, explore_rng: &mut R) -> Result<EpisodeStart> {
        let i = self.episode();
        self.boundary_stats(explore_rng).map_err(|e| e.at_episode(i))
    }

    fn boundary_stats<R: Rng + ?Sized>(&mut self, explore_rng: &mut R) -> Result<EpisodeStart> {
        let exp = Arc::clone(&self.exp);
        let exp = &*exp;
        let (models, policies, spaces) = (&exp.models, &exp.policies, &exp.spaces);
        let cap = exp.config.caps.enumeration;
        let i = self.episode();
        let post = &self.tracker.posterior;
        let map = post.map_model();
        let nu_hat = models.get(map).clone();
        let mu = models.get(exp.mu).as_ref();
        let mentor = policies.get(exp.mentor).as_ref();
        let nu_ctx = self.tracker.model_context(map).clone();
        let mu_ctx = self.tracker.model_context(exp.mu).clone();
        let mentor_ctx = self.tracker.policy_context(exp.mentor).clone();

        let (star, v_star_map) = optimal_policy(nu_hat.clone(), nu_ctx.clone(), self.history.len(), spaces, cap)?;
        let star = Arc::new(star);
        let v_mentor_map = value_from(nu_hat.as_ref(), mentor, &nu_ctx, &mentor_ctx, 0, spaces, cap)?;
        let v_star_mu = star_value_in(mu, &star, &mu_ctx, spaces, cap)?;
        let v_mentor_mu = value_from(mu, mentor, &mu_ctx, &mentor_ctx, 0, spaces, cap)?;

        let ig = information_gain(&self.tracker, models, policies, spaces, &exp.exploration)?;
        let w_mu = post.model_weights()[exp.mu];
        let w_pih = post.policy_weights()[exp.mentor];
        let z = 1.0 / post.joint_weight(exp.mu, exp.mentor);

        let z_next = if exp.config.audits.martingale {
            let (lhs, _) =
                martingale_step_check(models, policies, &self.tracker, exp.mu, exp.mentor, ig.p_exp, &star, spaces, cap)?;
            Some(lhs)
        } else {
            None
        };
        let lemma1_rel_err = if exp.config.audits.lemma1 { Some(self.lemma1_error()?) } else { None };

        let (mut tv_mentor, mut tv_star, mut gap_mentor, mut gap_star) = (0.0, 0.0, 0.0, 0.0);
        if exp.config.audits.accuracy && map != exp.mu {
            let m = spaces.m();
            let k = exp.config.caps.tv_horizon;
            let nu = nu_hat.as_ref();
            let one = compare_futures(mu, &mu_ctx, nu, &nu_ctx, mentor, &mentor_ctx, m, spaces, cap)?;
            let many = compare_futures(mu, &mu_ctx, nu, &nu_ctx, mentor, &mentor_ctx, k * m, spaces, cap)?;
            gap_mentor = one.max_gap;
            tv_mentor = many.tv;
            let s_ctx = star.initial_context();
            let one = compare_futures(mu, &mu_ctx, nu, &nu_ctx, star.as_ref(), &s_ctx, m, spaces, cap)?;
            let replan = &exp.replanners[map];
            let r_ctx = replan.context_at(nu_ctx.clone(), Some(star.clone()));
            let many = compare_futures(mu, &mu_ctx, nu, &nu_ctx, replan.as_ref(), &r_ctx, k * m, spaces, cap)?;
            gap_star = one.max_gap;
            tv_star = many.tv;
        }

        let explore = sample_exploration(&ig, explore_rng);
        self.history.push_flag(explore)?;
        let row = EpisodeRow {
            episode: i,
            e: explore,
            p_exp: ig.p_exp,
            ig: ig.ig,
            ig_models: ig.ig_models,
            ig_policies: ig.ig_policies,
            map_index: map,
            map_id: nu_hat.descriptor().to_string(),
            map_space: exp.spaces_of[map],
            benign: exp.counts_as_benign(map),
            v_star_map,
            v_mentor_map,
            v_star_mu,
            v_mentor_mu,
            w_mu,
            w_pih,
            z,
            z_next,
            lemma1_rel_err,
            tv_mentor,
            tv_star,
            gap_mentor,
            gap_star,
            steps: Vec::new(),
            episode_reward: 0.0,
        };
        Ok(EpisodeStart { episode: i, explore, star, ig, row })
    }

    /// Largest relative difference between the tracked joint posterior and the
    /// closed form over the whole history.
    fn lemma1_error(&self) -> Result<f64> {
        let exp = Arc::clone(&self.exp);
        let exp = &*exp;
        let closed = lemma1_closed_form(&exp.models, &exp.policies, self.history.steps(), &self.trace, exp.spaces.m())?;
        let np = exp.policies.len();
        let mut worst: f64 = 0.0;
        for (idx, c) in closed.iter().enumerate() {
            let inc = self.tracker.posterior.joint_weight(idx / np, idx % np);
            let scale = c.abs().max(inc.abs());
            if scale >= f64::MIN_POSITIVE {
                worst = worst.max((c - inc).abs() / scale);
            }
        }
        Ok(worst)
    }

    /// `π^B`'s action when exploiting; `None` when the mentor must act.
    pub fn planned_action(&self, start: &EpisodeStart) -> Option<Action> {
        if start.explore {
            None
        } else {
            Some(start.star.action_for(self.history.current_suffix()))
        }
    }

    /// The context the mentor policy acts from, for scripted mentors.
    pub fn mentor_context(&self) -> &bomai_core::Context {
        self.tracker.policy_context(self.exp.mentor)
    }

    pub fn observe(&mut self, step: Step) -> Result<()> {
        let i = self.episode();
        let exp = Arc::clone(&self.exp);
        let exp = &*exp;
        exp.spaces.check_step(&step).map_err(|e| HarnessError::from(e).at_episode(i))?;
        self.tracker.observe(&exp.models, &exp.policies, &step).map_err(|e| HarnessError::from(e).at_episode(i))?;
        self.history.push_step(step)?;
        Ok(())
    }

    pub fn episode_complete(&self, start: &EpisodeStart) -> bool {
        self.history.len() == (start.episode + 1) * self.exp.spaces.m()
    }

    /// Closes the episode and returns its row.
    pub fn finish_episode(&mut self, start: EpisodeStart) -> Result<EpisodeRow> {
        let i = start.episode;
        self.tracker.close_episode(start.explore).map_err(|e| HarnessError::from(e).at_episode(i))?;
        self.trace.push(start.explore, start.ig.p_exp, start.star.clone());
        let mut row = start.row;
        let block = self.history.episode_block(i);
        row.steps = block.iter().map(|s| self.exp.spaces.format_step(s)).collect();
        row.episode_reward = block.iter().map(|s| s.percept.reward.to_f64()).sum();
        Ok(row)
    }

    pub fn meta(&self, seed: u64) -> RunMeta {
        let exp = Arc::clone(&self.exp);
        let exp = &*exp;
        RunMeta {
            config: exp.config.name.clone(),
            seed,
            beta: exp.config.prior.beta(),
            hack_equal_space: exp.config.models.hack_equal_space,
            models: exp.models.descriptors(),
            policies: exp.policies.descriptors(),
            mu: exp.mu,
            mentor: exp.mentor,
            benign: (0..exp.models.len()).map(|k| exp.counts_as_benign(k)).collect(),
            theorem1_bound: exp.theorem1_bound(),
            prior_tail_mass: exp.prior_tail_mass,
            thresholds: exp.config.thresholds,
        }
    }
}

/// Snapshot for rolling a live session back to an episode boundary.
#[derive(Clone)]
pub struct Checkpoint {
    tracker: Tracker,
    history: History,
}

impl Agent {
    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint { tracker: self.tracker.clone(), history: self.history.clone() }
    }

    pub fn restore(&mut self, c: Checkpoint) {
        self.tracker = c.tracker;
        self.history = c.history;
    }

    pub fn mentor_policy(&self) -> &Arc<dyn PolicyModel> {
        self.exp.policies.get(self.exp.mentor)
    }

    pub fn true_model(&self) -> &Arc<dyn WorldModel> {
        self.exp.models.get(self.exp.mu)
    }
}
