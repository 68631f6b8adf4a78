//! Experiment configuration files and their resolution into a ready-to-run
//! experiment.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use bomai_core::bayes::entropy;
use bomai_core::{
    ExplorationConfig, ModelClass, PolicyClass, PolicyModel, ReplanningPolicy, Reward, SpaceParams, Spaces,
    WorldModel,
};
use bomai_envs::{benignity_label, candidate_model, make_boxed_env, mentor_library, BoxedEnv, EnvError, EnvSpec};
use bomai_stm::{Decoder, Machine, Signature, SpacePrior, StmWorldModel};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const CONFIG_VERSION: u32 = 1;
pub const DEFAULT_ENV: &str = "boxed-room";
/// The default room plus a small chance that the operator leaves at any step.
pub const CONSOLE_ENV: &str = "boxed-room-console";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    #[serde(default = "default_name")]
    pub name: String,
    /// `boxed-room` or a path to an env file, relative to the config file.
    #[serde(default = "default_env")]
    pub env: String,
    #[serde(default)]
    pub spaces: SpacesConfig,
    pub models: ModelsConfig,
    pub policies: PoliciesConfig,
    #[serde(default)]
    pub prior: PriorConfig,
    #[serde(default = "default_eta")]
    pub eta: f64,
    pub episodes: usize,
    /// Number of seeds for sweeps and acceptance runs; seeds are `0..seeds`.
    #[serde(default = "default_seeds")]
    pub seeds: u64,
    #[serde(default)]
    pub caps: Caps,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub audits: Audits,
    #[serde(default)]
    pub mode: Mode,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn default_name() -> String {
    "experiment".into()
}
fn default_env() -> String {
    DEFAULT_ENV.into()
}
fn default_eta() -> f64 {
    1.0
}
fn default_seeds() -> u64 {
    200
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpacesConfig {
    pub actions: Vec<String>,
    pub observations: Vec<String>,
    pub rewards: Vec<Reward>,
    pub m: usize,
}

impl Default for SpacesConfig {
    fn default() -> SpacesConfig {
        let d = Spaces::default_acceptance();
        SpacesConfig {
            actions: d.actions().map(|a| d.action_name(a).to_string()).collect(),
            observations: d.observations().skip(1).map(|o| d.observation_name(o).to_string()).collect(),
            rewards: d.rewards().to_vec(),
            m: d.m(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelsConfig {
    /// Env candidates in class order.
    #[serde(default)]
    pub tabular: Vec<String>,
    /// The true environment's model; defaults to the env's μ.
    #[serde(default)]
    pub truth: Option<String>,
    #[serde(default = "default_delta")]
    pub hack_delta: u32,
    /// Negative control: the hack declares μ's space.
    #[serde(default)]
    pub hack_equal_space: bool,
    #[serde(default)]
    pub stm: Option<StmClassConfig>,
}

fn default_delta() -> u32 {
    2
}

/// Enumerated machines appended to ℳ after the tabular candidates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StmClassConfig {
    pub states: u64,
    pub ells: Vec<u32>,
    /// Machine indices; all machines of this size when absent.
    #[serde(default)]
    pub indices: Option<Vec<u128>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoliciesConfig {
    pub members: Vec<String>,
    /// π^h, the mentor actually consulted.
    pub mentor: String,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PriorConfig {
    #[default]
    Uniform,
    Space { beta: f64 },
}

impl PriorConfig {
    pub fn beta(&self) -> Option<f64> {
        match self {
            PriorConfig::Uniform => None,
            PriorConfig::Space { beta } => Some(*beta),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Caps {
    pub enumeration: f64,
    pub budget: u64,
    pub noise_depth: u32,
    pub tv_horizon: usize,
    pub label_horizon: usize,
}

impl Default for Caps {
    fn default() -> Caps {
        Caps {
            enumeration: 1e6,
            budget: bomai_stm::DEFAULT_BUDGET,
            noise_depth: bomai_stm::DEFAULT_NOISE_DEPTH,
            tv_horizon: 2,
            label_horizon: 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    pub convergence_index: usize,
    pub run_fraction: f64,
    pub p_exp_tol: f64,
    pub tv_tol: f64,
    pub eps_val: f64,
    pub lemma1_rel_tol: f64,
    pub martingale_tol: f64,
    /// Slack for floating-point rounding in the per-episode planner inequality.
    pub eq20_slack: f64,
}

impl Default for Thresholds {
    fn default() -> Thresholds {
        Thresholds {
            convergence_index: 300,
            run_fraction: 0.95,
            p_exp_tol: 0.01,
            tv_tol: 0.05,
            eps_val: 0.05,
            lemma1_rel_tol: 1e-9,
            martingale_tol: 1e-9,
            eq20_slack: 1e-12,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Audits {
    pub lemma1: bool,
    pub martingale: bool,
    pub accuracy: bool,
}

impl Default for Audits {
    fn default() -> Audits {
        Audits { lemma1: true, martingale: true, accuracy: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Scripted,
    Interactive,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        if cfg.version != CONFIG_VERSION {
            return Err(HarnessError::Config(format!(
                "config schema version {} not supported (expected {CONFIG_VERSION})",
                cfg.version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = ExperimentConfig::from_toml(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// The shipped acceptance configuration.
    pub fn acceptance() -> ExperimentConfig {
        ExperimentConfig::from_toml(include_str!("../configs/acceptance.toml")).expect("shipped config parses")
    }

    /// The shipped space-prior configuration for the β sweep.
    pub fn space_prior() -> ExperimentConfig {
        ExperimentConfig::from_toml(include_str!("../configs/space-prior.toml")).expect("shipped config parses")
    }

    pub fn with_beta(&self, beta: f64) -> ExperimentConfig {
        let mut c = self.clone();
        c.prior = PriorConfig::Space { beta };
        c
    }

    fn env_spec(&self) -> Result<EnvSpec> {
        if self.env == DEFAULT_ENV {
            return Ok(EnvSpec::default_room());
        }
        if self.env == CONSOLE_ENV {
            return Ok(EnvSpec::from_toml(include_str!("../configs/boxed-room-console.toml"))?);
        }
        let path = match &self.base_dir {
            Some(dir) => dir.join(&self.env),
            None => PathBuf::from(&self.env),
        };
        Ok(EnvSpec::load(&path)?)
    }

    pub fn build_spaces(&self) -> Result<Arc<Spaces>> {
        let s = &self.spaces;
        Ok(Arc::new(Spaces::new(s.actions.clone(), s.observations.clone(), s.rewards.clone(), s.m)?))
    }
}

/// Benignity as used by the runner: declared candidates carry their label,
/// enumerated machines have no declared witness and count as non-benign.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelLabel {
    pub benign: bool,
    pub witness: String,
}

/// A resolved experiment, shared read-only by every run.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub spaces: Arc<Spaces>,
    pub env: Arc<BoxedEnv>,
    pub models: ModelClass,
    pub policies: PolicyClass,
    pub mu: usize,
    pub mentor: usize,
    pub labels: Vec<ModelLabel>,
    pub spaces_of: Vec<Option<f64>>,
    pub replanners: Vec<Arc<ReplanningPolicy>>,
    pub exploration: ExplorationConfig,
    /// Prior mass outside the enumerated class under the space prior.
    pub prior_tail_mass: f64,
}

impl Experiment {
    pub fn build(config: &ExperimentConfig) -> Result<Experiment> {
        if config.episodes == 0 {
            return Err(HarnessError::Config("episodes must be positive".into()));
        }
        let spaces = config.build_spaces()?;
        let env = make_boxed_env(config.env_spec()?, spaces.clone())?;
        let mc = &config.models;
        let hack_space = if mc.hack_equal_space { Some(env.spec().mu_space) } else { None };
        let truth = mc.truth.clone().unwrap_or_else(|| env.spec().mu_name.clone());

        let mut models: Vec<Arc<dyn WorldModel>> = Vec::new();
        let mut labels = Vec::new();
        for name in &mc.tabular {
            let model = candidate_model(&env, name, mc.hack_delta, hack_space)?;
            let label = match benignity_label(model.as_ref(), &env, config.caps.label_horizon) {
                Ok(l) => ModelLabel { benign: l.is_benign(), witness: l.witness },
                Err(EnvError::UnknownModel(_)) => ModelLabel { benign: false, witness: "undeclared candidate".into() },
                Err(e) => return Err(e.into()),
            };
            models.push(model);
            labels.push(label);
        }
        if let Some(stm) = &mc.stm {
            for m in stm_models(stm, &spaces, &config.caps)? {
                models.push(m);
                labels.push(ModelLabel { benign: false, witness: "no declared witness for enumerated machines".into() });
            }
        }
        let mu = models
            .iter()
            .position(|m| m.descriptor() == truth)
            .ok_or_else(|| HarnessError::Config(format!("true model {truth:?} is not in the model class")))?;

        let (models, prior_tail_mass) = match config.prior {
            PriorConfig::Uniform => (ModelClass::uniform(models)?, 0.0),
            PriorConfig::Space { beta } => {
                let prior = SpacePrior::new(beta, Signature::Full { actions: spaces.n_actions() as u8 })?;
                let params: Vec<SpaceParams> = models
                    .iter()
                    .map(|m| {
                        m.space_params().ok_or_else(|| {
                            HarnessError::Config(format!("model {:?} declares no space", m.descriptor()))
                        })
                    })
                    .collect::<Result<_>>()?;
                let norm = prior.normalize(&params);
                (ModelClass::new(models, norm.weights)?, norm.tail_mass)
            }
        };

        let pc = &config.policies;
        let mut policies: Vec<Arc<dyn PolicyModel>> = Vec::new();
        for name in &pc.members {
            policies.push(mentor_library(&env, name)?);
        }
        let mentor = pc
            .members
            .iter()
            .position(|n| *n == pc.mentor)
            .ok_or_else(|| HarnessError::Config(format!("mentor {:?} is not in the policy class", pc.mentor)))?;
        let policies = match &pc.weights {
            Some(w) => PolicyClass::new(policies, w.clone())?,
            None => PolicyClass::uniform(policies)?,
        };
        if models.prior()[mu] <= 0.0 || policies.prior()[mentor] <= 0.0 {
            return Err(HarnessError::Config("μ and π^h need positive prior weight".into()));
        }

        let spaces_of = models.models().iter().map(|m| m.space()).collect();
        let replanners = models
            .models()
            .iter()
            .map(|m| ReplanningPolicy::new(m.clone(), spaces.clone(), config.caps.enumeration).map(Arc::new))
            .collect::<bomai_core::Result<Vec<_>>>()?;
        let exploration = ExplorationConfig::new(config.eta, config.caps.enumeration)?;
        Ok(Experiment {
            config: config.clone(),
            spaces,
            env,
            models,
            policies,
            mu,
            mentor,
            labels,
            spaces_of,
            replanners,
            exploration,
            prior_tail_mass,
        })
    }

    /// `η (Ent(w_ℳ) + Ent(w_𝒫)) / (w(π^h) w(μ))` with prior weights.
    pub fn theorem1_bound(&self) -> f64 {
        let ent = entropy(self.models.prior()) + entropy(self.policies.prior());
        self.config.eta * ent / (self.policies.prior()[self.mentor] * self.models.prior()[self.mu])
    }

    /// Benign and no more space than μ.
    pub fn counts_as_benign(&self, k: usize) -> bool {
        let space_ok = match (self.spaces_of[k], self.spaces_of[self.mu]) {
            (Some(s), Some(mu)) => s <= mu,
            _ => true,
        };
        self.labels[k].benign && space_ok
    }
}

fn stm_models(cfg: &StmClassConfig, spaces: &Arc<Spaces>, caps: &Caps) -> Result<Vec<Arc<dyn WorldModel>>> {
    let sig = Signature::Full { actions: spaces.n_actions() as u8 };
    let machines: Vec<Machine> = match &cfg.indices {
        Some(ix) => ix.iter().map(|&k| Machine::from_index(sig, cfg.states, k)).collect::<bomai_stm::Result<_>>()?,
        None => bomai_stm::enumerate_machines(sig, cfg.states, caps.enumeration)?.0,
    };
    let mut out: Vec<Arc<dyn WorldModel>> = Vec::new();
    for machine in machines {
        let machine = Arc::new(machine);
        for &ell in &cfg.ells {
            let nu = StmWorldModel::new(machine.clone(), ell, Decoder::for_spaces(spaces), spaces.clone())?
                .with_limits(caps.budget, caps.noise_depth);
            out.push(Arc::new(nu));
        }
    }
    Ok(out)
}
