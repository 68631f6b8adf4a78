//! Declarative env configs.

use std::collections::BTreeMap;
use std::path::Path;

use bomai_core::tabular::TabularSpec;
use bomai_core::{Reward, SpaceParams};
use serde::{Deserialize, Serialize};

use crate::error::{EnvError, Result};

pub const SCHEMA_VERSION: u32 = 1;

const DEFAULT_ROOM: &str = include_str!("../fixtures/boxed-room.toml");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSpec {
    pub name: String,
    pub version: u32,
    pub rooms: Vec<String>,
    pub initial_room: String,
    pub episode_start_room: String,
    pub door_room: String,
    pub outside: Vec<String>,
    pub initial_outside: String,
    /// Outside state after an episode in which the door opened, indexed like `outside`.
    pub outside_after_door: Vec<String>,
    /// Outside states in which the register is overwritten while the door is open.
    pub tamper_outside: Vec<String>,
    pub tamper_reward: Reward,
    pub mu_name: String,
    pub mu_space: SpaceParams,
    pub rows: Vec<EnvRow>,
    pub causal: CausalSpec,
    pub features: Vec<FeatureSpec>,
    pub candidates: Vec<CandidateSpec>,
    #[serde(default)]
    pub models: Vec<TabularSpec>,
}

/// In-episode room dynamics for one `(room, action)`.
///
/// A row with `outside` set applies only in that outside state and overrides
/// the general row; such rows must not change anything or validation fails.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvRow {
    pub room: String,
    pub action: String,
    #[serde(default)]
    pub outside: Option<String>,
    pub outcomes: Vec<EnvOutcome>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvOutcome {
    pub obs: String,
    pub reward: Reward,
    pub prob: f64,
    pub next: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CausalSpec {
    pub action_node: String,
    pub outside_nodes: Vec<String>,
    pub edges: Vec<(String, String)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSource {
    /// The reward the operator gives.
    Operator,
    /// The reward the computer has stored.
    Register,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSpec {
    /// Also the feature's node in the causal graph.
    pub name: String,
    pub source: FeatureSource,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateSpec {
    pub model: String,
    /// Declared witness feature; absent when the model tracks no feature.
    #[serde(default)]
    pub feature: Option<String>,
}

impl EnvSpec {
    pub fn from_toml(text: &str) -> Result<EnvSpec> {
        let spec: EnvSpec = toml::from_str(text).map_err(|e| EnvError::Config(e.to_string()))?;
        if spec.version != SCHEMA_VERSION {
            return Err(EnvError::Config(format!(
                "env schema version {} not supported (expected {SCHEMA_VERSION})",
                spec.version
            )));
        }
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<EnvSpec> {
        let text = std::fs::read_to_string(path).map_err(|e| EnvError::Config(format!("{}: {e}", path.display())))?;
        EnvSpec::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("env spec serializes")
    }

    /// The shipped boxed-room fixture.
    pub fn default_room() -> EnvSpec {
        EnvSpec::from_toml(DEFAULT_ROOM).expect("shipped fixture parses")
    }

    pub fn room_index(&self, name: &str) -> Result<u32> {
        index_of(&self.rooms, name, "room")
    }

    pub fn outside_index(&self, name: &str) -> Result<u32> {
        index_of(&self.outside, name, "outside state")
    }

    pub fn candidate(&self, model: &str) -> Option<&CandidateSpec> {
        self.candidates.iter().find(|c| c.model == model)
    }

    pub fn feature(&self, name: &str) -> Option<&FeatureSpec> {
        self.features.iter().find(|f| f.name == name)
    }

    /// Named outcome table of an extra candidate model.
    pub fn model_spec(&self, name: &str) -> Option<&TabularSpec> {
        self.models.iter().find(|m| m.name == name)
    }

    pub fn episode_start_map(&self) -> BTreeMap<String, String> {
        self.rooms.iter().map(|r| (r.clone(), self.episode_start_room.clone())).collect()
    }
}

fn index_of(names: &[String], name: &str, what: &str) -> Result<u32> {
    names
        .iter()
        .position(|n| n == name)
        .map(|k| k as u32)
        .ok_or_else(|| EnvError::Config(format!("unknown {what} {name:?}")))
}
