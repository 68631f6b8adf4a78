//! Declared causal graph of the toy world and benignity labels.

use std::collections::{BTreeMap, HashMap};

use bomai_core::{Action, Context, Percept, Step, WorldModel};
use petgraph::algo::{astar, is_cyclic_directed};
use petgraph::graph::{DiGraph, NodeIndex};
use serde::{Deserialize, Serialize};

use crate::env::{BoxedEnv, BoxedWorldState};
use crate::error::{EnvError, Result};
use crate::spec::{CausalSpec, FeatureSource};

#[derive(Clone, Debug)]
pub struct CausalGraph {
    graph: DiGraph<String, ()>,
    nodes: HashMap<String, NodeIndex>,
    action: NodeIndex,
    outside: Vec<NodeIndex>,
}

impl CausalGraph {
    pub fn new(spec: &CausalSpec) -> Result<CausalGraph> {
        let mut graph = DiGraph::new();
        let mut nodes = HashMap::new();
        let mut node = |g: &mut DiGraph<String, ()>, name: &str| {
            *nodes.entry(name.to_string()).or_insert_with(|| g.add_node(name.to_string()))
        };
        let action = node(&mut graph, &spec.action_node);
        let outside: Vec<_> = spec.outside_nodes.iter().map(|n| node(&mut graph, n)).collect();
        for (from, to) in &spec.edges {
            let (a, b) = (node(&mut graph, from), node(&mut graph, to));
            graph.add_edge(a, b, ());
        }
        if is_cyclic_directed(&graph) {
            return Err(EnvError::Config("causal graph has a cycle".into()));
        }
        Ok(CausalGraph { graph, nodes, action, outside })
    }

    pub fn has_node(&self, name: &str) -> bool {
        self.nodes.contains_key(name)
    }

    fn path(&self, from: NodeIndex, to: NodeIndex) -> Option<Vec<NodeIndex>> {
        astar(&self.graph, from, |n| n == to, |_| 1, |_| 0).map(|(_, p)| p)
    }

    /// A path action → … → outside node → … → `feature`, if one exists.
    pub fn violating_path(&self, feature: &str) -> Option<Vec<String>> {
        let target = *self.nodes.get(feature)?;
        for &x in &self.outside {
            if let (Some(up), Some(down)) = (self.path(self.action, x), self.path(x, target)) {
                let names = up.iter().chain(&down[1..]).map(|n| self.graph[*n].clone()).collect();
                return Some(names);
            }
        }
        None
    }

    pub fn edges(&self) -> Vec<(String, String)> {
        self.graph
            .edge_indices()
            .filter_map(|e| self.graph.edge_endpoints(e))
            .map(|(a, b)| (self.graph[a].clone(), self.graph[b].clone()))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Benignity {
    Benign,
    NonBenign,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenignityLabel {
    pub label: Benignity,
    /// The modeled feature when benign, the violating path otherwise.
    pub witness: String,
}

impl BenignityLabel {
    pub fn is_benign(&self) -> bool {
        self.label == Benignity::Benign
    }
}

pub const MATCH_TOLERANCE: f64 = 1e-12;

/// Labels a declared candidate: checks that its reward output tracks the
/// declared feature on every action sequence of `horizon_episodes` episodes,
/// then reads the label off the causal graph.
pub fn benignity_label(model: &dyn WorldModel, env: &BoxedEnv, horizon_episodes: usize) -> Result<BenignityLabel> {
    let name = model.descriptor();
    let candidate = env.spec().candidate(name).ok_or_else(|| EnvError::UnknownModel(name.to_string()))?;
    let Some(feature) = &candidate.feature else {
        return Ok(BenignityLabel { label: Benignity::NonBenign, witness: "no properly-timed feature modeled".into() });
    };
    let source = env.spec().feature(feature).expect("validated feature").source;
    let horizon = horizon_episodes * env.spaces().m();
    let model_start = vec![(model.initial_context(), 1.0)];
    let env_start = vec![(env.initial_state(), 1.0)];
    let mut actions = Vec::with_capacity(horizon);
    if let Some(msg) = def3_mismatch(model, env, source, &model_start, &env_start, &mut actions, horizon) {
        return Err(EnvError::Labeling(format!("{name} does not model {feature}: {msg}")));
    }
    Ok(match env.causal_graph().violating_path(feature) {
        Some(path) => BenignityLabel { label: Benignity::NonBenign, witness: path.join(" → ") },
        None => BenignityLabel { label: Benignity::Benign, witness: feature.clone() },
    })
}

/// Depth-first over action sequences and observed paths: the probability of
/// every `(observation, reward)` path under the model must equal that of the
/// same `(observation, feature)` path in the env.
fn def3_mismatch(
    model: &dyn WorldModel,
    env: &BoxedEnv,
    source: FeatureSource,
    model_dist: &[(Context, f64)],
    env_dist: &[(BoxedWorldState, f64)],
    actions: &mut Vec<Action>,
    remaining: usize,
) -> Option<String> {
    if remaining == 0 {
        return None;
    }
    let spaces = env.spaces();
    for a in spaces.actions() {
        actions.push(a);
        let mut branches: BTreeMap<Percept, Branch> = BTreeMap::new();
        for (ctx, w) in model_dist {
            for (p, q) in model.predict_in(ctx, a).items() {
                let b = branches.entry(*p).or_default();
                b.model_mass += w * q;
                b.model.push((model.advance(ctx, &Step { action: a, percept: *p }), w * q));
            }
        }
        for (s, w) in env_dist {
            for (step, q, next) in env.transitions(s, a) {
                let value = match source {
                    FeatureSource::Operator => step.reward(),
                    FeatureSource::Register => next.register,
                };
                let b = branches.entry(Percept::new(step.percept.obs, value)).or_default();
                b.env_mass += w * q;
                b.env.push((next, w * q));
            }
        }
        for (p, b) in &branches {
            if (b.model_mass - b.env_mass).abs() > MATCH_TOLERANCE {
                let seq: Vec<&str> = actions.iter().map(|a| spaces.action_name(*a)).collect();
                return Some(format!(
                    "after actions [{}] the path ending in ({}, {}) has probability {} vs {}",
                    seq.join(", "),
                    spaces.observation_name(p.obs),
                    p.reward,
                    b.model_mass,
                    b.env_mass
                ));
            }
            if b.model_mass > 0.0 {
                if let Some(m) = def3_mismatch(model, env, source, &b.model, &b.env, actions, remaining - 1) {
                    return Some(m);
                }
            }
        }
        actions.pop();
    }
    None
}

#[derive(Default)]
struct Branch {
    model: Vec<(Context, f64)>,
    env: Vec<(BoxedWorldState, f64)>,
    model_mass: f64,
    env_mass: f64,
}
