use bomai_core::{Reward, Timestep};
use serde::{Deserialize, Serialize};

use crate::env::StepRecord;
use crate::spec::FeatureSpec;

/// Values of one feature, read once after every step of a simulated trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureTrace {
    pub name: String,
    pub values: Vec<(Timestep, Reward)>,
}

pub fn feature_traces(features: &[FeatureSpec], records: &[StepRecord]) -> Vec<FeatureTrace> {
    features
        .iter()
        .map(|f| FeatureTrace {
            name: f.name.clone(),
            values: records.iter().map(|r| (r.time, r.feature(f.source))).collect(),
        })
        .collect()
}
