use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{evaluate_cost, Variant};
use crate::instance::{Instance, InstanceError};
use crate::tree::NodeId;

pub const SOLUTION_SCHEMA: &str = "mhres-solution/1";

/// Decision values of one strategic node. Operational arrays are indexed
/// `[tech][scenario][period]`; entries of periods without a variable are 0.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NodeValues {
    pub x: Vec<f64>,
    pub x_tilde: Vec<f64>,
    pub alpha: Vec<f64>,
    pub xp: Vec<f64>,
    pub xp_tilde: Vec<f64>,
    pub beta: Vec<f64>,
    #[serde(rename = "zR")]
    pub z_r: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "zG")]
    pub z_g: Vec<Vec<f64>>,
    pub y: Vec<Vec<Vec<f64>>>,
    pub y_plus: Vec<Vec<Vec<f64>>>,
    pub y_minus: Vec<Vec<Vec<f64>>>,
    pub dl1: Vec<Vec<Vec<f64>>>,
    pub delta: Vec<Vec<Vec<f64>>>,
    /// `[profile][scenario]` excess over the threshold.
    pub s: Vec<Vec<f64>>,
    /// `[profile][scenario]` excess indicators.
    pub eta: Vec<Vec<f64>>,
}

impl NodeValues {
    /// Copy keeping only the investment variables; everything else is zeroed.
    pub fn strategic_only(&self) -> Self {
        Self {
            x: self.x.clone(),
            x_tilde: self.x_tilde.clone(),
            alpha: self.alpha.clone(),
            xp: self.xp.clone(),
            xp_tilde: self.xp_tilde.clone(),
            beta: self.beta.clone(),
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub pv_investment: f64,
    pub bess_investment: f64,
    pub operational: f64,
    pub residual_value: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub schema: String,
    pub instance: String,
    pub variant: Variant,
    /// Objective as recomputed from the decision values.
    pub objective: f64,
    /// Objective reported by the solver, if a single model produced this.
    pub solver_objective: Option<f64>,
    pub cost: CostBreakdown,
    pub nodes: Vec<NodeValues>,
}

impl Solution {
    pub fn new(instance: &Instance, variant: Variant, nodes: Vec<NodeValues>, solver_objective: Option<f64>) -> Self {
        let mut sol = Self {
            schema: SOLUTION_SCHEMA.into(),
            instance: instance.meta.name.clone(),
            variant,
            objective: 0.0,
            solver_objective,
            cost: CostBreakdown::default(),
            nodes,
        };
        sol.refresh_cost(instance);
        sol
    }

    /// Solution assembled from per-node pieces, e.g. by a heuristic.
    pub fn assembled(instance: &Instance, variant: Variant, nodes: Vec<NodeValues>) -> Self {
        Self::new(instance, variant, nodes, None)
    }

    pub fn refresh_cost(&mut self, instance: &Instance) {
        self.cost = evaluate_cost(instance, self);
        self.objective = self.cost.total;
    }

    pub fn node(&self, n: NodeId) -> &NodeValues {
        &self.nodes[n]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solutions serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        let sol: Self = serde_json::from_str(text).map_err(|e| InstanceError::Parse(e.to_string()))?;
        if sol.schema != SOLUTION_SCHEMA {
            return Err(InstanceError::Parse(format!(
                "expected solution schema {SOLUTION_SCHEMA:?}, found {:?}",
                sol.schema
            )));
        }
        Ok(sol)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, InstanceError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| InstanceError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), InstanceError> {
        let path = path.as_ref();
        crate::io::write_atomic(path, self.to_json().as_bytes()).map_err(|source| InstanceError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}
