//! Tactical multi-horizon scenario trees.
//!
//! Strategic nodes carry investment decisions and form a multistage tree.
//! Every strategic node owns a one-day operational fan (scenarios × daily
//! periods) that is shared by all nodes of the same stage. The last-period
//! operational nodes of a node feed the expected battery level into its
//! children through the tactical links.

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type NodeId = usize;

/// Tolerance used when validating raw (un-normalized) probabilities.
pub const RAW_WEIGHT_TOL: f64 = 1e-6;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TreeError {
    #[error("unknown strategic node {0}")]
    UnknownNode(NodeId),
    #[error("malformed tree: {0}")]
    Malformed(String),
    #[error("stage index {0} out of range 1..={1}")]
    StageOutOfRange(usize, usize),
    #[error("group count {0} out of range 1..={1}")]
    GroupCountOutOfRange(usize, usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Period {
    pub hours: u32,
    #[serde(default)]
    pub pv: bool,
}

/// Operational node of a stage: one daily period of one operational scenario.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OpNode {
    pub scenario: usize,
    pub period: usize,
}

/// Two-stage multi-period fan: one branching at the start of the day.
#[derive(Clone, Debug, PartialEq)]
pub struct OperationalSubtree {
    probabilities: Vec<f64>,
    num_periods: usize,
    nodes: Vec<OpNode>,
    lookup: Vec<Vec<Option<usize>>>,
}

impl OperationalSubtree {
    /// Canonical fan: node `q = π·T + t`.
    pub fn fan(probabilities: Vec<f64>, num_periods: usize) -> Self {
        let nodes = (0..probabilities.len())
            .flat_map(|s| (0..num_periods).map(move |t| OpNode { scenario: s, period: t }))
            .collect();
        Self::from_nodes(probabilities, num_periods, nodes)
    }

    /// Subtree from an explicit node list. Coverage is not enforced here;
    /// `MultiHorizonTree::validate` reports gaps and duplicates.
    pub fn from_nodes(probabilities: Vec<f64>, num_periods: usize, nodes: Vec<OpNode>) -> Self {
        let mut lookup = vec![vec![None; num_periods]; probabilities.len()];
        for (q, node) in nodes.iter().enumerate() {
            if let Some(slot) = lookup
                .get_mut(node.scenario)
                .and_then(|row| row.get_mut(node.period))
            {
                if slot.is_none() {
                    *slot = Some(q);
                }
            }
        }
        Self {
            probabilities,
            num_periods,
            nodes,
            lookup,
        }
    }

    pub fn num_scenarios(&self) -> usize {
        self.probabilities.len()
    }

    pub fn num_periods(&self) -> usize {
        self.num_periods
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn probability(&self, scenario: usize) -> f64 {
        self.probabilities[scenario]
    }

    pub fn nodes(&self) -> &[OpNode] {
        &self.nodes
    }

    pub fn node(&self, scenario: usize, period: usize) -> Option<usize> {
        self.lookup.get(scenario)?.get(period).copied().flatten()
    }

    /// Node weight `w_q`, the probability of its scenario.
    pub fn weight(&self, q: usize) -> f64 {
        self.probabilities[self.nodes[q].scenario]
    }

    /// Same-scenario node at the previous daily period.
    pub fn ancestor(&self, q: usize) -> Option<usize> {
        let node = self.nodes[q];
        if node.period == 0 {
            None
        } else {
            self.node(node.scenario, node.period - 1)
        }
    }

    /// Nodes of one scenario in period order.
    pub fn scenario_nodes(&self, scenario: usize) -> Vec<usize> {
        let mut qs: Vec<usize> = (0..self.nodes.len())
            .filter(|&q| self.nodes[q].scenario == scenario)
            .collect();
        qs.sort_by_key(|&q| self.nodes[q].period);
        qs
    }

    fn with_probabilities(&self, probabilities: Vec<f64>) -> Self {
        Self {
            probabilities,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stage {
    /// 1-based stage index.
    pub index: usize,
    pub days: u32,
    pub periods: Vec<Period>,
    pub ops: OperationalSubtree,
}

impl Stage {
    pub fn num_periods(&self) -> usize {
        self.periods.len()
    }

    pub fn first_period(&self) -> usize {
        0
    }

    pub fn last_period(&self) -> usize {
        self.periods.len().saturating_sub(1)
    }

    pub fn hours(&self, t: usize) -> f64 {
        self.periods[t].hours as f64
    }

    pub fn is_pv(&self, t: usize) -> bool {
        self.periods[t].pv
    }

    pub fn pv_periods(&self) -> Vec<usize> {
        (0..self.periods.len()).filter(|&t| self.periods[t].pv).collect()
    }

    pub fn num_scenarios(&self) -> usize {
        self.ops.num_scenarios()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StrategicNode {
    pub id: NodeId,
    pub stage: usize,
    pub parent: Option<NodeId>,
    pub weight: f64,
    pub children: Vec<NodeId>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StrategicScenario {
    pub id: usize,
    pub path: Vec<NodeId>,
    pub weight: f64,
}

/// One invariant violation found by [`MultiHorizonTree::validate`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub rule: String,
    pub location: String,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}: {}", self.rule, self.location, self.detail)
    }
}

/// Scenario subset with rescaled weights: an SMG group, an SMC cluster or a
/// single wait-and-see scenario.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioBundle {
    pub id: usize,
    /// Stage-(e*+1) node rooting an SMC cluster.
    pub anchor: Option<NodeId>,
    pub scenarios: Vec<usize>,
    pub weight: f64,
    /// Rescaled scenario weights, aligned with `scenarios`.
    pub scenario_weights: Vec<f64>,
    /// Union of the scenario paths, sorted by id.
    pub nodes: Vec<NodeId>,
    /// Rescaled node weights, aligned with `nodes`.
    pub node_weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageFile {
    pub days: u32,
    pub periods: Vec<Period>,
    pub operational_scenarios: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeFile {
    pub id: NodeId,
    pub stage: usize,
    pub parent: Option<NodeId>,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeFile {
    pub stages: Vec<StageFile>,
    pub strategic_nodes: Vec<NodeFile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TreeFile", into = "TreeFile")]
pub struct MultiHorizonTree {
    stages: Vec<Stage>,
    nodes: Vec<StrategicNode>,
    scenarios: Vec<StrategicScenario>,
    stage_nodes: Vec<Vec<NodeId>>,
    scenarios_through: Vec<Vec<usize>>,
}

impl TryFrom<TreeFile> for MultiHorizonTree {
    type Error = TreeError;

    fn try_from(file: TreeFile) -> Result<Self, TreeError> {
        let stages = file
            .stages
            .into_iter()
            .enumerate()
            .map(|(k, s)| {
                let ops = OperationalSubtree::fan(s.operational_scenarios, s.periods.len());
                Stage {
                    index: k + 1,
                    days: s.days,
                    periods: s.periods,
                    ops,
                }
            })
            .collect();
        let specs = file
            .strategic_nodes
            .into_iter()
            .map(|n| (n.id, n.stage, n.parent, n.weight))
            .collect();
        MultiHorizonTree::new(stages, specs)
    }
}

impl From<MultiHorizonTree> for TreeFile {
    fn from(tree: MultiHorizonTree) -> Self {
        TreeFile {
            stages: tree
                .stages
                .iter()
                .map(|s| StageFile {
                    days: s.days,
                    periods: s.periods.clone(),
                    operational_scenarios: s.ops.probabilities().to_vec(),
                })
                .collect(),
            strategic_nodes: tree
                .nodes
                .iter()
                .map(|n| NodeFile {
                    id: n.id,
                    stage: n.stage,
                    parent: n.parent,
                    weight: n.weight,
                })
                .collect(),
        }
    }
}

impl MultiHorizonTree {
    /// Builds a tree from `(id, stage, parent, weight)` node specs.
    ///
    /// Structural requirements (dense ids in breadth-first order, parent
    /// before child, stage = parent stage + 1) are errors. Probability and
    /// coverage problems are left for [`validate`](Self::validate).
    pub fn new(
        stages: Vec<Stage>,
        specs: Vec<(NodeId, usize, Option<NodeId>, f64)>,
    ) -> Result<Self, TreeError> {
        let e_max = stages.len();
        if e_max == 0 {
            return Err(TreeError::Malformed("no stages".into()));
        }
        if specs.is_empty() {
            return Err(TreeError::Malformed("no strategic nodes".into()));
        }
        let mut nodes: Vec<StrategicNode> = Vec::with_capacity(specs.len());
        for (pos, &(id, stage, parent, weight)) in specs.iter().enumerate() {
            if id != pos {
                return Err(TreeError::Malformed(format!(
                    "node ids must be dense and listed in order; found id {id} at position {pos}"
                )));
            }
            if stage < 1 || stage > e_max {
                return Err(TreeError::Malformed(format!(
                    "node {id} has stage {stage} outside 1..={e_max}"
                )));
            }
            match parent {
                None if id != 0 => {
                    return Err(TreeError::Malformed(format!("node {id} has no parent")))
                }
                Some(_) if id == 0 => {
                    return Err(TreeError::Malformed("root node 0 must not have a parent".into()))
                }
                Some(p) if p >= id => {
                    return Err(TreeError::Malformed(format!(
                        "node {id} has parent {p}; parents must precede children"
                    )))
                }
                Some(p) if nodes[p].stage + 1 != stage => {
                    return Err(TreeError::Malformed(format!(
                        "node {id} at stage {stage} has parent {p} at stage {}",
                        nodes[p].stage
                    )))
                }
                _ => {}
            }
            if id == 0 && stage != 1 {
                return Err(TreeError::Malformed("root node must be at stage 1".into()));
            }
            if let Some(p) = parent {
                nodes[p].children.push(id);
            }
            nodes.push(StrategicNode {
                id,
                stage,
                parent,
                weight,
                children: Vec::new(),
            });
        }
        for (k, s) in stages.iter().enumerate() {
            if s.index != k + 1 {
                return Err(TreeError::Malformed(format!(
                    "stage at position {k} carries index {}",
                    s.index
                )));
            }
        }

        let mut stage_nodes = vec![Vec::new(); e_max];
        for n in &nodes {
            stage_nodes[n.stage - 1].push(n.id);
        }

        let mut scenarios = Vec::new();
        for n in &nodes {
            if n.children.is_empty() {
                let mut path = vec![n.id];
                let mut cur = n.parent;
                while let Some(p) = cur {
                    path.push(p);
                    cur = nodes[p].parent;
                }
                path.reverse();
                scenarios.push(StrategicScenario {
                    id: scenarios.len(),
                    path,
                    weight: n.weight,
                });
            }
        }
        let mut scenarios_through = vec![Vec::new(); nodes.len()];
        for s in &scenarios {
            for &n in &s.path {
                scenarios_through[n].push(s.id);
            }
        }

        Ok(Self {
            stages,
            nodes,
            scenarios,
            stage_nodes,
            scenarios_through,
        })
    }

    /// Balanced tree with `branching` equiprobable children per node, given
    /// per-stage `(days, periods, operational probabilities)`.
    pub fn balanced(stages: Vec<(u32, Vec<Period>, Vec<f64>)>, branching: usize) -> Self {
        assert!(branching >= 1, "branching must be at least 1");
        let stages: Vec<Stage> = stages
            .into_iter()
            .enumerate()
            .map(|(k, (days, periods, probs))| {
                let ops = OperationalSubtree::fan(probs, periods.len());
                Stage {
                    index: k + 1,
                    days,
                    periods,
                    ops,
                }
            })
            .collect();
        let mut specs = vec![(0, 1, None, 1.0)];
        let mut frontier = vec![0usize];
        for e in 2..=stages.len() {
            let mut next = Vec::new();
            for &p in &frontier {
                let w = specs[p].3 / branching as f64;
                for _ in 0..branching {
                    let id = specs.len();
                    specs.push((id, e, Some(p), w));
                    next.push(id);
                }
            }
            frontier = next;
        }
        Self::new(stages, specs).expect("balanced construction is well-formed")
    }

    pub fn num_stages(&self) -> usize {
        self.stages.len()
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    /// Stage by 1-based index.
    pub fn stage(&self, e: usize) -> &Stage {
        &self.stages[e - 1]
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[StrategicNode] {
        &self.nodes
    }

    pub fn node(&self, n: NodeId) -> &StrategicNode {
        &self.nodes[n]
    }

    pub fn get(&self, n: NodeId) -> Result<&StrategicNode, TreeError> {
        self.nodes.get(n).ok_or(TreeError::UnknownNode(n))
    }

    pub fn node_stage(&self, n: NodeId) -> &Stage {
        self.stage(self.nodes[n].stage)
    }

    /// Nodes of stage `e` (1-based), in id order.
    pub fn stage_nodes(&self, e: usize) -> &[NodeId] {
        &self.stage_nodes[e - 1]
    }

    pub fn scenarios(&self) -> &[StrategicScenario] {
        &self.scenarios
    }

    pub fn num_scenarios(&self) -> usize {
        self.scenarios.len()
    }

    pub fn scenarios_through(&self, n: NodeId) -> &[usize] {
        &self.scenarios_through[n]
    }

    pub fn is_leaf(&self, n: NodeId) -> bool {
        self.nodes[n].children.is_empty()
    }

    pub fn is_deterministic(&self) -> bool {
        self.scenarios.len() == 1 && self.stages.iter().all(|s| s.num_scenarios() == 1)
    }

    /// All descendants of `n`, sorted by id (which is also stage order).
    pub fn successors(&self, n: NodeId) -> Result<Vec<NodeId>, TreeError> {
        self.get(n)?;
        let mut out = Vec::new();
        let mut stack: Vec<NodeId> = self.nodes[n].children.clone();
        while let Some(m) = stack.pop() {
            out.push(m);
            stack.extend(self.nodes[m].children.iter().copied());
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Last-period operational nodes of the parent's stage.
    pub fn tactical_links(&self, n: NodeId) -> Result<Vec<usize>, TreeError> {
        let node = self.get(n)?;
        let Some(p) = node.parent else {
            return Ok(Vec::new());
        };
        let stage = self.node_stage(p);
        let t_last = stage.last_period();
        Ok((0..stage.num_scenarios())
            .filter_map(|s| stage.ops.node(s, t_last))
            .collect())
    }

    /// Checks every structural invariant; an empty report means well-formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |rule: &str, location: String, detail: String| {
            out.push(Violation {
                rule: rule.into(),
                location,
                detail,
            })
        };
        let e_max = self.stages.len();

        for s in &self.stages {
            let loc = format!("stage {}", s.index);
            if s.days < 1 {
                push("stage days", loc.clone(), "a stage needs at least one day".into());
            }
            if s.periods.is_empty() {
                push("daily periods", loc.clone(), "no daily periods".into());
            }
            if let Some(t) = s.periods.iter().position(|p| p.hours < 1) {
                push(
                    "period hours",
                    format!("{loc}, period {t}"),
                    "periods must last at least one hour".into(),
                );
            }
            let hours: u32 = s.periods.iter().map(|p| p.hours).sum();
            if hours != 24 {
                push("hours per day", loc.clone(), format!("period hours sum to {hours}, not 24"));
            }
            let probs = s.ops.probabilities();
            if probs.is_empty() {
                push("operational scenarios", loc.clone(), "no operational scenarios".into());
            }
            if let Some(pi) = probs.iter().position(|&p| !(0.0..=1.0).contains(&p) || p.is_nan()) {
                push(
                    "operational probability range",
                    format!("{loc}, scenario {pi}"),
                    format!("probability {} outside [0,1]", probs[pi]),
                );
            }
            let total: f64 = probs.iter().sum();
            if (total - 1.0).abs() > RAW_WEIGHT_TOL {
                push(
                    "operational probability sum",
                    loc.clone(),
                    format!("scenario probabilities sum to {total}"),
                );
            }
            if s.ops.num_periods() != s.periods.len() {
                push(
                    "scenario/period coverage",
                    loc.clone(),
                    format!(
                        "subtree spans {} periods, stage has {}",
                        s.ops.num_periods(),
                        s.periods.len()
                    ),
                );
            }
            let mut seen = vec![vec![0usize; s.periods.len()]; probs.len()];
            for node in s.ops.nodes() {
                match seen.get_mut(node.scenario).and_then(|r| r.get_mut(node.period)) {
                    Some(c) => *c += 1,
                    None => push(
                        "scenario/period coverage",
                        format!("{loc}, scenario {}, period {}", node.scenario, node.period),
                        "operational node outside the scenario × period grid".into(),
                    ),
                }
            }
            for (pi, row) in seen.iter().enumerate() {
                for (t, &c) in row.iter().enumerate() {
                    if c != 1 {
                        push(
                            "scenario/period coverage",
                            format!("{loc}, scenario {pi}, period {t}"),
                            format!("scenario has {c} nodes at this period, expected exactly one"),
                        );
                    }
                }
            }
        }

        for e in 1..=e_max {
            let ids = &self.stage_nodes[e - 1];
            if ids.is_empty() {
                push("stage population", format!("stage {e}"), "stage has no strategic nodes".into());
                continue;
            }
            let total: f64 = ids.iter().map(|&n| self.nodes[n].weight).sum();
            if (total - 1.0).abs() > RAW_WEIGHT_TOL {
                push(
                    "stage weight sum",
                    format!("stage {e}"),
                    format!("node weights sum to {total}"),
                );
            }
        }
        for n in &self.nodes {
            if !(0.0..=1.0).contains(&n.weight) || n.weight.is_nan() {
                push(
                    "node weight range",
                    format!("node {}", n.id),
                    format!("weight {} outside [0,1]", n.weight),
                );
            }
            if n.children.is_empty() {
                if n.stage != e_max {
                    push(
                        "scenario depth",
                        format!("node {}", n.id),
                        format!("leaf at stage {} but the tree has {e_max} stages", n.stage),
                    );
                }
            } else {
                let sum: f64 = n.children.iter().map(|&c| self.nodes[c].weight).sum();
                if (sum - n.weight).abs() > RAW_WEIGHT_TOL {
                    push(
                        "weight conservation at node",
                        format!("node {}", n.id),
                        format!("children weights sum to {sum}, node weight is {}", n.weight),
                    );
                }
            }
        }
        if (self.nodes[0].weight - 1.0).abs() > RAW_WEIGHT_TOL {
            push("root weight", "node 0".into(), format!("root weight is {}", self.nodes[0].weight));
        }
        out
    }

    /// Recomputes weights top-down from conditional branch probabilities and
    /// rescales operational probabilities to sum to one. Afterwards every
    /// non-terminal weight equals the sum of its children to rounding.
    pub fn normalized(&self) -> Self {
        let mut tree = self.clone();
        tree.nodes[0].weight = 1.0;
        for id in 0..tree.nodes.len() {
            let children = tree.nodes[id].children.clone();
            if children.is_empty() {
                continue;
            }
            let raw: f64 = children.iter().map(|&c| self.nodes[c].weight).sum();
            let parent_w = tree.nodes[id].weight;
            let k = children.len() as f64;
            let n_children = children.len();
            // Weights that already add up are kept, so normalizing is idempotent.
            let consistent = raw > 0.0 && (raw - parent_w).abs() <= 1e-12 * parent_w.max(1.0);
            let mut assigned = 0.0;
            for (pos, &c) in children.iter().enumerate() {
                let w = if consistent {
                    self.nodes[c].weight
                } else if raw > 0.0 {
                    if pos + 1 == n_children {
                        // Last child takes the remainder so the parent sum is exact.
                        parent_w - assigned
                    } else {
                        parent_w * self.nodes[c].weight / raw
                    }
                } else {
                    parent_w / k
                };
                tree.nodes[c].weight = w;
                assigned += w;
            }
        }
        for s in &mut tree.scenarios {
            s.weight = tree.nodes[*s.path.last().expect("non-empty path")].weight;
        }
        for stage in &mut tree.stages {
            let total: f64 = stage.ops.probabilities().iter().sum();
            if total > 0.0 && (total - 1.0).abs() > 1e-12 {
                let probs = stage.ops.probabilities().iter().map(|p| p / total).collect();
                stage.ops = stage.ops.with_probabilities(probs);
            }
        }
        tree
    }

    /// Per-stage copy with a replaced operational fan, used when building
    /// expected-value trees.
    pub fn with_stage_ops(&self, e: usize, ops: OperationalSubtree) -> Self {
        let mut tree = self.clone();
        tree.stages[e - 1].ops = ops;
        tree
    }

    fn bundle(&self, id: usize, anchor: Option<NodeId>, mut scenarios: Vec<usize>) -> ScenarioBundle {
        scenarios.sort_unstable();
        let weight: f64 = scenarios.iter().map(|&s| self.scenarios[s].weight).sum();
        let scenario_weights: Vec<f64> = scenarios
            .iter()
            .map(|&s| self.scenarios[s].weight / weight)
            .collect();
        let mut nodes = BTreeSet::new();
        for &s in &scenarios {
            nodes.extend(self.scenarios[s].path.iter().copied());
        }
        let nodes: Vec<NodeId> = nodes.into_iter().collect();
        let node_weights = nodes
            .iter()
            .map(|&n| {
                self.scenarios_through[n]
                    .iter()
                    .filter_map(|s| scenarios.binary_search(s).ok())
                    .map(|k| scenario_weights[k])
                    .sum()
            })
            .collect();
        ScenarioBundle {
            id,
            anchor,
            scenarios,
            weight,
            scenario_weights,
            nodes,
            node_weights,
        }
    }

    /// One cluster per node of stage `e* + 1`, holding the scenarios through it.
    pub fn scenario_cluster_partition(&self, e_star: usize) -> Result<Vec<ScenarioBundle>, TreeError> {
        let e_max = self.num_stages();
        if e_star < 1 || e_star + 1 > e_max {
            return Err(TreeError::StageOutOfRange(e_star, e_max.saturating_sub(1)));
        }
        Ok(self
            .stage_nodes(e_star + 1)
            .iter()
            .enumerate()
            .map(|(c, &n)| self.bundle(c, Some(n), self.scenarios_through[n].clone()))
            .collect())
    }

    /// `G` disjoint scenario groups: seeded shuffle, then round-robin.
    pub fn scenario_group_partition(&self, g: usize, seed: u64) -> Result<Vec<ScenarioBundle>, TreeError> {
        let total = self.num_scenarios();
        if g < 1 || g > total {
            return Err(TreeError::GroupCountOutOfRange(g, total));
        }
        let mut order: Vec<usize> = (0..total).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut groups = vec![Vec::new(); g];
        for (k, s) in order.into_iter().enumerate() {
            groups[k % g].push(s);
        }
        Ok(groups
            .into_iter()
            .enumerate()
            .map(|(id, members)| self.bundle(id, None, members))
            .collect())
    }

    /// Single-scenario bundle (path with unit weights).
    pub fn scenario_bundle(&self, scenario: usize) -> ScenarioBundle {
        self.bundle(scenario, None, vec![scenario])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hourly(n: usize) -> Vec<Period> {
        let base = 24 / n as u32;
        let mut v: Vec<Period> = (0..n).map(|_| Period { hours: base, pv: false }).collect();
        v.last_mut().unwrap().hours += 24 - base * n as u32;
        v
    }

    pub(crate) fn fig2_tree() -> MultiHorizonTree {
        // Stages: {0}, {1,2}, {3,4,5,6}, leaves 7..13.
        let stages = (0..4)
            .map(|_| (1u32, hourly(2), vec![1.0]))
            .collect::<Vec<_>>();
        let stages: Vec<Stage> = stages
            .into_iter()
            .enumerate()
            .map(|(k, (d, p, pr))| Stage {
                index: k + 1,
                days: d,
                ops: OperationalSubtree::fan(pr, p.len()),
                periods: p,
            })
            .collect();
        let parents = [
            None,
            Some(0),
            Some(0),
            Some(1),
            Some(1),
            Some(2),
            Some(2),
            Some(3),
            Some(3),
            Some(4),
            Some(5),
            Some(6),
            Some(6),
            Some(6),
        ];
        let stage_of = [1, 2, 2, 3, 3, 3, 3, 4, 4, 4, 4, 4, 4, 4];
        let specs = (0..14)
            .map(|i| (i, stage_of[i], parents[i], 1.0))
            .collect();
        MultiHorizonTree::new(stages, specs).unwrap().normalized()
    }

    #[test]
    fn balanced_small_shape() {
        let t = MultiHorizonTree::balanced(vec![(365, hourly(24), vec![1.0]); 3], 3);
        assert_eq!(t.num_nodes(), 13);
        assert_eq!(t.num_scenarios(), 9);
        assert_eq!(t.successors(0).unwrap().len(), 12);
        assert!(t.validate().is_empty());
    }

    #[test]
    fn leaves_have_no_successors() {
        let t = MultiHorizonTree::balanced(vec![(1, hourly(2), vec![1.0]); 3], 2);
        for &n in t.stage_nodes(3) {
            assert!(t.successors(n).unwrap().is_empty());
        }
        assert_eq!(t.successors(99), Err(TreeError::UnknownNode(99)));
    }

    #[test]
    fn fig2_clusters() {
        let t = fig2_tree();
        assert_eq!(t.num_scenarios(), 7);
        let clusters = t.scenario_cluster_partition(2).unwrap();
        let sets: Vec<Vec<usize>> = clusters.iter().map(|c| c.scenarios.clone()).collect();
        assert_eq!(sets, vec![vec![0, 1], vec![2], vec![3], vec![4, 5, 6]]);
        let anchors: Vec<_> = clusters.iter().map(|c| c.anchor.unwrap()).collect();
        assert_eq!(anchors, vec![3, 4, 5, 6]);
    }

    #[test]
    fn weight_conservation_violation_is_reported() {
        let stages = vec![
            Stage { index: 1, days: 1, periods: hourly(1), ops: OperationalSubtree::fan(vec![1.0], 1) },
            Stage { index: 2, days: 1, periods: hourly(1), ops: OperationalSubtree::fan(vec![1.0], 1) },
        ];
        let t = MultiHorizonTree::new(
            stages,
            vec![(0, 1, None, 1.0), (1, 2, Some(0), 0.5), (2, 2, Some(0), 0.4)],
        )
        .unwrap();
        let report = t.validate();
        assert!(report
            .iter()
            .any(|v| v.rule == "weight conservation at node" && v.location == "node 0"));
        assert!(t.normalized().validate().is_empty());
    }

    #[test]
    fn skipped_period_is_a_coverage_violation() {
        let nodes = vec![
            OpNode { scenario: 0, period: 0 },
            OpNode { scenario: 0, period: 1 },
            OpNode { scenario: 1, period: 0 },
        ];
        let ops = OperationalSubtree::from_nodes(vec![0.5, 0.5], 2, nodes);
        let stages = vec![Stage { index: 1, days: 1, periods: hourly(2), ops }];
        let t = MultiHorizonTree::new(stages, vec![(0, 1, None, 1.0)]).unwrap();
        let report = t.validate();
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].rule, "scenario/period coverage");
        assert!(report[0].location.contains("scenario 1, period 1"));
    }

    #[test]
    fn tactical_links_are_parent_last_periods() {
        let t = MultiHorizonTree::balanced(
            vec![(2, hourly(3), vec![0.5, 0.5]), (2, hourly(2), vec![1.0])],
            2,
        );
        assert!(t.tactical_links(0).unwrap().is_empty());
        assert_eq!(t.tactical_links(1).unwrap(), vec![2, 5]);
    }

    #[test]
    fn group_rescaling_matches_hand_arithmetic() {
        let stages: Vec<Stage> = (0..2)
            .map(|k| Stage { index: k + 1, days: 1, periods: hourly(1), ops: OperationalSubtree::fan(vec![1.0], 1) })
            .collect();
        let t = MultiHorizonTree::new(
            stages,
            vec![(0, 1, None, 1.0), (1, 2, Some(0), 0.5), (2, 2, Some(0), 0.3), (3, 2, Some(0), 0.2)],
        )
        .unwrap();
        let b = t.bundle(0, None, vec![2, 0]);
        assert_eq!(b.scenarios, vec![0, 2]);
        assert!((b.weight - 0.7).abs() < 1e-15);
        assert!((b.scenario_weights[0] - 5.0 / 7.0).abs() < 1e-15);
        assert!((b.scenario_weights[1] - 2.0 / 7.0).abs() < 1e-15);
        assert_eq!(b.nodes, vec![0, 1, 3]);
        assert!((b.node_weights[0] - 1.0).abs() < 1e-15);
    }
}
