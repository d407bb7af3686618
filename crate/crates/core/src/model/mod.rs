//! Emitter for the three model variants over any scope of strategic nodes,
//! plus solution extraction.

mod audit;
mod solution;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::instance::Instance;
use crate::milp::{self, AbstractMilp, ModelStats, Sense, SolveError, SolveOutcome, SolveStatus, SolverControls, VarId, VarKind};
use crate::tree::{MultiHorizonTree, NodeId, ScenarioBundle};

pub use audit::{
    check_feasibility, evaluate_cost, nodal_discomfort_stats, scenario_discomfort, AuditReport, AuditViolation,
    DiscomfortStats,
};
pub use solution::{CostBreakdown, NodeValues, Solution};

/// Tolerance for accepting fixings that sit marginally outside a bound.
const FIX_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "nod")]
    NoD,
    #[serde(rename = "rn")]
    RN,
    #[serde(rename = "sd")]
    SD,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::NoD, Variant::RN, Variant::SD];

    pub fn has_expected_bound(self) -> bool {
        self >= Variant::RN
    }

    pub fn has_dominance(self) -> bool {
        self == Variant::SD
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::NoD => "nod",
            Variant::RN => "rn",
            Variant::SD => "sd",
        })
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "nod" | "no-d" | "none" => Ok(Variant::NoD),
            "rn" | "risk-neutral" => Ok(Variant::RN),
            "sd" | "risk-averse" => Ok(Variant::SD),
            other => Err(format!("unknown variant {other:?} (expected nod, rn or sd)")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid scope: {0}")]
    Scope(String),
    #[error("invalid fixing: {0}")]
    Fixing(String),
    #[error("instance not usable for this variant: {0}")]
    Instance(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("{context}: solver returned {status}")]
    Status { context: String, status: SolveStatus },
}

/// One strategic node of a model scope.
#[derive(Clone, Debug, PartialEq)]
pub struct ScopeNode {
    /// Node of the instance tree supplying the data.
    pub source: NodeId,
    /// Scope index acting as the ancestor.
    pub parent: Option<usize>,
    /// Objective weight.
    pub weight: f64,
    /// Frozen nodes only provide fixed ancestor values; they carry no
    /// constraints and no objective terms.
    pub frozen: bool,
}

/// Ordered node set over which a model is emitted. Parents precede children.
#[derive(Clone, Debug, PartialEq)]
pub struct Scope {
    pub nodes: Vec<ScopeNode>,
}

impl Scope {
    /// Whole tree with the tree weights.
    pub fn full(tree: &MultiHorizonTree) -> Self {
        Self {
            nodes: tree
                .nodes()
                .iter()
                .map(|n| ScopeNode {
                    source: n.id,
                    parent: n.parent,
                    weight: n.weight,
                    frozen: false,
                })
                .collect(),
        }
    }

    /// Node subset with weight overrides. The nearest included ancestor acts
    /// as a node's predecessor; only the tree root may lack one.
    pub fn subset(tree: &MultiHorizonTree, nodes: &[NodeId], weights: &[f64]) -> Result<Self, ModelError> {
        if nodes.len() != weights.len() {
            return Err(ModelError::Scope("node and weight lists differ in length".into()));
        }
        let mut order: Vec<usize> = (0..nodes.len()).collect();
        order.sort_by_key(|&k| nodes[k]);
        let mut position: HashMap<NodeId, usize> = HashMap::new();
        let mut out = Vec::with_capacity(nodes.len());
        for k in order {
            let n = nodes[k];
            tree.get(n).map_err(|e| ModelError::Scope(e.to_string()))?;
            if position.contains_key(&n) {
                return Err(ModelError::Scope(format!("node {n} listed twice")));
            }
            let mut anc = tree.node(n).parent;
            let parent = loop {
                match anc {
                    None => break None,
                    Some(a) => {
                        if let Some(&p) = position.get(&a) {
                            break Some(p);
                        }
                        anc = tree.node(a).parent;
                    }
                }
            };
            if parent.is_none() && n != 0 {
                return Err(ModelError::Scope(format!(
                    "node {n} has no included ancestor and is not the root"
                )));
            }
            position.insert(n, out.len());
            out.push(ScopeNode {
                source: n,
                parent,
                weight: weights[k],
                frozen: false,
            });
        }
        Ok(Self { nodes: out })
    }

    /// Scenario group / cluster / single path with rescaled weights.
    pub fn bundle(tree: &MultiHorizonTree, bundle: &ScenarioBundle) -> Self {
        Self::subset(tree, &bundle.nodes, &bundle.node_weights).expect("bundles are root-closed")
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn validate(&self, tree: &MultiHorizonTree) -> Result<(), ModelError> {
        for (k, s) in self.nodes.iter().enumerate() {
            tree.get(s.source).map_err(|e| ModelError::Scope(e.to_string()))?;
            match s.parent {
                Some(p) if p >= k => {
                    return Err(ModelError::Scope(format!("scope node {k} lists parent {p} after itself")))
                }
                Some(p) => {
                    let ps = self.nodes[p].source;
                    let mut anc = tree.node(s.source).parent;
                    while let Some(a) = anc {
                        if a == ps {
                            break;
                        }
                        anc = tree.node(a).parent;
                    }
                    if anc.is_none() {
                        return Err(ModelError::Scope(format!(
                            "scope node {k} (node {}) has parent {ps}, which is not an ancestor",
                            s.source
                        )));
                    }
                }
                None if !s.frozen && s.source != 0 => {
                    return Err(ModelError::Scope(format!(
                        "scope node {k} (node {}) has no predecessor and is neither root nor frozen",
                        s.source
                    )))
                }
                None => {}
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FixLevel {
    /// Investment variables only.
    Strategic,
    /// Every variable of the node.
    All,
}

/// Variable fixings keyed by source node.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Fixings {
    pub nodes: BTreeMap<NodeId, (NodeValues, FixLevel)>,
}

impl Fixings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fix(&mut self, node: NodeId, values: NodeValues, level: FixLevel) {
        self.nodes.insert(node, (values, level));
    }

    pub fn get(&self, node: NodeId) -> Option<&(NodeValues, FixLevel)> {
        self.nodes.get(&node)
    }
}

/// Variable ids of one scope node. Operational arrays are flattened as
/// `[tech][scenario * T + period]`.
#[derive(Clone, Debug, Default)]
pub struct NodeVars {
    pub tag: String,
    pub x: Vec<VarId>,
    pub x_tilde: Vec<VarId>,
    pub alpha: Vec<VarId>,
    pub xp: Vec<VarId>,
    pub xp_tilde: Vec<VarId>,
    pub beta: Vec<VarId>,
    pub z_r: Vec<Vec<Option<VarId>>>,
    pub z_g: Vec<VarId>,
    pub y: Vec<Vec<VarId>>,
    pub y_plus: Vec<Vec<VarId>>,
    pub y_minus: Vec<Vec<VarId>>,
    pub dl1: Vec<Vec<Option<VarId>>>,
    pub delta: Vec<Vec<Option<VarId>>>,
    pub s: Vec<Vec<VarId>>,
    pub eta: Vec<Vec<VarId>>,
}

pub struct BuiltModel {
    pub milp: AbstractMilp,
    pub scope: Scope,
    pub vars: Vec<NodeVars>,
    pub variant: Variant,
}

impl BuiltModel {
    pub fn stats(&self) -> ModelStats {
        self.milp.stats()
    }

    /// Values of scope node `k`, integral variables snapped.
    pub fn node_values(&self, instance: &Instance, k: usize, values: &[f64]) -> NodeValues {
        let nv = &self.vars[k];
        let stage = instance.tree.node_stage(self.scope.nodes[k].source);
        let (p, t) = (stage.num_scenarios(), stage.num_periods());
        let get = |v: VarId| values[v];
        let snap = |v: VarId| values[v].round();
        let grid = |ids: &Vec<VarId>| -> Vec<Vec<f64>> {
            (0..p).map(|s| (0..t).map(|h| get(ids[s * t + h])).collect()).collect()
        };
        let grid_opt = |ids: &Vec<Option<VarId>>, integral: bool| -> Vec<Vec<f64>> {
            (0..p)
                .map(|s| {
                    (0..t)
                        .map(|h| match ids[s * t + h] {
                            Some(v) if integral => snap(v),
                            Some(v) => get(v),
                            None => 0.0,
                        })
                        .collect()
                })
                .collect()
        };
        let profiles = instance.discomfort.profiles[stage.index - 1].len();
        NodeValues {
            x: nv.x.iter().map(|&v| snap(v)).collect(),
            x_tilde: nv.x_tilde.iter().map(|&v| get(v)).collect(),
            alpha: nv.alpha.iter().map(|&v| snap(v)).collect(),
            xp: nv.xp.iter().map(|&v| snap(v)).collect(),
            xp_tilde: nv.xp_tilde.iter().map(|&v| snap(v)).collect(),
            beta: nv.beta.iter().map(|&v| snap(v)).collect(),
            z_r: nv.z_r.iter().map(|ids| grid_opt(ids, false)).collect(),
            z_g: grid(&nv.z_g),
            y: nv.y.iter().map(grid).collect(),
            y_plus: nv.y_plus.iter().map(grid).collect(),
            y_minus: nv.y_minus.iter().map(grid).collect(),
            dl1: nv.dl1.iter().map(|ids| grid_opt(ids, false)).collect(),
            delta: nv.delta.iter().map(|ids| grid_opt(ids, true)).collect(),
            s: if nv.s.is_empty() {
                vec![vec![0.0; p]; profiles]
            } else {
                nv.s.iter().map(|row| row.iter().map(|&v| get(v)).collect()).collect()
            },
            eta: if nv.eta.is_empty() {
                vec![vec![0.0; p]; profiles]
            } else {
                nv.eta.iter().map(|row| row.iter().map(|&v| snap(v)).collect()).collect()
            },
        }
    }

    /// Assembles a full-tree solution; the scope must hold every tree node
    /// exactly once.
    pub fn solution(&self, instance: &Instance, outcome: &SolveOutcome) -> Result<Solution, ModelError> {
        let n = instance.tree.num_nodes();
        let mut slots: Vec<Option<NodeValues>> = vec![None; n];
        for k in 0..self.scope.len() {
            let src = self.scope.nodes[k].source;
            if slots[src].is_some() {
                return Err(ModelError::Scope(format!("node {src} appears twice in the scope")));
            }
            slots[src] = Some(self.node_values(instance, k, &outcome.values));
        }
        let nodes = slots
            .into_iter()
            .enumerate()
            .map(|(i, v)| v.ok_or_else(|| ModelError::Scope(format!("node {i} missing from the scope"))))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Solution::new(instance, self.variant, nodes, outcome.objective))
    }
}

/// Per-stage lookup tables for deferrable loads.
struct DeferrableIndex {
    /// `[j]` feasible start periods.
    starts: Vec<Vec<usize>>,
    /// `[j][t]` starts whose supply interval covers `t`.
    covers: Vec<Vec<Vec<usize>>>,
    /// `[pair][t]` admissible later starts.
    precedence: Vec<Vec<Vec<usize>>>,
    /// `[pair]` overlapping start pairs.
    overlaps: Vec<Vec<(usize, usize)>>,
}

impl DeferrableIndex {
    fn new(inst: &Instance, e: usize) -> Self {
        let t_len = inst.tree.stage(e).num_periods();
        let nd = inst.num_deferrable();
        let starts: Vec<Vec<usize>> = (0..nd).map(|j| inst.feasible_starts(j, e)).collect();
        let covers = (0..nd)
            .map(|j| (0..t_len).map(|t| inst.supply_starts(j, e, t)).collect())
            .collect();
        let precedence = (0..inst.loads.precedence.len())
            .map(|k| (0..t_len).map(|t| inst.precedence_periods(k, e, t)).collect())
            .collect();
        let overlaps = inst
            .loads
            .incompatible
            .iter()
            .map(|&(a, b)| inst.overlapping_starts(a, b, e))
            .collect();
        Self {
            starts,
            covers,
            precedence,
            overlaps,
        }
    }
}

/// Emits the model of `variant` over `scope`, applying `fixings`.
pub fn build_model(
    instance: &Instance,
    variant: Variant,
    scope: &Scope,
    fixings: &Fixings,
) -> Result<BuiltModel, ModelError> {
    let tree = &instance.tree;
    scope.validate(tree)?;
    if variant.has_dominance() {
        for (e, profs) in instance.discomfort.profiles.iter().enumerate() {
            if let Some(p) = profs.iter().position(|p| !(p.threshold > 0.0)) {
                return Err(ModelError::Instance(format!(
                    "profile {p} of stage {} needs a positive threshold",
                    e + 1
                )));
            }
        }
    }
    let e_max = tree.num_stages();
    let index: Vec<DeferrableIndex> = (1..=e_max).map(|e| DeferrableIndex::new(instance, e)).collect();

    let mut counts: HashMap<NodeId, usize> = HashMap::new();
    for s in &scope.nodes {
        *counts.entry(s.source).or_default() += 1;
    }
    let mut seen: HashMap<NodeId, usize> = HashMap::new();

    let mut m = AbstractMilp::new();
    let mut vars = Vec::with_capacity(scope.len());
    for (k, s) in scope.nodes.iter().enumerate() {
        let tag = if counts[&s.source] > 1 {
            let c = seen.entry(s.source).or_default();
            *c += 1;
            format!("n={}@{}", s.source, c)
        } else {
            format!("n={}", s.source)
        };
        let nv = declare_vars(instance, variant, &mut m, s.source, &tag, &index);
        let fix = match fixings.get(s.source) {
            Some(f) => Some(f),
            None if s.frozen => {
                return Err(ModelError::Fixing(format!(
                    "frozen scope node {k} (node {}) has no fixing",
                    s.source
                )))
            }
            None => None,
        };
        if let Some((values, level)) = fix {
            let level = if s.frozen { FixLevel::All } else { *level };
            apply_fixing(instance, &mut m, &nv, s.source, values, level)?;
        }
        vars.push(nv);
    }
    for (k, s) in scope.nodes.iter().enumerate() {
        if s.frozen {
            continue;
        }
        let parent = s.parent.map(|p| &vars[p]);
        emit_node(instance, variant, &mut m, s, parent, &vars[k], &index[tree.node(s.source).stage - 1], &vars, scope);
    }
    Ok(BuiltModel {
        milp: m,
        scope: scope.clone(),
        vars,
        variant,
    })
}

fn declare_vars(
    inst: &Instance,
    variant: Variant,
    m: &mut AbstractMilp,
    n: NodeId,
    tag: &str,
    index: &[DeferrableIndex],
) -> NodeVars {
    let tree = &inst.tree;
    let e = tree.node(n).stage;
    let st = tree.stage(e);
    let (p_len, t_len) = (st.num_scenarios(), st.num_periods());
    let inf = f64::INFINITY;
    let mut nv = NodeVars {
        tag: tag.to_string(),
        ..NodeVars::default()
    };
    for (i, pv) in inst.pv_technologies.iter().enumerate() {
        nv.x.push(m.add_var(format!("x:{tag},i={i}"), VarKind::Binary, 0.0, 1.0));
        nv.x_tilde.push(m.add_var(format!("x_tilde:{tag},i={i}"), VarKind::Continuous, 0.0, pv.max_panels));
        nv.alpha.push(m.add_var(format!("alpha:{tag},i={i}"), VarKind::Binary, 0.0, 1.0));
    }
    for (b, bs) in inst.bess_technologies.iter().enumerate() {
        nv.xp.push(m.add_var(format!("xp:{tag},b={b}"), VarKind::Binary, 0.0, 1.0));
        nv.xp_tilde.push(m.add_var(format!("xp_tilde:{tag},b={b}"), VarKind::Integer, 0.0, bs.max_units.floor()));
        nv.beta.push(m.add_var(format!("beta:{tag},b={b}"), VarKind::Binary, 0.0, 1.0));
    }
    for i in 0..inst.num_pv() {
        let mut row = Vec::with_capacity(p_len * t_len);
        for s in 0..p_len {
            for t in 0..t_len {
                row.push(st.is_pv(t).then(|| {
                    m.add_var(format!("zR:{tag},i={i},pi={s},t={t}"), VarKind::Continuous, 0.0, inf)
                }));
            }
        }
        nv.z_r.push(row);
    }
    for s in 0..p_len {
        for t in 0..t_len {
            nv.z_g.push(m.add_var(format!("zG:{tag},pi={s},t={t}"), VarKind::Continuous, 0.0, inf));
        }
    }
    for b in 0..inst.num_bess() {
        let mut y = Vec::new();
        let mut yp = Vec::new();
        let mut ym = Vec::new();
        for s in 0..p_len {
            for t in 0..t_len {
                y.push(m.add_var(format!("y:{tag},b={b},pi={s},t={t}"), VarKind::Continuous, 0.0, inf));
                yp.push(m.add_var(format!("y_plus:{tag},b={b},pi={s},t={t}"), VarKind::Continuous, 0.0, inf));
                ym.push(m.add_var(format!("y_minus:{tag},b={b},pi={s},t={t}"), VarKind::Continuous, 0.0, inf));
            }
        }
        nv.y.push(y);
        nv.y_plus.push(yp);
        nv.y_minus.push(ym);
    }
    for (j, l) in inst.loads.elastic.iter().enumerate() {
        let mut in_window = vec![false; t_len];
        for &t in &l.window[e - 1] {
            in_window[t] = true;
        }
        let mut row = Vec::with_capacity(p_len * t_len);
        for s in 0..p_len {
            for t in 0..t_len {
                row.push(in_window[t].then(|| {
                    m.add_var(
                        format!("dl1:{tag},j={j},pi={s},t={t}"),
                        VarKind::Continuous,
                        0.0,
                        l.max_curtail[e - 1][t],
                    )
                }));
            }
        }
        nv.dl1.push(row);
    }
    let idx = &index[e - 1];
    for j in 0..inst.num_deferrable() {
        let mut is_start = vec![false; t_len];
        for &t in &idx.starts[j] {
            is_start[t] = true;
        }
        let mut row = Vec::with_capacity(p_len * t_len);
        for s in 0..p_len {
            for t in 0..t_len {
                row.push(is_start[t].then(|| {
                    m.add_var(format!("delta:{tag},j={j},pi={s},t={t}"), VarKind::Binary, 0.0, 1.0)
                }));
            }
        }
        nv.delta.push(row);
    }
    if variant.has_dominance() {
        for p in 0..inst.discomfort.profiles[e - 1].len() {
            nv.s.push(
                (0..p_len)
                    .map(|s| m.add_var(format!("s:{tag},p={p},pi={s}"), VarKind::Continuous, 0.0, inf))
                    .collect(),
            );
            nv.eta.push(
                (0..p_len)
                    .map(|s| m.add_var(format!("eta:{tag},p={p},pi={s}"), VarKind::Binary, 0.0, 1.0))
                    .collect(),
            );
        }
    }
    nv
}

fn fix_var(m: &mut AbstractMilp, v: VarId, value: f64) -> Result<(), ModelError> {
    let var = &mut m.vars[v];
    let value = if var.kind.is_integral() { value.round() } else { value };
    if value < var.lb - FIX_TOL || value > var.ub + FIX_TOL || !value.is_finite() {
        return Err(ModelError::Fixing(format!(
            "{} = {value} lies outside [{}, {}]",
            var.name, var.lb, var.ub
        )));
    }
    let value = value.clamp(var.lb, var.ub);
    var.lb = value;
    var.ub = value;
    Ok(())
}

fn shape_err(n: NodeId, what: &str) -> ModelError {
    ModelError::Fixing(format!("fixing for node {n} has the wrong shape for {what}"))
}

fn apply_fixing(
    inst: &Instance,
    m: &mut AbstractMilp,
    nv: &NodeVars,
    n: NodeId,
    values: &NodeValues,
    level: FixLevel,
) -> Result<(), ModelError> {
    let pairs: [(&Vec<VarId>, &Vec<f64>, &str); 6] = [
        (&nv.x, &values.x, "x"),
        (&nv.x_tilde, &values.x_tilde, "x_tilde"),
        (&nv.alpha, &values.alpha, "alpha"),
        (&nv.xp, &values.xp, "xp"),
        (&nv.xp_tilde, &values.xp_tilde, "xp_tilde"),
        (&nv.beta, &values.beta, "beta"),
    ];
    for (ids, vals, what) in pairs {
        if ids.len() != vals.len() {
            return Err(shape_err(n, what));
        }
        for (&v, &x) in ids.iter().zip(vals) {
            fix_var(m, v, x)?;
        }
    }
    if level == FixLevel::Strategic {
        return Ok(());
    }
    let st = inst.tree.node_stage(n);
    let (p_len, t_len) = (st.num_scenarios(), st.num_periods());
    let cell = |grid: &Vec<Vec<f64>>, s: usize, t: usize, what: &str| -> Result<f64, ModelError> {
        grid.get(s).and_then(|r| r.get(t)).copied().ok_or_else(|| shape_err(n, what))
    };
    let fix_grid = |m: &mut AbstractMilp, ids: &Vec<VarId>, grid: &Vec<Vec<f64>>, what: &str| -> Result<(), ModelError> {
        for s in 0..p_len {
            for t in 0..t_len {
                fix_var(m, ids[s * t_len + t], cell(grid, s, t, what)?)?;
            }
        }
        Ok(())
    };
    let fix_opt = |m: &mut AbstractMilp, ids: &Vec<Option<VarId>>, grid: &Vec<Vec<f64>>, what: &str| -> Result<(), ModelError> {
        for s in 0..p_len {
            for t in 0..t_len {
                if let Some(v) = ids[s * t_len + t] {
                    fix_var(m, v, cell(grid, s, t, what)?)?;
                }
            }
        }
        Ok(())
    };
    let check_len = |a: usize, b: usize, what: &str| if a == b { Ok(()) } else { Err(shape_err(n, what)) };
    check_len(nv.z_r.len(), values.z_r.len(), "zR")?;
    for (ids, grid) in nv.z_r.iter().zip(&values.z_r) {
        fix_opt(m, ids, grid, "zR")?;
    }
    fix_grid(m, &nv.z_g, &values.z_g, "zG")?;
    check_len(nv.y.len(), values.y.len(), "y")?;
    check_len(nv.y.len(), values.y_plus.len(), "y_plus")?;
    check_len(nv.y.len(), values.y_minus.len(), "y_minus")?;
    for b in 0..nv.y.len() {
        fix_grid(m, &nv.y[b], &values.y[b], "y")?;
        fix_grid(m, &nv.y_plus[b], &values.y_plus[b], "y_plus")?;
        fix_grid(m, &nv.y_minus[b], &values.y_minus[b], "y_minus")?;
    }
    check_len(nv.dl1.len(), values.dl1.len(), "dl1")?;
    for (ids, grid) in nv.dl1.iter().zip(&values.dl1) {
        fix_opt(m, ids, grid, "dl1")?;
    }
    check_len(nv.delta.len(), values.delta.len(), "delta")?;
    for (ids, grid) in nv.delta.iter().zip(&values.delta) {
        fix_opt(m, ids, grid, "delta")?;
    }
    for (p, row) in nv.s.iter().enumerate() {
        for (s, &v) in row.iter().enumerate() {
            let val = values.s.get(p).and_then(|r| r.get(s)).copied().ok_or_else(|| shape_err(n, "s"))?;
            fix_var(m, v, val)?;
        }
    }
    for (p, row) in nv.eta.iter().enumerate() {
        for (s, &v) in row.iter().enumerate() {
            let val = values.eta.get(p).and_then(|r| r.get(s)).copied().ok_or_else(|| shape_err(n, "eta"))?;
            fix_var(m, v, val)?;
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn emit_node(
    inst: &Instance,
    variant: Variant,
    m: &mut AbstractMilp,
    sn: &ScopeNode,
    parent: Option<&NodeVars>,
    nv: &NodeVars,
    idx: &DeferrableIndex,
    all: &[NodeVars],
    scope: &Scope,
) {
    let tree = &inst.tree;
    let n = sn.source;
    let w = sn.weight;
    let e = tree.node(n).stage;
    let st = tree.stage(e);
    let (p_len, t_len) = (st.num_scenarios(), st.num_periods());
    let days = st.days as f64;
    let tag = &nv.tag;
    let lim = &inst.limits;

    // Investment costs and residual values.
    for (i, pv) in inst.pv_technologies.iter().enumerate() {
        m.add_objective(nv.x[i], w * pv.prep_cost[n]);
        m.add_objective(nv.x_tilde[i], w * (pv.install_cost[n] + pv.maint_cost[n]));
        if let Some(pa) = parent {
            m.add_objective(pa.x[i], -w * pv.prep_cost[n]);
            m.add_objective(pa.x_tilde[i], -w * pv.install_cost[n]);
        }
        if tree.is_leaf(n) {
            m.add_objective(nv.x_tilde[i], -w * pv.residual_value[n]);
        }
    }
    for (b, bs) in inst.bess_technologies.iter().enumerate() {
        m.add_objective(nv.xp[b], w * bs.prep_cost[n]);
        m.add_objective(nv.xp_tilde[b], w * (bs.install_cost[n] + bs.maint_cost[n]));
        if let Some(pa) = parent {
            m.add_objective(pa.xp[b], -w * bs.prep_cost[n]);
            m.add_objective(pa.xp_tilde[b], -w * bs.install_cost[n]);
        }
        if tree.is_leaf(n) {
            m.add_objective(nv.xp_tilde[b], -w * bs.residual_value[n]);
        }
    }

    // Strategic constraints.
    let ni = inst.num_pv();
    let nb = inst.num_bess();
    let mut single_pv = Vec::new();
    let mut total_pv = Vec::new();
    let mut single_b = Vec::new();
    let mut total_b = Vec::new();
    let mut budget = Vec::new();
    for (i, pv) in inst.pv_technologies.iter().enumerate() {
        m.add_constraint(format!("pv_impulse_link:{tag},i={i}"), vec![(nv.alpha[i], 1.0), (nv.x[i], -1.0)], Sense::Le, 0.0);
        m.add_constraint(
            format!("pv_count_cap:{tag},i={i}"),
            vec![(nv.x_tilde[i], 1.0), (nv.x[i], -pv.max_panels)],
            Sense::Le,
            0.0,
        );
        let mut inc = vec![(nv.x_tilde[i], 1.0)];
        if let Some(pa) = parent {
            m.add_constraint(format!("pv_step_monotone:{tag},i={i}"), vec![(pa.x[i], 1.0), (nv.x[i], -1.0)], Sense::Le, 0.0);
            m.add_constraint(
                format!("pv_count_monotone:{tag},i={i}"),
                vec![(pa.x_tilde[i], 1.0), (nv.x_tilde[i], -1.0)],
                Sense::Le,
                0.0,
            );
            inc.push((pa.x_tilde[i], -1.0));
            single_pv.push((pa.x[i], -1.0));
            budget.push((pa.x[i], -pv.prep_cost[n]));
            budget.push((pa.x_tilde[i], -pv.install_cost[n]));
        }
        single_pv.push((nv.x[i], 1.0));
        total_pv.push((nv.x_tilde[i], 1.0));
        budget.push((nv.x[i], pv.prep_cost[n]));
        budget.push((nv.x_tilde[i], pv.install_cost[n]));
        let mut lo = inc.clone();
        lo.push((nv.alpha[i], -lim.min_panel_batch));
        m.add_constraint(format!("pv_batch_min:{tag},i={i}"), lo, Sense::Ge, 0.0);
        let mut hi = inc;
        hi.push((nv.alpha[i], -pv.max_panels));
        m.add_constraint(format!("pv_batch_max:{tag},i={i}"), hi, Sense::Le, 0.0);
    }
    if ni > 0 {
        m.add_constraint(format!("pv_single_new_tech:{tag}"), single_pv, Sense::Le, 1.0);
        m.add_constraint(format!("pv_global_cap:{tag}"), total_pv, Sense::Le, lim.max_total_panels);
    }
    for (b, bs) in inst.bess_technologies.iter().enumerate() {
        m.add_constraint(format!("bess_impulse_link:{tag},b={b}"), vec![(nv.beta[b], 1.0), (nv.xp[b], -1.0)], Sense::Le, 0.0);
        m.add_constraint(
            format!("bess_count_cap:{tag},b={b}"),
            vec![(nv.xp_tilde[b], 1.0), (nv.xp[b], -bs.max_units)],
            Sense::Le,
            0.0,
        );
        let mut inc = vec![(nv.xp_tilde[b], 1.0)];
        if let Some(pa) = parent {
            m.add_constraint(format!("bess_step_monotone:{tag},b={b}"), vec![(pa.xp[b], 1.0), (nv.xp[b], -1.0)], Sense::Le, 0.0);
            m.add_constraint(
                format!("bess_count_monotone:{tag},b={b}"),
                vec![(pa.xp_tilde[b], 1.0), (nv.xp_tilde[b], -1.0)],
                Sense::Le,
                0.0,
            );
            inc.push((pa.xp_tilde[b], -1.0));
            single_b.push((pa.xp[b], -1.0));
            budget.push((pa.xp[b], -bs.prep_cost[n]));
            budget.push((pa.xp_tilde[b], -bs.install_cost[n]));
        }
        single_b.push((nv.xp[b], 1.0));
        total_b.push((nv.xp_tilde[b], 1.0));
        budget.push((nv.xp[b], bs.prep_cost[n]));
        budget.push((nv.xp_tilde[b], bs.install_cost[n]));
        let mut lo = inc.clone();
        lo.push((nv.beta[b], -lim.min_unit_batch));
        m.add_constraint(format!("bess_batch_min:{tag},b={b}"), lo, Sense::Ge, 0.0);
        let mut hi = inc;
        hi.push((nv.beta[b], -bs.max_units));
        m.add_constraint(format!("bess_batch_max:{tag},b={b}"), hi, Sense::Le, 0.0);
    }
    if nb > 0 {
        m.add_constraint(format!("bess_single_new_tech:{tag}"), single_b, Sense::Le, 1.0);
        m.add_constraint(format!("bess_global_cap:{tag}"), total_b, Sense::Le, lim.max_total_units);
    }
    if ni + nb > 0 {
        m.add_constraint(format!("budget:{tag}"), budget, Sense::Le, lim.budget[n]);
    }

    // Operational costs.
    for s in 0..p_len {
        let wq = st.ops.probability(s);
        for t in 0..t_len {
            let c = w * days * wq * st.hours(t);
            let q = s * t_len + t;
            m.add_objective(nv.z_g[q], c * inst.grid.import_price[e - 1][s][t]);
            for (b, bs) in inst.bess_technologies.iter().enumerate() {
                m.add_objective(nv.y_plus[b][q], c * bs.op_cost);
                m.add_objective(nv.y_minus[b][q], c * bs.op_cost);
            }
            if st.is_pv(t) {
                let price = inst.grid.export_price[e - 1][s][t];
                for (i, pv) in inst.pv_technologies.iter().enumerate() {
                    let zr = nv.z_r[i][q].expect("PV period variable");
                    m.add_objective(zr, c * (pv.gen_cost[e - 1][s][t] + price));
                    m.add_objective(nv.x_tilde[i], -c * price * pv.availability[e - 1][s][t] * pv.capacity_kw);
                }
            }
        }
    }

    // PV and battery operations.
    let parent_stage_days_weight = 1.0 / days;
    let own_carry_weight = (days - 1.0) / days;
    for s in 0..p_len {
        for t in 0..t_len {
            let q = s * t_len + t;
            let h = st.hours(t);
            let pt = format!("{tag},pi={s},t={t}");
            if st.is_pv(t) {
                for (i, pv) in inst.pv_technologies.iter().enumerate() {
                    let cap = pv.availability[e - 1][s][t] * pv.capacity_kw;
                    m.add_constraint(
                        format!("pv_output_cap:{pt},i={i}"),
                        vec![(nv.z_r[i][q].expect("PV period variable"), 1.0), (nv.x_tilde[i], -cap)],
                        Sense::Le,
                        0.0,
                    );
                }
            }
            let mut bal = Vec::new();
            let mut rhs = inst.loads.base[e - 1][s][t];
            for i in 0..ni {
                if let Some(v) = nv.z_r[i][q] {
                    bal.push((v, 1.0));
                }
            }
            bal.push((nv.z_g[q], 1.0));
            for b in 0..nb {
                bal.push((nv.y_minus[b][q], 1.0));
                bal.push((nv.y_plus[b][q], -1.0));
            }
            for (j, l) in inst.loads.elastic.iter().enumerate() {
                if let Some(v) = nv.dl1[j][q] {
                    rhs += l.setpoint[e - 1][s][t];
                    bal.push((v, 1.0));
                }
            }
            for (j, l) in inst.loads.deferrable.iter().enumerate() {
                for &start in &idx.covers[j][t] {
                    let d = nv.delta[j][s * t_len + start].expect("start variable");
                    bal.push((d, -l.power[e - 1]));
                }
            }
            m.add_constraint(format!("energy_balance:{pt}"), bal, Sense::Eq, rhs);

            for (b, bs) in inst.bess_technologies.iter().enumerate() {
                let keep = 1.0 - bs.loss[e - 1];
                let bt = format!("{pt},b={b}");
                m.add_constraint(
                    format!("charge_cap:{bt}"),
                    vec![(nv.y_plus[b][q], h), (nv.xp_tilde[b], -bs.charge_depth[e - 1] * bs.unit_capacity_kwh)],
                    Sense::Le,
                    0.0,
                );
                m.add_constraint(
                    format!("storage_cap:{bt}"),
                    vec![(nv.y[b][q], 1.0), (nv.xp_tilde[b], -bs.unit_capacity_kwh)],
                    Sense::Le,
                    0.0,
                );
                let rho = bs.discharge_depth[e - 1];
                if t > 0 {
                    let prev = nv.y[b][q - 1];
                    m.add_constraint(
                        format!("discharge_cap:{bt}"),
                        vec![(nv.y_minus[b][q], h), (prev, -rho * keep)],
                        Sense::Le,
                        0.0,
                    );
                    m.add_constraint(
                        format!("storage_balance:{bt}"),
                        vec![(nv.y[b][q], 1.0), (prev, -keep), (nv.y_plus[b][q], -h), (nv.y_minus[b][q], h)],
                        Sense::Eq,
                        0.0,
                    );
                } else if let Some(pk) = sn.parent {
                    // Level entering the first period: carry-over from the
                    // parent's last periods and from this node's own days.
                    let pa = &all[pk];
                    let pst = tree.node_stage(scope.nodes[pk].source);
                    let p_keep = 1.0 - bs.loss[pst.index - 1];
                    let pt_len = pst.num_periods();
                    let mut entering = Vec::new();
                    for ps in 0..pst.num_scenarios() {
                        let v = pa.y[b][ps * pt_len + pst.last_period()];
                        entering.push((v, parent_stage_days_weight * pst.ops.probability(ps) * p_keep));
                    }
                    for os in 0..p_len {
                        let v = nv.y[b][os * t_len + st.last_period()];
                        entering.push((v, own_carry_weight * st.ops.probability(os) * keep));
                    }
                    let mut carry = vec![(nv.y[b][q], 1.0), (nv.y_plus[b][q], -h), (nv.y_minus[b][q], h)];
                    carry.extend(entering.iter().map(|&(v, a)| (v, -a)));
                    m.add_constraint(format!("storage_carryover:{bt}"), carry, Sense::Eq, 0.0);
                    let mut dis = vec![(nv.y_minus[b][q], h)];
                    dis.extend(entering.iter().map(|&(v, a)| (v, -rho * a)));
                    m.add_constraint(format!("discharge_cap:{bt}"), dis, Sense::Le, 0.0);
                } else {
                    m.add_constraint(
                        format!("storage_initial:{bt}"),
                        vec![(nv.y[b][q], 1.0), (nv.y_plus[b][q], -h)],
                        Sense::Eq,
                        0.0,
                    );
                    m.add_constraint(format!("discharge_cap:{bt}"), vec![(nv.y_minus[b][q], h)], Sense::Le, 0.0);
                }
            }
        }
    }

    // Elastic ramps.
    for (j, l) in inst.loads.elastic.iter().enumerate() {
        for s in 0..p_len {
            for t in 1..t_len {
                let q = s * t_len + t;
                let (Some(cur), Some(prev)) = (nv.dl1[j][q], nv.dl1[j][q - 1]) else {
                    continue;
                };
                let ramp = l.ramp[e - 1][t];
                let diff = l.setpoint[e - 1][s][t] - l.setpoint[e - 1][s][t - 1];
                let terms = vec![(cur, -1.0), (prev, 1.0)];
                m.add_constraint(format!("ramp_up:{tag},j={j},pi={s},t={t}"), terms.clone(), Sense::Le, ramp - diff);
                m.add_constraint(format!("ramp_down:{tag},j={j},pi={s},t={t}"), terms, Sense::Ge, -ramp - diff);
            }
        }
    }

    // Deferrable scheduling.
    for j in 0..inst.num_deferrable() {
        for s in 0..p_len {
            let terms = idx.starts[j]
                .iter()
                .map(|&t| (nv.delta[j][s * t_len + t].expect("start variable"), 1.0))
                .collect();
            m.add_constraint(format!("deferrable_start:{tag},j={j},pi={s}"), terms, Sense::Eq, 1.0);
        }
    }
    for (k, &(a, b)) in inst.loads.incompatible.iter().enumerate() {
        for s in 0..p_len {
            for &(ta, tb) in &idx.overlaps[k] {
                let da = nv.delta[a][s * t_len + ta].expect("start variable");
                let db = nv.delta[b][s * t_len + tb].expect("start variable");
                m.add_constraint(
                    format!("deferrable_incompat:{tag},h={k},pi={s},t={ta},u={tb}"),
                    vec![(da, 1.0), (db, 1.0)],
                    Sense::Le,
                    1.0,
                );
            }
        }
    }
    for (k, pr) in inst.loads.precedence.iter().enumerate() {
        for s in 0..p_len {
            for &t in &idx.starts[pr.before] {
                let mut terms = vec![(nv.delta[pr.before][s * t_len + t].expect("start variable"), 1.0)];
                for &u in &idx.precedence[k][t] {
                    terms.push((nv.delta[pr.after][s * t_len + u].expect("start variable"), -1.0));
                }
                m.add_constraint(format!("deferrable_precedence:{tag},h={k},pi={s},t={t}"), terms, Sense::Le, 0.0);
            }
        }
    }

    // Discomfort.
    if variant.has_expected_bound() {
        let scen: Vec<Vec<(VarId, f64)>> = (0..p_len).map(|s| discomfort_terms(inst, e, nv, s)).collect();
        let mut expected = Vec::new();
        for (s, terms) in scen.iter().enumerate() {
            let wp = st.ops.probability(s);
            expected.extend(terms.iter().map(|&(v, a)| (v, a * wp)));
        }
        m.add_constraint(format!("expected_discomfort:{tag}"), expected, Sense::Le, inst.discomfort.max_expected[e - 1]);
        if variant.has_dominance() {
            for (p, prof) in inst.discomfort.profiles[e - 1].iter().enumerate() {
                let mut prob = Vec::new();
                let mut exp = Vec::new();
                for s in 0..p_len {
                    let sv = nv.s[p][s];
                    let ev = nv.eta[p][s];
                    let mut ex = scen[s].clone();
                    ex.push((sv, -1.0));
                    m.add_constraint(format!("sd_excess:{tag},p={p},pi={s}"), ex, Sense::Le, prof.threshold);
                    m.add_constraint(
                        format!("sd_excess_cap:{tag},p={p},pi={s}"),
                        vec![(sv, 1.0), (ev, -prof.max_excess * prof.threshold)],
                        Sense::Le,
                        0.0,
                    );
                    let wp = st.ops.probability(s);
                    prob.push((ev, wp));
                    exp.push((sv, wp));
                }
                m.add_constraint(format!("sd_probability:{tag},p={p}"), prob, Sense::Le, prof.prob_bound);
                m.add_constraint(
                    format!("sd_expected_excess:{tag},p={p}"),
                    exp,
                    Sense::Le,
                    prof.expected_excess * prof.threshold,
                );
            }
        }
    }
}

/// Linear terms of the daily discomfort of operational scenario `s`.
fn discomfort_terms(inst: &Instance, e: usize, nv: &NodeVars, s: usize) -> Vec<(VarId, f64)> {
    let st = inst.tree.stage(e);
    let t_len = st.num_periods();
    let mut terms = Vec::new();
    for (j, l) in inst.loads.elastic.iter().enumerate() {
        for t in 0..t_len {
            if let Some(v) = nv.dl1[j][s * t_len + t] {
                terms.push((v, st.hours(t) * l.discomfort[e - 1][t]));
            }
        }
    }
    for (j, l) in inst.loads.deferrable.iter().enumerate() {
        for t in 0..t_len {
            if let Some(v) = nv.delta[j][s * t_len + t] {
                terms.push((v, l.discomfort[e - 1][t]));
            }
        }
    }
    terms
}

/// Builds and solves the full model.
pub fn solve_monolithic(
    instance: &Instance,
    variant: Variant,
    controls: &SolverControls,
) -> Result<(Solution, SolveOutcome), ModelError> {
    let built = build_model(instance, variant, &Scope::full(&instance.tree), &Fixings::new())?;
    let outcome = milp::solve(&built.milp, controls)?;
    if !outcome.status.has_solution() {
        return Err(ModelError::Status {
            context: "monolithic model".into(),
            status: outcome.status,
        });
    }
    let sol = built.solution(instance, &outcome)?;
    Ok((sol, outcome))
}
