//! Lower bounds from scenario decomposition and expected-value models, and
//! the value of the strategic decision.

mod ev;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::instance::Instance;
use crate::milp::{self, SolveStatus, SolverControls};
use crate::model::{build_model, FixLevel, Fixings, ModelError, Scope, Solution, Variant};
use crate::tree::{NodeId, ScenarioBundle, TreeError};

pub use ev::{collapse_all, collapse_operations};

pub const BOUND_SCHEMA: &str = "mhres-bound/1";

/// Message reported when the expected-value design cannot be completed
/// under the full tree.
pub const EV_INFEASIBLE: &str = "EV design infeasible under uncertainty";

#[derive(Debug, thiserror::Error)]
pub enum BoundError {
    #[error("{0}")]
    Params(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("subproblem {id} (scenarios {scenarios:?}): {source}")]
    Subproblem {
        id: usize,
        scenarios: Vec<usize>,
        #[source]
        source: ModelError,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Mhev,
    Mhoev,
    Sws,
    Smg,
    Smc,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Mhev => "mhev",
            Scheme::Mhoev => "mhoev",
            Scheme::Sws => "sws",
            Scheme::Smg => "smg",
            Scheme::Smc => "smc",
        })
    }
}

impl std::str::FromStr for Scheme {
    type Err = BoundError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mhev" => Ok(Scheme::Mhev),
            "mhoev" => Ok(Scheme::Mhoev),
            "sws" => Ok(Scheme::Sws),
            "smg" => Ok(Scheme::Smg),
            "smc" => Ok(Scheme::Smc),
            _ => Err(BoundError::Params(format!("unknown bound scheme {s:?}"))),
        }
    }
}

/// One solved piece of a decomposition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubproblemBound {
    pub id: usize,
    /// Stage-`e*+1` node heading the cluster, for SMC.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub anchor: Option<NodeId>,
    pub scenarios: Vec<usize>,
    /// Combination weight (`W_g`, `W̄_c` or `w^ω`).
    pub weight: f64,
    /// Best bound of the subproblem; this is what enters the combination.
    pub bound: f64,
    /// Incumbent objective of the subproblem.
    pub objective: f64,
    pub status: SolveStatus,
    /// Relative gap between incumbent and best bound.
    pub gap: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub time: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub schema: String,
    pub instance: String,
    pub variant: Variant,
    pub scheme: Scheme,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub groups: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub e_star: Option<usize>,
    /// Weight-combined value `Σ W z`.
    pub value: f64,
    pub subproblems: Vec<SubproblemBound>,
    /// Wall time; left out of the JSON unless requested so that reports are
    /// reproducible byte for byte.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_time: Option<f64>,
}

impl BoundReport {
    fn new(instance: &Instance, variant: Variant, scheme: Scheme, subproblems: Vec<SubproblemBound>) -> Self {
        let value = subproblems.iter().map(|s| s.weight * s.bound).sum();
        Self {
            schema: BOUND_SCHEMA.into(),
            instance: instance.meta.name.clone(),
            variant,
            scheme,
            groups: None,
            seed: None,
            e_star: None,
            value,
            subproblems,
            wall_time: None,
        }
    }

    /// Sum of the combination weights.
    pub fn total_weight(&self) -> f64 {
        self.subproblems.iter().map(|s| s.weight).sum()
    }

    /// Drops every timing so the report is reproducible.
    pub fn without_timings(mut self) -> Self {
        self.wall_time = None;
        for s in &mut self.subproblems {
            s.time = None;
        }
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bound reports serialize")
    }
}

/// Options shared by all schemes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundOptions {
    pub controls: SolverControls,
    pub jobs: usize,
    /// Keep wall times in the report.
    pub timings: bool,
}

impl Default for BoundOptions {
    fn default() -> Self {
        Self {
            controls: SolverControls::default(),
            jobs: 1,
            timings: false,
        }
    }
}

fn relative_gap(objective: f64, bound: f64) -> f64 {
    if objective == bound {
        0.0
    } else {
        (objective - bound).abs() / objective.abs().max(1e-10)
    }
}

fn solve_bundle(
    instance: &Instance,
    variant: Variant,
    bundle: &ScenarioBundle,
    opts: &BoundOptions,
) -> Result<SubproblemBound, BoundError> {
    let wrap = |source: ModelError| BoundError::Subproblem {
        id: bundle.id,
        scenarios: bundle.scenarios.clone(),
        source,
    };
    let start = Instant::now();
    let scope = Scope::bundle(&instance.tree, bundle);
    let built = build_model(instance, variant, &scope, &Fixings::new()).map_err(wrap)?;
    let outcome = milp::solve(&built.milp, &opts.controls).map_err(|e| wrap(e.into()))?;
    let objective = match (outcome.status.has_solution(), outcome.objective) {
        (true, Some(z)) => z,
        _ => {
            return Err(wrap(ModelError::Status {
                context: "bound subproblem".into(),
                status: outcome.status,
            }))
        }
    };
    let bound = outcome.best_bound.unwrap_or(objective).min(objective);
    log::debug!("bundle {} ({} scenarios): bound {bound}, incumbent {objective}", bundle.id, bundle.scenarios.len());
    Ok(SubproblemBound {
        id: bundle.id,
        anchor: bundle.anchor,
        scenarios: bundle.scenarios.clone(),
        weight: bundle.weight,
        bound,
        objective,
        status: outcome.status,
        gap: relative_gap(objective, bound),
        time: opts.timings.then(|| start.elapsed().as_secs_f64()),
    })
}

/// Solves every bundle and combines their best bounds in canonical order
/// (by first scenario), so equal partitions give bit-identical values.
fn decomposition(
    instance: &Instance,
    variant: Variant,
    scheme: Scheme,
    mut bundles: Vec<ScenarioBundle>,
    opts: &BoundOptions,
) -> Result<BoundReport, BoundError> {
    let start = Instant::now();
    bundles.sort_by_key(|b| b.scenarios[0]);
    let rows = crate::pool::parallel_map(opts.jobs, &bundles, |_, b| solve_bundle(instance, variant, b, opts))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let mut report = BoundReport::new(instance, variant, scheme, rows);
    report.wall_time = opts.timings.then(|| start.elapsed().as_secs_f64());
    Ok(report)
}

/// Wait-and-see bound: one subproblem per strategic scenario.
pub fn bound_sws(instance: &Instance, variant: Variant, opts: &BoundOptions) -> Result<BoundReport, BoundError> {
    let tree = &instance.tree;
    let bundles = (0..tree.num_scenarios()).map(|s| tree.scenario_bundle(s)).collect();
    decomposition(instance, variant, Scheme::Sws, bundles, opts)
}

/// Scenario-group bound with `g` seeded groups.
pub fn bound_smg(
    instance: &Instance,
    variant: Variant,
    g: usize,
    seed: u64,
    opts: &BoundOptions,
) -> Result<BoundReport, BoundError> {
    let bundles = instance.tree.scenario_group_partition(g, seed)?;
    let mut r = decomposition(instance, variant, Scheme::Smg, bundles, opts)?;
    r.groups = Some(g);
    r.seed = Some(seed);
    Ok(r)
}

/// Scenario-cluster bound with breaking stage `e_star`.
pub fn bound_smc(
    instance: &Instance,
    variant: Variant,
    e_star: usize,
    opts: &BoundOptions,
) -> Result<BoundReport, BoundError> {
    let bundles = instance.tree.scenario_cluster_partition(e_star)?;
    let mut r = decomposition(instance, variant, Scheme::Smc, bundles, opts)?;
    r.e_star = Some(e_star);
    Ok(r)
}

fn reject_dominance(variant: Variant, scheme: Scheme) -> Result<(), BoundError> {
    if variant.has_dominance() {
        return Err(BoundError::Params(format!(
            "{scheme} is defined for the nod and rn variants only"
        )));
    }
    Ok(())
}

fn single_solve(
    original: &Instance,
    collapsed: &Instance,
    variant: Variant,
    scheme: Scheme,
    opts: &BoundOptions,
) -> Result<BoundReport, BoundError> {
    let tree = &collapsed.tree;
    let bundle = ScenarioBundle {
        id: 0,
        anchor: None,
        scenarios: (0..tree.num_scenarios()).collect(),
        weight: 1.0,
        scenario_weights: tree.scenarios().iter().map(|s| s.weight).collect(),
        nodes: (0..tree.num_nodes()).collect(),
        node_weights: tree.nodes().iter().map(|n| n.weight).collect(),
    };
    let start = Instant::now();
    let row = solve_bundle(collapsed, variant, &bundle, opts)?;
    let mut r = BoundReport::new(original, variant, scheme, vec![row]);
    r.wall_time = opts.timings.then(|| start.elapsed().as_secs_f64());
    Ok(r)
}

/// Expected-value bound: one strategic node and one operational scenario per
/// stage. A heuristic bound; MILP expected-value models carry no general
/// guarantee.
pub fn bound_mhev(instance: &Instance, variant: Variant, opts: &BoundOptions) -> Result<BoundReport, BoundError> {
    reject_dominance(variant, Scheme::Mhev)?;
    single_solve(instance, &collapse_all(instance), variant, Scheme::Mhev, opts)
}

/// Operational expected-value bound: full strategic tree, one operational
/// scenario per stage.
pub fn bound_mhoev(instance: &Instance, variant: Variant, opts: &BoundOptions) -> Result<BoundReport, BoundError> {
    reject_dominance(variant, Scheme::Mhoev)?;
    single_solve(instance, &collapse_operations(instance), variant, Scheme::Mhoev, opts)
}

/// Parameters of one bound computation, as named on the command line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundRequest {
    pub scheme: Scheme,
    #[serde(default)]
    pub groups: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub e_star: Option<usize>,
}

pub fn compute_bound(
    instance: &Instance,
    variant: Variant,
    req: &BoundRequest,
    opts: &BoundOptions,
) -> Result<BoundReport, BoundError> {
    let need = |v: Option<usize>, what: &str| {
        v.ok_or_else(|| BoundError::Params(format!("{} needs {what}", req.scheme)))
    };
    match req.scheme {
        Scheme::Mhev => bound_mhev(instance, variant, opts),
        Scheme::Mhoev => bound_mhoev(instance, variant, opts),
        Scheme::Sws => bound_sws(instance, variant, opts),
        Scheme::Smg => bound_smg(instance, variant, need(req.groups, "a group count")?, req.seed.unwrap_or(0), opts),
        Scheme::Smc => bound_smc(instance, variant, need(req.e_star, "a breaking stage")?, opts),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VsdReport {
    pub instance: String,
    pub variant: Variant,
    /// Variant used for the expected-value solve.
    pub ev_variant: Variant,
    pub ev_objective: f64,
    pub feasible_cost: f64,
    /// Cost of the expected-value design re-optimized on the full tree.
    pub z_s_mhev: Option<f64>,
    pub vsd: Option<f64>,
    pub gr: Option<f64>,
    /// Set when the expected-value design cannot be completed.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub finding: Option<String>,
}

/// Value of the strategic decision against `feasible`: solves the
/// expected-value model (risk-neutral when `variant` is SD), imposes its
/// stage-`e` investments on every stage-`e` node, and re-optimizes the rest of
/// the full model of `variant`.
pub fn vsd(
    instance: &Instance,
    variant: Variant,
    feasible: &Solution,
    controls: &SolverControls,
) -> Result<VsdReport, BoundError> {
    let ev_variant = if variant.has_dominance() { Variant::RN } else { variant };
    let ev = collapse_all(instance);
    let (ev_sol, _) = crate::model::solve_monolithic(&ev, ev_variant, controls)?;
    let tree = &instance.tree;
    let mut fixings = Fixings::new();
    for n in tree.nodes() {
        fixings.fix(n.id, ev_sol.nodes[n.stage - 1].clone(), FixLevel::Strategic);
    }
    let feasible_cost = feasible.objective;
    let mut report = VsdReport {
        instance: instance.meta.name.clone(),
        variant,
        ev_variant,
        ev_objective: ev_sol.objective,
        feasible_cost,
        z_s_mhev: None,
        vsd: None,
        gr: None,
        finding: None,
    };
    let built = match build_model(instance, variant, &Scope::full(tree), &fixings) {
        Ok(b) => b,
        Err(ModelError::Fixing(_)) => {
            report.finding = Some(EV_INFEASIBLE.into());
            return Ok(report);
        }
        Err(e) => return Err(e.into()),
    };
    let outcome = milp::solve(&built.milp, controls).map_err(ModelError::from)?;
    match outcome.status {
        s if s.has_solution() => {
            let z = built.solution(instance, &outcome)?.objective;
            report.z_s_mhev = Some(z);
            report.vsd = Some(z - feasible_cost);
            report.gr = Some(feasible_cost / z);
        }
        SolveStatus::Infeasible => report.finding = Some(EV_INFEASIBLE.into()),
        status => {
            return Err(ModelError::Status {
                context: "expected-value design".into(),
                status,
            }
            .into())
        }
    }
    Ok(report)
}
