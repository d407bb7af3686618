//! Matheuristics producing feasible solutions of the full model by solving
//! sequences of subproblems over parts of the strategic tree.

mod sfr3;
mod srh;

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::instance::Instance;
use crate::milp::{self, SolveStatus, SolverControls};
use crate::model::{build_model, FixLevel, Fixings, ModelError, NodeValues, Scope, Variant};
use crate::tree::NodeId;

pub use sfr3::{relaxed_scope, sfr3, Sfr3Params, Sfr3Scope};
pub use srh::srh;

#[derive(Debug, thiserror::Error)]
pub enum HeuristicError {
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("subproblem at iteration {iteration}, root node {root}: {source}")]
    Subproblem {
        iteration: usize,
        root: NodeId,
        #[source]
        source: ModelError,
    },
}

/// One solved subproblem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Iteration index (κ for SFR3, stage for SRH).
    pub iteration: usize,
    /// Root node of the subproblem.
    pub root: NodeId,
    /// Scope nodes carrying variables to optimize.
    pub nodes: usize,
    pub vars: usize,
    pub constraints: usize,
    pub status: SolveStatus,
    pub objective: f64,
    pub time: f64,
}

#[derive(Clone, Debug)]
pub struct HeuristicRun {
    pub solution: crate::model::Solution,
    pub log: Vec<IterationRecord>,
    pub wall_time: f64,
}

/// Writes the iteration log as CSV. Timings are included.
pub fn write_iteration_log(log: &[IterationRecord], out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "root", "nodes", "vars", "constraints", "status", "objective", "time"])?;
    for r in log {
        w.write_record([
            r.iteration.to_string(),
            r.root.to_string(),
            r.nodes.to_string(),
            r.vars.to_string(),
            r.constraints.to_string(),
            r.status.to_string(),
            format!("{}", r.objective),
            format!("{:.6}", r.time),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Subproblem ready to be solved: the scope, the nodes to fix afterwards.
pub(crate) struct Subproblem {
    pub iteration: usize,
    pub root: NodeId,
    pub scope: Scope,
    /// Scope indices whose values become permanent after the solve.
    pub fix: Vec<usize>,
}

/// Solves one subproblem against the current fixings and returns the values
/// of the nodes to fix.
pub(crate) fn solve_subproblem(
    instance: &Instance,
    variant: Variant,
    sub: &Subproblem,
    fixings: &Fixings,
    controls: &SolverControls,
) -> Result<(Vec<(NodeId, NodeValues)>, IterationRecord), HeuristicError> {
    let wrap = |source: ModelError| HeuristicError::Subproblem {
        iteration: sub.iteration,
        root: sub.root,
        source,
    };
    let start = Instant::now();
    let built = build_model(instance, variant, &sub.scope, fixings).map_err(wrap)?;
    let outcome = milp::solve(&built.milp, controls).map_err(|e| wrap(e.into()))?;
    if !outcome.status.has_solution() {
        return Err(wrap(ModelError::Status {
            context: "subproblem".into(),
            status: outcome.status,
        }));
    }
    let stats = built.stats();
    let values = sub
        .fix
        .iter()
        .map(|&k| (sub.scope.nodes[k].source, built.node_values(instance, k, &outcome.values)))
        .collect();
    let record = IterationRecord {
        iteration: sub.iteration,
        root: sub.root,
        nodes: sub.scope.nodes.iter().filter(|s| !s.frozen).count(),
        vars: stats.variables,
        constraints: stats.constraints,
        status: outcome.status,
        objective: outcome.objective.unwrap_or(f64::NAN),
        time: start.elapsed().as_secs_f64(),
    };
    Ok((values, record))
}

/// Runs subproblem batches in order; subproblems within a batch are
/// independent and may run on `jobs` threads.
pub(crate) fn run_batches(
    instance: &Instance,
    variant: Variant,
    controls: &SolverControls,
    jobs: usize,
    mut next_batch: impl FnMut(&Fixings) -> Result<Option<Vec<Subproblem>>, HeuristicError>,
) -> Result<HeuristicRun, HeuristicError> {
    let start = Instant::now();
    let mut fixings = Fixings::new();
    let mut log = Vec::new();
    while let Some(batch) = next_batch(&fixings)? {
        let results = crate::pool::parallel_map(jobs, &batch, |_, sub| {
            solve_subproblem(instance, variant, sub, &fixings, controls)
        });
        for r in results {
            let (values, record) = r?;
            log::debug!(
                "iteration {} root {}: {} nodes, objective {}, {:.3}s",
                record.iteration,
                record.root,
                record.nodes,
                record.objective,
                record.time
            );
            for (n, v) in values {
                fixings.fix(n, v, FixLevel::All);
            }
            log.push(record);
        }
    }
    let n = instance.tree.num_nodes();
    let mut nodes = Vec::with_capacity(n);
    for id in 0..n {
        let (v, _) = fixings
            .nodes
            .remove(&id)
            .ok_or_else(|| HeuristicError::Params(format!("node {id} was never fixed")))?;
        nodes.push(v);
    }
    Ok(HeuristicRun {
        solution: crate::model::Solution::assembled(instance, variant, nodes),
        log,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// One method's result on an instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodRun {
    pub method: String,
    pub instance: String,
    pub variant: Variant,
    pub objective: f64,
    pub time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: String,
    pub objective: f64,
    pub time: f64,
    /// `(z - bound) / |z|` when a bound is given.
    pub gap: Option<f64>,
    /// Goodness ratio `z / z_reference`.
    pub gr: f64,
    /// Time ratio `t / t_reference`.
    pub tr: f64,
}

/// Gaps against `bound` and ratios against the run named `reference`.
pub fn compare(runs: &[MethodRun], reference: &str, bound: Option<f64>) -> Result<Vec<ComparisonRow>, HeuristicError> {
    let Some(first) = runs.first() else {
        return Ok(Vec::new());
    };
    if let Some(r) = runs.iter().find(|r| r.instance != first.instance || r.variant != first.variant) {
        return Err(HeuristicError::Params(format!(
            "run {} is on {}/{} but {} is on {}/{}",
            r.method, r.instance, r.variant, first.method, first.instance, first.variant
        )));
    }
    let base = runs
        .iter()
        .find(|r| r.method == reference)
        .ok_or_else(|| HeuristicError::Params(format!("no run named {reference:?}")))?;
    Ok(runs
        .iter()
        .map(|r| ComparisonRow {
            method: r.method.clone(),
            objective: r.objective,
            time: r.time,
            gap: bound.map(|b| (r.objective - b) / r.objective.abs().max(f64::MIN_POSITIVE)),
            gr: r.objective / base.objective,
            tr: r.time / base.time,
        })
        .collect())
}
