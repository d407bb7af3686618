//! Shrinking rolling horizon: a sequence of two-stage problems, one per
//! stage, in which the later stages are solved scenario by scenario.

use super::{run_batches, HeuristicError, HeuristicRun, Subproblem};
use crate::instance::Instance;
use crate::milp::SolverControls;
use crate::model::{Scope, ScopeNode, Variant};
use crate::tree::{MultiHorizonTree, NodeId};

/// Scope rooted at `r`: the frozen parent of `r` (if any), `r` itself, and
/// for every strategic scenario through `r` a private copy of its remaining
/// path weighted by the scenario's conditional probability. When
/// `fix_leaves`, the leaf copies are fixed together with `r`.
pub(crate) fn srh_scope(tree: &MultiHorizonTree, r: NodeId, iteration: usize, fix_leaves: bool) -> Subproblem {
    let mut nodes = Vec::new();
    let root_parent = tree.node(r).parent.map(|a| {
        nodes.push(ScopeNode {
            source: a,
            parent: None,
            weight: 0.0,
            frozen: true,
        });
        0
    });
    let root_k = nodes.len();
    nodes.push(ScopeNode {
        source: r,
        parent: root_parent,
        weight: 1.0,
        frozen: false,
    });
    let mut fix = vec![root_k];
    let stage = tree.node(r).stage;
    let wr = tree.node(r).weight;
    for &w in tree.scenarios_through(r) {
        let sc = &tree.scenarios()[w];
        let mut parent = root_k;
        for &n in &sc.path[stage..] {
            let k = nodes.len();
            nodes.push(ScopeNode {
                source: n,
                parent: Some(parent),
                weight: sc.weight / wr,
                frozen: false,
            });
            if fix_leaves && tree.is_leaf(n) {
                fix.push(k);
            }
            parent = k;
        }
    }
    Subproblem {
        iteration,
        root: r,
        scope: Scope { nodes },
        fix,
    }
}

pub fn srh(instance: &Instance, variant: Variant, controls: &SolverControls, jobs: usize) -> Result<HeuristicRun, HeuristicError> {
    let tree = &instance.tree;
    let e_max = tree.num_stages();
    let last = e_max.saturating_sub(1).max(1);
    let mut e = 0;
    run_batches(instance, variant, controls, jobs, |_| {
        e += 1;
        if e > last {
            return Ok(None);
        }
        let batch = tree
            .stage_nodes(e)
            .iter()
            .map(|&r| srh_scope(tree, r, e, e == last))
            .collect();
        Ok(Some(batch))
    })
}
