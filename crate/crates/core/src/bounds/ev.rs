//! Expected-value collapses of an instance.

use crate::instance::{Instance, OpParam};
use crate::tree::{MultiHorizonTree, OperationalSubtree, Stage};

/// Probability-weighted mean over the operational scenarios of every stage.
fn collapse_op(tree: &MultiHorizonTree, v: &OpParam) -> OpParam {
    tree.stages()
        .iter()
        .map(|st| {
            let mean = (0..st.num_periods())
                .map(|t| (0..st.num_scenarios()).map(|p| st.ops.probability(p) * v[st.index - 1][p][t]).sum())
                .collect();
            vec![mean]
        })
        .collect()
}

/// Replaces every operational fan by a single scenario carrying expected
/// values; the strategic tree is kept.
pub fn collapse_operations(inst: &Instance) -> Instance {
    let tree = &inst.tree;
    let mut out = inst.clone();
    for pv in &mut out.pv_technologies {
        pv.gen_cost = collapse_op(tree, &pv.gen_cost);
        pv.availability = collapse_op(tree, &pv.availability);
    }
    out.loads.base = collapse_op(tree, &inst.loads.base);
    for l in &mut out.loads.elastic {
        l.setpoint = collapse_op(tree, &l.setpoint);
    }
    out.grid.import_price = collapse_op(tree, &inst.grid.import_price);
    out.grid.export_price = collapse_op(tree, &inst.grid.export_price);
    let mut t = tree.clone();
    for st in tree.stages() {
        t = t.with_stage_ops(st.index, OperationalSubtree::fan(vec![1.0], st.num_periods()));
    }
    out.tree = t;
    out.meta.name = format!("{}-operational-ev", inst.meta.name);
    out
}

/// Stage-weighted mean of a per-node vector, one value per stage.
fn stage_means(tree: &MultiHorizonTree, v: &[f64]) -> Vec<f64> {
    (1..=tree.num_stages())
        .map(|e| {
            let nodes = tree.stage_nodes(e);
            let total: f64 = nodes.iter().map(|&n| tree.node(n).weight).sum();
            nodes.iter().map(|&n| tree.node(n).weight * v[n]).sum::<f64>() / total
        })
        .collect()
}

/// Collapses both levels: one strategic node per stage with stage-weighted
/// expected costs, budgets and residual values, and one operational
/// scenario per stage.
pub fn collapse_all(inst: &Instance) -> Instance {
    let ops = collapse_operations(inst);
    let tree = &ops.tree;
    let stages: Vec<Stage> = tree.stages().to_vec();
    let specs = (0..stages.len()).map(|k| (k, k + 1, k.checked_sub(1), 1.0)).collect();
    let chain = MultiHorizonTree::new(stages, specs).expect("a chain over valid stages is well-formed");
    let mut out = ops.clone();
    // Residual values only count at leaves, so the last stage averages over
    // the original leaves.
    for (pv, src) in out.pv_technologies.iter_mut().zip(&ops.pv_technologies) {
        pv.prep_cost = stage_means(tree, &src.prep_cost);
        pv.install_cost = stage_means(tree, &src.install_cost);
        pv.maint_cost = stage_means(tree, &src.maint_cost);
        pv.residual_value = stage_means(tree, &src.residual_value);
    }
    for (bs, src) in out.bess_technologies.iter_mut().zip(&ops.bess_technologies) {
        bs.prep_cost = stage_means(tree, &src.prep_cost);
        bs.install_cost = stage_means(tree, &src.install_cost);
        bs.maint_cost = stage_means(tree, &src.maint_cost);
        bs.residual_value = stage_means(tree, &src.residual_value);
    }
    out.limits.budget = stage_means(tree, &ops.limits.budget);
    out.tree = chain;
    out.meta.name = format!("{}-ev", inst.meta.name);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_equiprobable_branches_average_to_the_base_cost() {
        use crate::tree::Period;
        let day = vec![Period { hours: 24, pv: true }];
        let tree = MultiHorizonTree::balanced(vec![(1, day.clone(), vec![1.0]), (1, day, vec![1.0])], 2);
        let c = 100.0;
        let means = stage_means(&tree, &[c, 0.8 * c, 1.2 * c]);
        assert_eq!(means[0], c);
        assert!((means[1] - c).abs() < 1e-12);
    }
}
