//! Invariants checked over randomly shaped trees, profiles and instances.

mod support;

use std::collections::BTreeSet;

use mhres::model::{check_feasibility, evaluate_cost, Variant};
use mhres::scengen::{representative_days, synthetic_instance, Size};
use mhres::tree::{MultiHorizonTree, OperationalSubtree, Stage};
use mhres::{solve_monolithic, SolverControls};
use proptest::prelude::*;
use support::*;

/// Tree with the given branching per stage transition and raw sibling
/// weights drawn from `raw`, normalized as on load.
fn random_tree(branching: &[usize], raw: &[f64], op_probs: &[f64]) -> MultiHorizonTree {
    let stages: Vec<Stage> = (1..=branching.len() + 1)
        .map(|e| Stage {
            index: e,
            days: 30,
            ops: OperationalSubtree::fan(op_probs.to_vec(), 24),
            periods: hourly_day(24),
        })
        .collect();
    let mut specs = vec![(0, 1, None, 1.0)];
    let mut frontier = vec![0];
    for (k, &b) in branching.iter().enumerate() {
        let mut next = Vec::new();
        for &p in &frontier {
            for _ in 0..b {
                let id = specs.len();
                specs.push((id, k + 2, Some(p), raw[id % raw.len()]));
                next.push(id);
            }
        }
        frontier = next;
    }
    MultiHorizonTree::new(stages, specs).expect("generated tree is well-formed").normalized()
}

fn tree_strategy() -> impl Strategy<Value = MultiHorizonTree> {
    (
        prop::collection::vec(1usize..=3, 1..=3),
        prop::collection::vec(0.05f64..1.0, 1..=8),
        prop::collection::vec(0.05f64..1.0, 1..=4),
    )
        .prop_map(|(b, raw, ops)| random_tree(&b, &raw, &ops))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weights_are_conserved(tree in tree_strategy()) {
        prop_assert!(tree.validate().is_empty());
        for node in tree.nodes() {
            if !node.children.is_empty() {
                let sum: f64 = node.children.iter().map(|&c| tree.node(c).weight).sum();
                prop_assert!((sum - node.weight).abs() <= 1e-12);
            }
        }
        for e in 1..=tree.num_stages() {
            let sum: f64 = tree.stage_nodes(e).iter().map(|&n| tree.node(n).weight).sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
            let ops: f64 = tree.stage(e).ops.probabilities().iter().sum();
            prop_assert!((ops - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn normalizing_twice_changes_nothing(tree in tree_strategy()) {
        prop_assert_eq!(tree.normalized(), tree);
    }

    #[test]
    fn successors_are_the_descendants(tree in tree_strategy()) {
        for node in tree.nodes() {
            let got: BTreeSet<usize> = tree.successors(node.id).unwrap().into_iter().collect();
            let mut expected = BTreeSet::new();
            for other in tree.nodes() {
                let mut k = other.parent;
                while let Some(p) = k {
                    if p == node.id {
                        expected.insert(other.id);
                    }
                    k = tree.node(p).parent;
                }
            }
            prop_assert_eq!(got, expected);
        }
    }

    #[test]
    fn groups_partition_the_scenarios(tree in tree_strategy(), g_pick in 0usize..100, seed in 0u64..1000) {
        let omega = tree.num_scenarios();
        let g = 1 + g_pick % omega;
        let groups = tree.scenario_group_partition(g, seed).unwrap();
        let mut seen: Vec<usize> = groups.iter().flat_map(|b| b.scenarios.clone()).collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..omega).collect::<Vec<_>>());
        let sizes: Vec<usize> = groups.iter().map(|b| b.scenarios.len()).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        let total: f64 = groups.iter().map(|b| b.weight).sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        for b in &groups {
            let scen: f64 = b.scenario_weights.iter().sum();
            prop_assert!((scen - 1.0).abs() <= 1e-12);
            for e in 1..=tree.num_stages() {
                let per_stage: f64 = b
                    .nodes
                    .iter()
                    .zip(&b.node_weights)
                    .filter(|(&n, _)| tree.node(n).stage == e)
                    .map(|(_, &w)| w)
                    .sum();
                prop_assert!((per_stage - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn clusters_partition_the_scenarios(tree in tree_strategy()) {
        let e_max = tree.num_stages();
        for e_star in 1..e_max {
            let clusters = tree.scenario_cluster_partition(e_star).unwrap();
            let mut seen: Vec<usize> = clusters.iter().flat_map(|b| b.scenarios.clone()).collect();
            seen.sort_unstable();
            prop_assert_eq!(seen, (0..tree.num_scenarios()).collect::<Vec<_>>());
            let total: f64 = clusters.iter().map(|b| b.weight).sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
        }
        let last: BTreeSet<Vec<usize>> = tree
            .scenario_cluster_partition(e_max - 1)
            .unwrap()
            .into_iter()
            .map(|b| b.scenarios)
            .collect();
        let singletons: BTreeSet<Vec<usize>> = tree
            .scenario_group_partition(tree.num_scenarios(), 0)
            .unwrap()
            .into_iter()
            .map(|b| b.scenarios)
            .collect();
        prop_assert_eq!(last, singletons);
    }

    #[test]
    fn representative_days_are_cluster_shares(
        days in prop::collection::vec(prop::collection::vec(0.0f64..10.0, 4), 2..=16),
        k_pick in 0usize..100,
        seed in 0u64..100,
    ) {
        let k = 1 + k_pick % days.len();
        let c = representative_days(&days, k, seed).unwrap();
        prop_assert_eq!(c.days.len(), k);
        let total: f64 = c.days.iter().map(|d| d.probability).sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        let mut members = Vec::new();
        for d in &c.days {
            prop_assert_eq!(d.probability, d.members.len() as f64 / days.len() as f64);
            prop_assert!(d.members.contains(&d.index));
            prop_assert_eq!(&d.profile, &days[d.index]);
            members.extend(d.members.iter().copied());
        }
        members.sort_unstable();
        prop_assert_eq!(members, (0..days.len()).collect::<Vec<_>>());
        for w in c.objective_trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_instances_validate(
        stages in 2usize..=4,
        branching in 1usize..=3,
        scenarios in 1usize..=4,
        periods in 1usize..=24,
        elastic in 0usize..=3,
        deferrable in 0usize..=3,
        seed in 0u64..1000,
    ) {
        let size: Size = format!(
            "custom:stages={stages},branching={branching},scenarios={scenarios},periods={periods},pv=2,bess=1,elastic={elastic},deferrable={deferrable},incompatible=1,precedence=1"
        )
        .parse()
        .unwrap();
        let inst = synthetic_instance(&size, seed).unwrap();
        prop_assert!(inst.tree.validate().is_empty());
        prop_assert!(inst.check_invariants().is_empty());
        prop_assert!(inst.check_coverage().is_ok());
        for j in 0..inst.num_deferrable() {
            for e in 1..=stages {
                let st = inst.tree.stage(e);
                for &t in &inst.feasible_starts(j, e) {
                    for s in 0..st.num_scenarios() {
                        let q = st.ops.node(s, t).unwrap();
                        prop_assert!(inst.supply_window_set(j, e, q).contains(&q));
                    }
                }
            }
        }
    }

    #[test]
    fn required_periods_are_monotone(hours in prop::collection::vec(1u32..=4, 2..=8), bump in 0usize..8, need in 1u32..=6) {
        let periods = |hours: &[u32], need: u32| -> Vec<Option<usize>> {
            let inst = day_instance(hours, &[(need, vec![0])]);
            (0..hours.len()).map(|s| inst.derive_m2(0, 1, s).ok()).collect()
        };
        let base = periods(&hours, need);
        let mut longer = hours.clone();
        longer[bump % hours.len()] += 1;
        for (a, b) in base.iter().zip(periods(&longer, need)) {
            if let (Some(a), Some(b)) = (a, b) {
                prop_assert!(b <= *a);
            }
        }
        for (a, b) in base.iter().zip(periods(&hours, need + 1)) {
            if let (Some(a), Some(b)) = (a, b) {
                prop_assert!(b >= *a);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn solved_micro_instances_audit_and_match_their_cost(shape in 0usize..MICRO_SHAPES.len(), seed in 0u64..500, v in 0usize..3) {
        let inst = micro_instance(MICRO_SHAPES[shape], seed);
        let variant = Variant::ALL[v];
        let (sol, out) = solve_monolithic(&inst, variant, &SolverControls::default()).unwrap();
        prop_assert!(check_feasibility(&inst, variant, &sol).passed());
        prop_assert!(rel_close(evaluate_cost(&inst, &sol).total, out.objective.unwrap(), 1e-6));
    }
}
