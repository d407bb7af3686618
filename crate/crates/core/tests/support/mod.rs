//! Independent oracles and instance builders shared by the integration tests.

#![allow(dead_code)]

use mhres::milp::{self, AbstractMilp, Sense, VarKind};
use mhres::model::NodeValues;
use mhres::scengen::{synthetic_instance, Size};
use mhres::tree::NodeId;
use mhres::{Instance, SolveStatus, SolverControls};

/// Relative tolerance pinned for optimum comparisons.
pub const REL_TOL: f64 = 1e-6;

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Result of exhaustive enumeration over the integer variables of a model.
#[derive(Debug)]
pub struct Enumeration {
    pub optimum: Option<f64>,
    /// Complete integer assignments whose residual LP was solved.
    pub leaves: usize,
}

struct Enumerator<'a> {
    model: &'a AbstractMilp,
    ints: Vec<usize>,
    rows_of: Vec<Vec<usize>>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    best: Option<f64>,
    leaves: usize,
    max_leaves: usize,
}

impl Enumerator<'_> {
    /// A row is hopeless when its activity range over the current boxes
    /// cannot reach the right-hand side. Pruning on it never drops a feasible
    /// assignment.
    fn row_possible(&self, r: usize) -> bool {
        let c = &self.model.constraints[r];
        let (mut lo, mut hi) = (0.0, 0.0);
        for &(v, a) in &c.terms {
            let (l, u) = (self.lb[v], self.ub[v]);
            if a > 0.0 {
                lo += a * l;
                hi += a * u;
            } else {
                lo += a * u;
                hi += a * l;
            }
        }
        let slack = 1e-7 * (1.0 + c.rhs.abs());
        match c.sense {
            Sense::Le => lo <= c.rhs + slack,
            Sense::Ge => hi >= c.rhs - slack,
            Sense::Eq => lo <= c.rhs + slack && hi >= c.rhs - slack,
        }
    }

    fn leaf(&mut self) {
        self.leaves += 1;
        assert!(self.leaves <= self.max_leaves, "enumeration exceeded {} leaves", self.max_leaves);
        let mut lp = self.model.clone();
        for &v in &self.ints {
            lp.vars[v].kind = VarKind::Continuous;
            lp.vars[v].lb = self.lb[v];
            lp.vars[v].ub = self.ub[v];
        }
        let out = milp::solve(&lp, &SolverControls::exact()).expect("residual LP solves");
        if out.status == SolveStatus::Optimal {
            let z = out.objective.expect("optimal LP has an objective");
            if self.best.is_none_or(|b| z < b) {
                self.best = Some(z);
            }
        }
    }

    fn dfs(&mut self, k: usize) {
        if k == self.ints.len() {
            self.leaf();
            return;
        }
        let v = self.ints[k];
        let (l0, u0) = (self.lb[v], self.ub[v]);
        let mut val = l0.ceil();
        while val <= u0.floor() {
            self.lb[v] = val;
            self.ub[v] = val;
            if self.rows_of[v].iter().all(|&r| self.row_possible(r)) {
                self.dfs(k + 1);
            }
            val += 1.0;
        }
        self.lb[v] = l0;
        self.ub[v] = u0;
    }
}

/// Minimum over every integer assignment of the residual LP optimum.
pub fn enumerate_optimum(model: &AbstractMilp, max_leaves: usize) -> Enumeration {
    let mut rows_of = vec![Vec::new(); model.vars.len()];
    for (r, c) in model.constraints.iter().enumerate() {
        for &(v, _) in &c.terms {
            rows_of[v].push(r);
        }
    }
    let ints = (0..model.vars.len()).filter(|&v| model.vars[v].kind.is_integral()).collect();
    let mut e = Enumerator {
        model,
        ints,
        rows_of,
        lb: model.vars.iter().map(|v| v.lb).collect(),
        ub: model.vars.iter().map(|v| v.ub).collect(),
        best: None,
        leaves: 0,
        max_leaves,
    };
    e.dfs(0);
    Enumeration {
        optimum: e.best,
        leaves: e.leaves,
    }
}

/// Micro shape: two stages, one PV and one BESS technology with a single
/// unit, so the integer space stays small enough to enumerate.
#[derive(Clone, Copy, Debug)]
pub struct MicroShape {
    pub branching: usize,
    pub scenarios: usize,
    pub periods: usize,
    pub elastic: usize,
    pub deferrable: usize,
    pub incompatible: usize,
    pub precedence: usize,
}

pub const MICRO_SHAPES: [MicroShape; 12] = [
    MicroShape { branching: 1, scenarios: 1, periods: 2, elastic: 0, deferrable: 0, incompatible: 0, precedence: 0 },
    MicroShape { branching: 1, scenarios: 1, periods: 3, elastic: 1, deferrable: 0, incompatible: 0, precedence: 0 },
    MicroShape { branching: 1, scenarios: 2, periods: 2, elastic: 1, deferrable: 1, incompatible: 0, precedence: 0 },
    MicroShape { branching: 1, scenarios: 2, periods: 3, elastic: 2, deferrable: 1, incompatible: 0, precedence: 0 },
    MicroShape { branching: 1, scenarios: 1, periods: 4, elastic: 1, deferrable: 2, incompatible: 1, precedence: 0 },
    MicroShape { branching: 1, scenarios: 1, periods: 4, elastic: 2, deferrable: 2, incompatible: 0, precedence: 1 },
    MicroShape { branching: 1, scenarios: 2, periods: 4, elastic: 0, deferrable: 1, incompatible: 0, precedence: 0 },
    MicroShape { branching: 2, scenarios: 1, periods: 2, elastic: 0, deferrable: 1, incompatible: 0, precedence: 0 },
    MicroShape { branching: 2, scenarios: 1, periods: 3, elastic: 1, deferrable: 1, incompatible: 0, precedence: 0 },
    MicroShape { branching: 2, scenarios: 1, periods: 4, elastic: 2, deferrable: 1, incompatible: 0, precedence: 0 },
    MicroShape { branching: 2, scenarios: 2, periods: 3, elastic: 2, deferrable: 0, incompatible: 0, precedence: 0 },
    MicroShape { branching: 2, scenarios: 2, periods: 4, elastic: 1, deferrable: 0, incompatible: 0, precedence: 0 },
];

pub fn micro_instance(shape: MicroShape, seed: u64) -> Instance {
    let size: Size = format!(
        "custom:stages=2,branching={},scenarios={},periods={},pv=1,bess=1,elastic={},deferrable={},incompatible={},precedence={}",
        shape.branching, shape.scenarios, shape.periods, shape.elastic, shape.deferrable, shape.incompatible, shape.precedence
    )
    .parse()
    .expect("micro size parses");
    let mut inst = synthetic_instance(&size, seed).expect("micro instance generates");
    inst.bess_technologies[0].max_units = 1.0;
    inst.limits.max_total_units = 1.0;
    inst
}

/// The micro suite: every shape with two seeds.
pub fn micro_suite() -> Vec<(String, Instance)> {
    let mut out = Vec::new();
    for (k, &shape) in MICRO_SHAPES.iter().enumerate() {
        for rep in 0..2u64 {
            let seed = 1000 + 10 * k as u64 + rep;
            out.push((format!("micro-{k}-seed{seed}"), micro_instance(shape, seed)));
        }
    }
    out
}

pub const DESK_SIZE: &str = "custom:stages=3,branching=2,scenarios=2,periods=6,pv=2,bess=1,elastic=1,deferrable=1";

/// Desk-scale instances, small enough to be solved to proven optimality.
pub fn desk_instances() -> Vec<Instance> {
    let size: Size = DESK_SIZE.parse().expect("desk size parses");
    [1u64, 2, 3]
        .iter()
        .map(|&s| synthetic_instance(&size, s).expect("desk instance generates"))
        .collect()
}

/// Daily discomfort of operational scenario `s` at node `n`, summed term by
/// term from curtailments and start indicators.
pub fn discomfort_oracle(inst: &Instance, n: NodeId, v: &NodeValues, s: usize) -> f64 {
    let e = inst.tree.node(n).stage;
    let st = inst.tree.stage(e);
    let mut total = 0.0;
    for (j, l) in inst.loads.elastic.iter().enumerate() {
        for &t in &l.window[e - 1] {
            total += st.periods[t].hours as f64 * l.discomfort[e - 1][t] * v.dl1[j][s][t];
        }
    }
    for (j, l) in inst.loads.deferrable.iter().enumerate() {
        for &t in &l.window[e - 1] {
            total += l.discomfort[e - 1][t] * v.delta[j][s][t];
        }
    }
    total
}

/// Largest residual of the stochastic-dominance requirements per node, each
/// normalized by its right-hand side, with discomfort from the oracle above.
#[derive(Debug, Default)]
pub struct DominanceCheck {
    pub worst_frequency: f64,
    pub worst_excess_ratio: f64,
    pub worst_expected_ratio: f64,
    pub failures: Vec<String>,
}

pub fn check_dominance(inst: &Instance, nodes: &[NodeValues]) -> DominanceCheck {
    let mut out = DominanceCheck::default();
    for node in inst.tree.nodes() {
        let st = inst.tree.stage(node.stage);
        let v = &nodes[node.id];
        for (p, prof) in inst.discomfort.profiles[node.stage - 1].iter().enumerate() {
            let d_bar = prof.threshold;
            let mut freq = 0.0;
            let mut expected = 0.0;
            for s in 0..st.num_scenarios() {
                let d = discomfort_oracle(inst, node.id, v, s);
                let w = st.ops.probability(s);
                let excess = (d - d_bar).max(0.0);
                if excess > REL_TOL * (1.0 + d_bar) {
                    freq += w;
                }
                expected += w * excess;
                let cap = prof.max_excess * d_bar;
                out.worst_excess_ratio = out.worst_excess_ratio.max(excess / cap.max(1e-12));
                if excess > cap + REL_TOL * (1.0 + cap) {
                    out.failures.push(format!("node {} profile {p} scenario {s}: excess {excess} > {cap}", node.id));
                }
            }
            out.worst_frequency = out.worst_frequency.max(freq);
            if freq > prof.prob_bound + 1e-9 {
                out.failures.push(format!("node {} profile {p}: exceed frequency {freq}", node.id));
            }
            let cap = prof.expected_excess * d_bar;
            out.worst_expected_ratio = out.worst_expected_ratio.max(expected / cap.max(1e-12));
            if expected > cap + REL_TOL * (1.0 + cap) {
                out.failures.push(format!("node {} profile {p}: expected excess {expected} > {cap}", node.id));
            }
        }
    }
    out
}

/// Median of a non-empty sample.
pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Day of `n` one-hour periods starting at midnight, PV during daylight.
pub fn hourly_day(n: usize) -> Vec<mhres::tree::Period> {
    (0..n).map(|h| mhres::tree::Period { hours: 1, pv: (6..20).contains(&h) }).collect()
}

/// Copy of `sol` with every decision value set to zero, keeping the shapes.
pub fn zeroed(nodes: &[NodeValues]) -> Vec<NodeValues> {
    fn z1(v: &[f64]) -> Vec<f64> {
        vec![0.0; v.len()]
    }
    fn z2(v: &[Vec<f64>]) -> Vec<Vec<f64>> {
        v.iter().map(|r| z1(r)).collect()
    }
    fn z3(v: &[Vec<Vec<f64>>]) -> Vec<Vec<Vec<f64>>> {
        v.iter().map(|r| z2(r)).collect()
    }
    nodes
        .iter()
        .map(|n| NodeValues {
            x: z1(&n.x),
            x_tilde: z1(&n.x_tilde),
            alpha: z1(&n.alpha),
            xp: z1(&n.xp),
            xp_tilde: z1(&n.xp_tilde),
            beta: z1(&n.beta),
            z_r: z3(&n.z_r),
            z_g: z2(&n.z_g),
            y: z3(&n.y),
            y_plus: z3(&n.y_plus),
            y_minus: z3(&n.y_minus),
            dl1: z3(&n.dl1),
            delta: z3(&n.delta),
            s: z2(&n.s),
            eta: z2(&n.eta),
        })
        .collect()
}

/// Two-stage single-scenario instance whose day has the given period hours
/// and one deferrable load per entry of `loads` as (hours, window).
pub fn day_instance(hours: &[u32], loads: &[(u32, Vec<usize>)]) -> Instance {
    let size: Size = format!("custom:stages=2,periods={}", hours.len()).parse().unwrap();
    let mut inst = synthetic_instance(&size, 1).unwrap();
    let day: Vec<mhres::tree::Period> = hours.iter().map(|&h| mhres::tree::Period { hours: h, pv: false }).collect();
    inst.tree = mhres::tree::MultiHorizonTree::balanced(vec![(1, day.clone(), vec![1.0]), (1, day, vec![1.0])], 1);
    inst.loads.deferrable = loads
        .iter()
        .enumerate()
        .map(|(j, (need, window))| mhres::instance::DeferrableLoad {
            name: format!("d{j}"),
            reference_start: vec![window[0]; 2],
            power: vec![1.0; 2],
            duration_hours: vec![*need; 2],
            window: vec![window.clone(); 2],
            discomfort: vec![vec![0.0; hours.len()]; 2],
        })
        .collect();
    inst
}
