//! Arithmetic re-check of a solution against the instance data. Nothing here
//! goes through the model emitter, so a wrong coefficient in one shows up as
//! a disagreement with the other.

use serde::Serialize;

use super::{CostBreakdown, NodeValues, Solution, Variant};
use crate::instance::Instance;
use crate::tree::NodeId;

/// Relative residual above which a constraint counts as violated.
pub const AUDIT_TOL: f64 = 1e-6;
/// Distance from an integer above which a value counts as fractional.
pub const INTEGRALITY_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditViolation {
    pub family: String,
    pub location: String,
    /// Violation divided by the larger of 1 and the magnitude of the row.
    pub residual: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AuditReport {
    pub checked: usize,
    pub max_residual: f64,
    pub violations: Vec<AuditViolation>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    fn record(&mut self, family: &str, location: impl FnOnce() -> String, violation: f64, scale: f64) {
        self.checked += 1;
        let residual = violation.max(0.0) / scale.abs().max(1.0);
        if residual > self.max_residual {
            self.max_residual = residual;
        }
        if residual > AUDIT_TOL {
            self.violations.push(AuditViolation {
                family: family.into(),
                location: location(),
                residual,
            });
        }
    }

    fn le(&mut self, family: &str, loc: impl FnOnce() -> String, lhs: f64, rhs: f64) {
        let scale = lhs.abs().max(rhs.abs());
        self.record(family, loc, lhs - rhs, scale);
    }

    fn equal(&mut self, family: &str, loc: impl FnOnce() -> String, lhs: f64, rhs: f64) {
        let scale = lhs.abs().max(rhs.abs());
        self.record(family, loc, (lhs - rhs).abs(), scale);
    }

    fn integral(&mut self, family: &str, loc: impl FnOnce() -> String, v: f64) {
        self.checked += 1;
        let gap = (v - v.round()).abs();
        if gap > INTEGRALITY_TOL {
            self.violations.push(AuditViolation {
                family: family.into(),
                location: loc(),
                residual: gap,
            });
        }
    }
}

fn at(grid: &[Vec<f64>], s: usize, t: usize) -> f64 {
    grid.get(s).and_then(|r| r.get(t)).copied().unwrap_or(f64::NAN)
}

/// Hours-based supply interval of a deferrable start, found by walking the
/// period lengths. `None` when the day ends first.
fn supply_interval(inst: &Instance, j: usize, e: usize, start: usize) -> Option<(usize, usize)> {
    let need = inst.loads.deferrable[j].duration_hours[e - 1];
    let periods = &inst.tree.stage(e).periods;
    let mut hours = 0;
    let mut t = start;
    while t < periods.len() {
        hours += periods[t].hours;
        if hours >= need {
            return Some((start, t));
        }
        t += 1;
    }
    None
}

/// Start period chosen for deferrable load `j` in scenario `s`, if exactly one.
fn chosen_start(v: &NodeValues, j: usize, s: usize) -> Option<usize> {
    let row = v.delta.get(j)?.get(s)?;
    let picked: Vec<usize> = row.iter().enumerate().filter(|(_, &d)| d > 0.5).map(|(t, _)| t).collect();
    (picked.len() == 1).then(|| picked[0])
}

/// Daily discomfort of operational scenario `s` at node `n`.
pub fn scenario_discomfort(inst: &Instance, n: NodeId, v: &NodeValues, s: usize) -> f64 {
    let e = inst.tree.node(n).stage;
    let st = inst.tree.stage(e);
    let mut total = 0.0;
    for (j, l) in inst.loads.elastic.iter().enumerate() {
        for &t in &l.window[e - 1] {
            total += st.periods[t].hours as f64 * l.discomfort[e - 1][t] * at(&v.dl1[j], s, t);
        }
    }
    for (j, l) in inst.loads.deferrable.iter().enumerate() {
        for &t in &l.window[e - 1] {
            total += l.discomfort[e - 1][t] * at(&v.delta[j], s, t);
        }
    }
    total
}

/// Objective recomputed from the decision values with the tree weights.
pub fn evaluate_cost(inst: &Instance, sol: &Solution) -> CostBreakdown {
    let tree = &inst.tree;
    let mut c = CostBreakdown::default();
    for node in tree.nodes() {
        let n = node.id;
        let w = node.weight;
        let v = &sol.nodes[n];
        let prev = node.parent.map(|p| &sol.nodes[p]);
        for (i, pv) in inst.pv_technologies.iter().enumerate() {
            let (px, pxt) = prev.map_or((0.0, 0.0), |p| (p.x[i], p.x_tilde[i]));
            c.pv_investment += w
                * (pv.prep_cost[n] * (v.x[i] - px)
                    + pv.install_cost[n] * (v.x_tilde[i] - pxt)
                    + pv.maint_cost[n] * v.x_tilde[i]);
            if node.children.is_empty() {
                c.residual_value += w * pv.residual_value[n] * v.x_tilde[i];
            }
        }
        for (b, bs) in inst.bess_technologies.iter().enumerate() {
            let (px, pxt) = prev.map_or((0.0, 0.0), |p| (p.xp[b], p.xp_tilde[b]));
            c.bess_investment += w
                * (bs.prep_cost[n] * (v.xp[b] - px)
                    + bs.install_cost[n] * (v.xp_tilde[b] - pxt)
                    + bs.maint_cost[n] * v.xp_tilde[b]);
            if node.children.is_empty() {
                c.residual_value += w * bs.residual_value[n] * v.xp_tilde[b];
            }
        }
        let st = tree.stage(node.stage);
        let e = node.stage - 1;
        let mut daily = 0.0;
        for s in 0..st.num_scenarios() {
            let mut scen = 0.0;
            for (t, period) in st.periods.iter().enumerate() {
                let h = period.hours as f64;
                let mut cost = inst.grid.import_price[e][s][t] * at(&v.z_g, s, t);
                for (b, bs) in inst.bess_technologies.iter().enumerate() {
                    cost += bs.op_cost * (at(&v.y_plus[b], s, t) + at(&v.y_minus[b], s, t));
                }
                if period.pv {
                    let price = inst.grid.export_price[e][s][t];
                    for (i, pv) in inst.pv_technologies.iter().enumerate() {
                        let used = at(&v.z_r[i], s, t);
                        let available = pv.availability[e][s][t] * pv.capacity_kw * v.x_tilde[i];
                        cost += pv.gen_cost[e][s][t] * used - price * (available - used);
                    }
                }
                scen += h * cost;
            }
            daily += st.ops.probability(s) * scen;
        }
        c.operational += w * st.days as f64 * daily;
    }
    c.total = c.pv_investment + c.bess_investment + c.operational - c.residual_value;
    c
}

/// Per-node discomfort statistics over the operational scenarios.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiscomfortStats {
    pub node: NodeId,
    pub stage: usize,
    pub expected: f64,
    /// Smallest value whose cumulative probability reaches 0.95.
    pub p95: f64,
    pub max: f64,
    pub cap: f64,
    /// `[profile]` probability of exceeding the threshold.
    pub exceed_probability: Vec<f64>,
    /// `[profile]` expected excess over the threshold.
    pub expected_excess: Vec<f64>,
}

fn weighted_quantile(values: &[f64], prob: impl Fn(usize) -> f64, level: f64) -> f64 {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut cum = 0.0;
    for &k in &order {
        cum += prob(k);
        if cum >= level - 1e-12 {
            return values[k];
        }
    }
    order.last().map_or(0.0, |&k| values[k])
}

pub fn nodal_discomfort_stats(inst: &Instance, sol: &Solution) -> Vec<DiscomfortStats> {
    inst.tree
        .nodes()
        .iter()
        .map(|node| {
            let st = inst.tree.stage(node.stage);
            let v = &sol.nodes[node.id];
            let d: Vec<f64> = (0..st.num_scenarios())
                .map(|s| scenario_discomfort(inst, node.id, v, s))
                .collect();
            let prob = |s: usize| st.ops.probability(s);
            let profiles = &inst.discomfort.profiles[node.stage - 1];
            DiscomfortStats {
                node: node.id,
                stage: node.stage,
                expected: d.iter().enumerate().map(|(s, x)| prob(s) * x).sum(),
                p95: weighted_quantile(&d, |s| prob(s), 0.95),
                max: d.iter().copied().fold(0.0, f64::max),
                cap: inst.discomfort.max_expected[node.stage - 1],
                exceed_probability: profiles
                    .iter()
                    .map(|p| {
                        d.iter()
                            .enumerate()
                            .filter(|(_, &x)| x > p.threshold * (1.0 + AUDIT_TOL) + AUDIT_TOL)
                            .fold(0.0, |acc, (s, _)| acc + prob(s))
                    })
                    .collect(),
                expected_excess: profiles
                    .iter()
                    .map(|p| d.iter().enumerate().map(|(s, x)| prob(s) * (x - p.threshold).max(0.0)).sum())
                    .collect(),
            }
        })
        .collect()
}

fn check_shapes(inst: &Instance, sol: &Solution, r: &mut AuditReport) -> bool {
    if sol.nodes.len() != inst.tree.num_nodes() {
        r.violations.push(AuditViolation {
            family: "shape".into(),
            location: format!("{} nodes, tree has {}", sol.nodes.len(), inst.tree.num_nodes()),
            residual: f64::INFINITY,
        });
        return false;
    }
    let (ni, nb, nj1, nj2) = (inst.num_pv(), inst.num_bess(), inst.num_elastic(), inst.num_deferrable());
    let mut ok = true;
    for node in inst.tree.nodes() {
        let v = &sol.nodes[node.id];
        let st = inst.tree.stage(node.stage);
        let (p, t) = (st.num_scenarios(), st.num_periods());
        let grid_ok = |g: &Vec<Vec<f64>>| g.len() == p && g.iter().all(|r| r.len() == t);
        let cube_ok = |c: &Vec<Vec<Vec<f64>>>, k: usize| c.len() == k && c.iter().all(grid_ok);
        let good = v.x.len() == ni
            && v.x_tilde.len() == ni
            && v.alpha.len() == ni
            && v.xp.len() == nb
            && v.xp_tilde.len() == nb
            && v.beta.len() == nb
            && cube_ok(&v.z_r, ni)
            && grid_ok(&v.z_g)
            && cube_ok(&v.y, nb)
            && cube_ok(&v.y_plus, nb)
            && cube_ok(&v.y_minus, nb)
            && cube_ok(&v.dl1, nj1)
            && cube_ok(&v.delta, nj2);
        if !good {
            ok = false;
            r.violations.push(AuditViolation {
                family: "shape".into(),
                location: format!("node {}", node.id),
                residual: f64::INFINITY,
            });
        }
    }
    ok
}

/// Checks every constraint family of `variant` and the integrality and bound
/// requirements of every variable.
pub fn check_feasibility(inst: &Instance, variant: Variant, sol: &Solution) -> AuditReport {
    let mut r = AuditReport::default();
    if !check_shapes(inst, sol, &mut r) {
        r.max_residual = f64::INFINITY;
        return r;
    }
    let tree = &inst.tree;
    let lim = &inst.limits;
    for node in tree.nodes() {
        let n = node.id;
        let e = node.stage;
        let st = tree.stage(e);
        let v = &sol.nodes[n];
        let prev = node.parent.map(|p| &sol.nodes[p]);
        let loc = |extra: String| move || format!("node {n}{extra}");

        // Domains.
        for i in 0..inst.num_pv() {
            let pv = &inst.pv_technologies[i];
            r.integral("integrality", loc(format!(", x[{i}]")), v.x[i]);
            r.integral("integrality", loc(format!(", alpha[{i}]")), v.alpha[i]);
            for (name, val, ub) in [("x", v.x[i], 1.0), ("alpha", v.alpha[i], 1.0), ("x_tilde", v.x_tilde[i], pv.max_panels)] {
                r.le("bounds", loc(format!(", {name}[{i}] >= 0")), -val, 0.0);
                r.le("bounds", loc(format!(", {name}[{i}] <= {ub}")), val, ub);
            }
        }
        for b in 0..inst.num_bess() {
            let bs = &inst.bess_technologies[b];
            r.integral("integrality", loc(format!(", xp[{b}]")), v.xp[b]);
            r.integral("integrality", loc(format!(", xp_tilde[{b}]")), v.xp_tilde[b]);
            r.integral("integrality", loc(format!(", beta[{b}]")), v.beta[b]);
            for (name, val, ub) in [("xp", v.xp[b], 1.0), ("beta", v.beta[b], 1.0), ("xp_tilde", v.xp_tilde[b], bs.max_units)] {
                r.le("bounds", loc(format!(", {name}[{b}] >= 0")), -val, 0.0);
                r.le("bounds", loc(format!(", {name}[{b}] <= {ub}")), val, ub);
            }
        }

        // Investment logic.
        let mut new_pv = 0.0;
        let mut spend = 0.0;
        for (i, pv) in inst.pv_technologies.iter().enumerate() {
            let (px, pxt) = prev.map_or((0.0, 0.0), |p| (p.x[i], p.x_tilde[i]));
            r.le("pv_impulse_link", loc(format!(", i={i}")), v.alpha[i], v.x[i]);
            r.le("pv_step_monotone", loc(format!(", i={i}")), px, v.x[i]);
            r.le("pv_count_monotone", loc(format!(", i={i}")), pxt, v.x_tilde[i]);
            r.le("pv_count_cap", loc(format!(", i={i}")), v.x_tilde[i], pv.max_panels * v.x[i]);
            r.le("pv_batch_min", loc(format!(", i={i}")), lim.min_panel_batch * v.alpha[i], v.x_tilde[i] - pxt);
            r.le("pv_batch_max", loc(format!(", i={i}")), v.x_tilde[i] - pxt, pv.max_panels * v.alpha[i]);
            new_pv += v.x[i] - px;
            spend += pv.prep_cost[n] * (v.x[i] - px) + pv.install_cost[n] * (v.x_tilde[i] - pxt);
        }
        let mut new_bess = 0.0;
        for (b, bs) in inst.bess_technologies.iter().enumerate() {
            let (px, pxt) = prev.map_or((0.0, 0.0), |p| (p.xp[b], p.xp_tilde[b]));
            r.le("bess_impulse_link", loc(format!(", b={b}")), v.beta[b], v.xp[b]);
            r.le("bess_step_monotone", loc(format!(", b={b}")), px, v.xp[b]);
            r.le("bess_count_monotone", loc(format!(", b={b}")), pxt, v.xp_tilde[b]);
            r.le("bess_count_cap", loc(format!(", b={b}")), v.xp_tilde[b], bs.max_units * v.xp[b]);
            r.le("bess_batch_min", loc(format!(", b={b}")), lim.min_unit_batch * v.beta[b], v.xp_tilde[b] - pxt);
            r.le("bess_batch_max", loc(format!(", b={b}")), v.xp_tilde[b] - pxt, bs.max_units * v.beta[b]);
            new_bess += v.xp[b] - px;
            spend += bs.prep_cost[n] * (v.xp[b] - px) + bs.install_cost[n] * (v.xp_tilde[b] - pxt);
        }
        r.le("pv_single_new_tech", loc(String::new()), new_pv, 1.0);
        r.le("bess_single_new_tech", loc(String::new()), new_bess, 1.0);
        r.le("pv_global_cap", loc(String::new()), v.x_tilde.iter().sum(), lim.max_total_panels);
        r.le("bess_global_cap", loc(String::new()), v.xp_tilde.iter().sum(), lim.max_total_units);
        r.le("budget", loc(String::new()), spend, lim.budget[n]);

        // Operations.
        let parent_stage = node.parent.map(|p| tree.node(p).stage);
        for s in 0..st.num_scenarios() {
            let chosen: Vec<Option<usize>> = (0..inst.num_deferrable()).map(|j| chosen_start(v, j, s)).collect();
            for (t, period) in st.periods.iter().enumerate() {
                let h = period.hours as f64;
                let ploc = |extra: &str| {
                    let extra = extra.to_string();
                    move || format!("node {n}, pi={s}, t={t}{extra}")
                };
                let mut supply = at(&v.z_g, s, t);
                r.le("bounds", ploc(", zG >= 0"), -at(&v.z_g, s, t), 0.0);
                for (i, pv) in inst.pv_technologies.iter().enumerate() {
                    let z = at(&v.z_r[i], s, t);
                    r.le("bounds", ploc(&format!(", zR[{i}] >= 0")), -z, 0.0);
                    if period.pv {
                        let cap = pv.availability[e - 1][s][t] * pv.capacity_kw * v.x_tilde[i];
                        r.le("pv_output_cap", ploc(&format!(", i={i}")), z, cap);
                    } else {
                        r.le("pv_output_cap", ploc(&format!(", i={i}, night")), z.abs(), 0.0);
                    }
                    supply += z;
                }
                for (b, bs) in inst.bess_technologies.iter().enumerate() {
                    let (y, yp, ym) = (at(&v.y[b], s, t), at(&v.y_plus[b], s, t), at(&v.y_minus[b], s, t));
                    for (name, val) in [("y", y), ("y_plus", yp), ("y_minus", ym)] {
                        r.le("bounds", ploc(&format!(", {name}[{b}] >= 0")), -val, 0.0);
                    }
                    supply += ym - yp;
                    let keep = 1.0 - bs.loss[e - 1];
                    r.le(
                        "charge_cap",
                        ploc(&format!(", b={b}")),
                        h * yp,
                        bs.charge_depth[e - 1] * bs.unit_capacity_kwh * v.xp_tilde[b],
                    );
                    r.le("storage_cap", ploc(&format!(", b={b}")), y, bs.unit_capacity_kwh * v.xp_tilde[b]);
                    let before = if t > 0 {
                        keep * at(&v.y[b], s, t - 1)
                    } else if let (Some(pv), Some(pe)) = (prev, parent_stage) {
                        let pst = tree.stage(pe);
                        let pkeep = 1.0 - bs.loss[pe - 1];
                        let last_p = pst.num_periods() - 1;
                        let from_parent: f64 = (0..pst.num_scenarios())
                            .map(|ps| pst.ops.probability(ps) * pkeep * at(&pv.y[b], ps, last_p))
                            .sum();
                        let last = st.num_periods() - 1;
                        let from_self: f64 = (0..st.num_scenarios())
                            .map(|os| st.ops.probability(os) * keep * at(&v.y[b], os, last))
                            .sum();
                        let d = st.days as f64;
                        from_parent / d + from_self * (d - 1.0) / d
                    } else {
                        0.0
                    };
                    let family = match (t, prev) {
                        (0, None) => "storage_initial",
                        (0, Some(_)) => "storage_carryover",
                        _ => "storage_balance",
                    };
                    r.equal(family, ploc(&format!(", b={b}")), y, before + h * (yp - ym));
                    r.le("discharge_cap", ploc(&format!(", b={b}")), h * ym, bs.discharge_depth[e - 1] * before);
                }
                let mut demand = inst.loads.base[e - 1][s][t];
                for (j, l) in inst.loads.elastic.iter().enumerate() {
                    let dl = at(&v.dl1[j], s, t);
                    if l.window[e - 1].contains(&t) {
                        demand += l.setpoint[e - 1][s][t];
                        supply += dl;
                        r.le("bounds", ploc(&format!(", dl1[{j}] >= 0")), -dl, 0.0);
                        r.le("curtail_cap", ploc(&format!(", j={j}")), dl, l.max_curtail[e - 1][t]);
                        if t > 0 && l.window[e - 1].contains(&(t - 1)) {
                            let now = l.setpoint[e - 1][s][t] - dl;
                            let before = l.setpoint[e - 1][s][t - 1] - at(&v.dl1[j], s, t - 1);
                            r.le("ramp_up", ploc(&format!(", j={j}")), now - before, l.ramp[e - 1][t]);
                            r.le("ramp_down", ploc(&format!(", j={j}")), before - now, l.ramp[e - 1][t]);
                        }
                    } else {
                        r.le("curtail_cap", ploc(&format!(", j={j}, outside window")), dl.abs(), 0.0);
                    }
                }
                for (j, l) in inst.loads.deferrable.iter().enumerate() {
                    if let Some(start) = chosen[j] {
                        if let Some((a, z)) = supply_interval(inst, j, e, start) {
                            if a <= t && t <= z {
                                demand += l.power[e - 1];
                            }
                        }
                    }
                }
                r.equal("energy_balance", ploc(""), supply, demand);
            }

            // Deferrable scheduling by direct simulation.
            for (j, l) in inst.loads.deferrable.iter().enumerate() {
                let dloc = || format!("node {n}, pi={s}, j={j}");
                for (t, &d) in v.delta[j][s].iter().enumerate() {
                    r.integral("integrality", || format!("node {n}, pi={s}, delta[{j}] t={t}"), d);
                    r.le("bounds", || format!("node {n}, pi={s}, delta[{j}] t={t}"), d, 1.0);
                    r.le("bounds", || format!("node {n}, pi={s}, delta[{j}] t={t}"), -d, 0.0);
                }
                let total: f64 = v.delta[j][s].iter().sum();
                r.equal("deferrable_start", dloc, total, 1.0);
                match chosen[j] {
                    Some(start) => {
                        let ok = l.window[e - 1].contains(&start) && supply_interval(inst, j, e, start).is_some();
                        r.le("deferrable_start", || format!("node {n}, pi={s}, j={j}, start {start} not admissible"), if ok { 0.0 } else { 1.0 }, 0.0);
                    }
                    None => r.le("deferrable_start", dloc, 1.0, 0.0),
                }
            }
            for (k, &(a, b)) in inst.loads.incompatible.iter().enumerate() {
                if let (Some(sa), Some(sb)) = (chosen[a], chosen[b]) {
                    if let (Some((a0, a1)), Some((b0, b1))) = (supply_interval(inst, a, e, sa), supply_interval(inst, b, e, sb)) {
                        let overlap = a0 <= b1 && b0 <= a1;
                        r.le("deferrable_incompat", || format!("node {n}, pi={s}, pair {k}"), if overlap { 1.0 } else { 0.0 }, 0.0);
                    }
                }
            }
            for (k, p) in inst.loads.precedence.iter().enumerate() {
                if let (Some(sa), Some(sb)) = (chosen[p.before], chosen[p.after]) {
                    if let Some((_, end)) = supply_interval(inst, p.before, e, sa) {
                        r.le(
                            "deferrable_precedence",
                            || format!("node {n}, pi={s}, pair {k}"),
                            (end + 1 + p.latency) as f64,
                            sb as f64,
                        );
                    }
                }
            }
        }

        // Discomfort.
        if variant.has_expected_bound() {
            let d: Vec<f64> = (0..st.num_scenarios()).map(|s| scenario_discomfort(inst, n, v, s)).collect();
            let expected: f64 = d.iter().enumerate().map(|(s, x)| st.ops.probability(s) * x).sum();
            r.le("expected_discomfort", loc(String::new()), expected, inst.discomfort.max_expected[e - 1]);
            if variant.has_dominance() {
                for (p, prof) in inst.discomfort.profiles[e - 1].iter().enumerate() {
                    let mut prob = 0.0;
                    let mut excess = 0.0;
                    let mut prob_var = 0.0;
                    let mut excess_var = 0.0;
                    for (s, &x) in d.iter().enumerate() {
                        let w = st.ops.probability(s);
                        let sv = at(&v.s, p, s);
                        let ev = at(&v.eta, p, s);
                        let sloc = || format!("node {n}, p={p}, pi={s}");
                        r.integral("integrality", sloc, ev);
                        r.le("bounds", sloc, -sv, 0.0);
                        r.le("sd_excess", sloc, x - sv, prof.threshold);
                        r.le("sd_excess_cap", sloc, sv, prof.max_excess * prof.threshold * ev);
                        r.le("sd_excess_cap", sloc, x, prof.threshold * (1.0 + prof.max_excess));
                        if x > prof.threshold + AUDIT_TOL * prof.threshold.max(1.0) {
                            prob += w;
                        }
                        excess += w * (x - prof.threshold).max(0.0);
                        prob_var += w * ev;
                        excess_var += w * sv;
                    }
                    let ploc = || format!("node {n}, p={p}");
                    r.le("sd_probability", ploc, prob, prof.prob_bound);
                    r.le("sd_probability", ploc, prob_var, prof.prob_bound);
                    r.le("sd_expected_excess", ploc, excess, prof.expected_excess * prof.threshold);
                    r.le("sd_expected_excess", ploc, excess_var, prof.expected_excess * prof.threshold);
                }
            }
        }
    }
    r
}
