//! Problem data: technologies, loads, grid prices, limits and discomfort
//! policy, all indexed by the nodes of a [`MultiHorizonTree`].
//!
//! Index conventions: strategic node arrays are `[node]`; stage arrays are
//! `[stage - 1]`; per-period arrays are `[stage - 1][period]`; operational
//! arrays are `[stage - 1][scenario][period]`.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::tree::{MultiHorizonTree, NodeId, Violation};

pub const SCHEMA: &str = "mhres/1";

/// Operational parameter, `[stage - 1][scenario][period]`.
pub type OpParam = Vec<Vec<Vec<f64>>>;

#[derive(Debug, thiserror::Error)]
pub enum InstanceError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unsupported schema {0:?}, expected {SCHEMA:?}")]
    Schema(String),
    #[error("missing {param} for {index}")]
    Coverage { param: String, index: String },
    #[error("invalid instance:{}", render(.0))]
    Invalid(Vec<Violation>),
    #[error("deferrable load {load} at stage {stage}: insufficient remaining hours from period {start}")]
    InsufficientHours { load: usize, stage: usize, start: usize },
    #[error("{0}")]
    Argument(String),
}

fn render(list: &[Violation]) -> String {
    let mut s = String::new();
    for v in list {
        let _ = write!(s, "\n  {v}");
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PvTechnology {
    pub name: String,
    /// Nominal panel capacity `F_i` (kW).
    pub capacity_kw: f64,
    /// Per-technology panel cap.
    pub max_panels: f64,
    pub prep_cost: Vec<f64>,
    pub install_cost: Vec<f64>,
    pub maint_cost: Vec<f64>,
    /// Residual value per panel; only leaf entries are used.
    pub residual_value: Vec<f64>,
    /// Generation cost (€/kWh).
    pub gen_cost: OpParam,
    /// Fraction of nominal capacity available.
    pub availability: OpParam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BessTechnology {
    pub name: String,
    /// Unit capacity `k'_b` (kWh).
    pub unit_capacity_kwh: f64,
    /// Per-stage loss factor.
    pub loss: Vec<f64>,
    pub charge_depth: Vec<f64>,
    pub discharge_depth: Vec<f64>,
    /// Operating cost per kWh moved.
    pub op_cost: f64,
    pub max_units: f64,
    pub prep_cost: Vec<f64>,
    pub install_cost: Vec<f64>,
    pub maint_cost: Vec<f64>,
    pub residual_value: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemLimits {
    pub max_total_panels: f64,
    pub min_panel_batch: f64,
    pub max_total_units: f64,
    pub min_unit_batch: f64,
    /// Investment budget per strategic node.
    pub budget: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElasticLoad {
    pub name: String,
    /// Setpoint `L1_{j,q}` (kW).
    pub setpoint: OpParam,
    /// Periods of each stage where the setpoint applies.
    pub window: Vec<Vec<usize>>,
    /// Maximum curtailment, `[stage][period]`.
    pub max_curtail: Vec<Vec<f64>>,
    /// Ramp limit between consecutive periods, `[stage][period]`.
    pub ramp: Vec<Vec<f64>>,
    /// Discomfort per curtailed kWh, `[stage][period]`.
    pub discomfort: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeferrableLoad {
    pub name: String,
    /// Reference start period per stage.
    pub reference_start: Vec<usize>,
    /// Hourly requirement `L2_{j,e}` (kW).
    pub power: Vec<f64>,
    /// Required consecutive hours `m1_{j,e}`.
    pub duration_hours: Vec<u32>,
    pub window: Vec<Vec<usize>>,
    /// Discomfort of starting at each period, `[stage][period]`.
    pub discomfort: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Precedence {
    pub before: usize,
    pub after: usize,
    /// Minimum separation in daily periods.
    pub latency: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Loads {
    /// Non-controlled load `L_q` (kW).
    pub base: OpParam,
    pub elastic: Vec<ElasticLoad>,
    pub deferrable: Vec<DeferrableLoad>,
    pub incompatible: Vec<(usize, usize)>,
    pub precedence: Vec<Precedence>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridParams {
    pub import_price: OpParam,
    pub export_price: OpParam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscomfortProfile {
    pub threshold: f64,
    pub prob_bound: f64,
    pub max_excess: f64,
    pub expected_excess: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscomfortPolicy {
    /// Expected-discomfort cap `D̂_e` per stage.
    pub max_expected: Vec<f64>,
    /// Risk profiles per stage.
    pub profiles: Vec<Vec<DiscomfortProfile>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub name: String,
    pub currency: String,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub schema: String,
    pub tree: MultiHorizonTree,
    pub pv_technologies: Vec<PvTechnology>,
    pub bess_technologies: Vec<BessTechnology>,
    pub limits: SystemLimits,
    pub loads: Loads,
    pub grid: GridParams,
    pub discomfort: DiscomfortPolicy,
    #[serde(default)]
    pub meta: Meta,
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance, InstanceError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| InstanceError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Instance::from_json(&text)
}

impl Instance {
    /// Parses, validates and normalizes an instance document.
    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        let probe: serde_json::Value =
            serde_json::from_str(text).map_err(|e| InstanceError::Parse(e.to_string()))?;
        match probe.get("schema").and_then(|s| s.as_str()) {
            Some(SCHEMA) => {}
            Some(other) => return Err(InstanceError::Schema(other.into())),
            None => return Err(InstanceError::Parse("missing field `schema`".into())),
        }
        let mut inst: Instance =
            serde_json::from_str(text).map_err(|e| InstanceError::Parse(e.to_string()))?;
        let tree_report = inst.tree.validate();
        if !tree_report.is_empty() {
            return Err(InstanceError::Invalid(tree_report));
        }
        inst.check_coverage()?;
        inst.tree = inst.tree.normalized();
        let report = inst.check_invariants();
        if !report.is_empty() {
            return Err(InstanceError::Invalid(report));
        }
        Ok(inst)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), InstanceError> {
        crate::io::write_atomic(path.as_ref(), self.to_json().as_bytes()).map_err(|source| {
            InstanceError::Io {
                path: path.as_ref().display().to_string(),
                source,
            }
        })
    }

    pub fn num_pv(&self) -> usize {
        self.pv_technologies.len()
    }

    pub fn num_bess(&self) -> usize {
        self.bess_technologies.len()
    }

    pub fn num_elastic(&self) -> usize {
        self.loads.elastic.len()
    }

    pub fn num_deferrable(&self) -> usize {
        self.loads.deferrable.len()
    }

    /// Every node-, stage- and operational-indexed parameter must cover the
    /// whole tree; the first gap is reported by name and index.
    pub fn check_coverage(&self) -> Result<(), InstanceError> {
        let tree = &self.tree;
        let n = tree.num_nodes();
        let e_max = tree.num_stages();
        let node = |param: String, v: &Vec<f64>| -> Result<(), InstanceError> {
            if v.len() < n {
                return Err(InstanceError::Coverage {
                    param,
                    index: format!("node {}", v.len()),
                });
            }
            Ok(())
        };
        let stage = |param: String, len: usize| -> Result<(), InstanceError> {
            if len < e_max {
                return Err(InstanceError::Coverage {
                    param,
                    index: format!("stage {}", len + 1),
                });
            }
            Ok(())
        };
        let periods = |param: String, v: &Vec<Vec<f64>>| -> Result<(), InstanceError> {
            stage(param.clone(), v.len())?;
            for e in 1..=e_max {
                let t_len = tree.stage(e).num_periods();
                if v[e - 1].len() < t_len {
                    return Err(InstanceError::Coverage {
                        param,
                        index: format!("stage {e}, period {}", v[e - 1].len()),
                    });
                }
            }
            Ok(())
        };
        let op = |param: String, v: &OpParam| -> Result<(), InstanceError> {
            stage(param.clone(), v.len())?;
            for e in 1..=e_max {
                let st = tree.stage(e);
                let row = &v[e - 1];
                if row.len() < st.num_scenarios() {
                    return Err(InstanceError::Coverage {
                        param,
                        index: format!("stage {e}, scenario {}, period 0", row.len()),
                    });
                }
                for (pi, cells) in row.iter().enumerate().take(st.num_scenarios()) {
                    if cells.len() < st.num_periods() {
                        return Err(InstanceError::Coverage {
                            param,
                            index: format!("stage {e}, scenario {pi}, period {}", cells.len()),
                        });
                    }
                }
            }
            Ok(())
        };

        for (i, pv) in self.pv_technologies.iter().enumerate() {
            node(format!("pv_technologies[{i}].prep_cost"), &pv.prep_cost)?;
            node(format!("pv_technologies[{i}].install_cost"), &pv.install_cost)?;
            node(format!("pv_technologies[{i}].maint_cost"), &pv.maint_cost)?;
            node(format!("pv_technologies[{i}].residual_value"), &pv.residual_value)?;
            op(format!("pv_technologies[{i}].gen_cost"), &pv.gen_cost)?;
            op(format!("pv_technologies[{i}].availability"), &pv.availability)?;
        }
        for (b, bs) in self.bess_technologies.iter().enumerate() {
            stage(format!("bess_technologies[{b}].loss"), bs.loss.len())?;
            stage(format!("bess_technologies[{b}].charge_depth"), bs.charge_depth.len())?;
            stage(format!("bess_technologies[{b}].discharge_depth"), bs.discharge_depth.len())?;
            node(format!("bess_technologies[{b}].prep_cost"), &bs.prep_cost)?;
            node(format!("bess_technologies[{b}].install_cost"), &bs.install_cost)?;
            node(format!("bess_technologies[{b}].maint_cost"), &bs.maint_cost)?;
            node(format!("bess_technologies[{b}].residual_value"), &bs.residual_value)?;
        }
        node("limits.budget".into(), &self.limits.budget)?;
        op("loads.base".into(), &self.loads.base)?;
        for (j, l) in self.loads.elastic.iter().enumerate() {
            op(format!("loads.elastic[{j}].setpoint"), &l.setpoint)?;
            stage(format!("loads.elastic[{j}].window"), l.window.len())?;
            periods(format!("loads.elastic[{j}].max_curtail"), &l.max_curtail)?;
            periods(format!("loads.elastic[{j}].ramp"), &l.ramp)?;
            periods(format!("loads.elastic[{j}].discomfort"), &l.discomfort)?;
        }
        for (j, l) in self.loads.deferrable.iter().enumerate() {
            stage(format!("loads.deferrable[{j}].reference_start"), l.reference_start.len())?;
            stage(format!("loads.deferrable[{j}].power"), l.power.len())?;
            stage(format!("loads.deferrable[{j}].duration_hours"), l.duration_hours.len())?;
            stage(format!("loads.deferrable[{j}].window"), l.window.len())?;
            periods(format!("loads.deferrable[{j}].discomfort"), &l.discomfort)?;
        }
        op("grid.import_price".into(), &self.grid.import_price)?;
        op("grid.export_price".into(), &self.grid.export_price)?;
        stage("discomfort.max_expected".into(), self.discomfort.max_expected.len())?;
        stage("discomfort.profiles".into(), self.discomfort.profiles.len())?;
        Ok(())
    }

    /// Parameter invariants (sign, range and subset conditions).
    pub fn check_invariants(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |rule: &str, location: String, detail: String| {
            out.push(Violation {
                rule: rule.into(),
                location,
                detail,
            })
        };
        let tree = &self.tree;
        let e_max = tree.num_stages();
        let nonneg = |v: f64| v >= 0.0 && v.is_finite();

        let for_op = |v: &OpParam, f: &mut dyn FnMut(usize, usize, usize, f64)| {
            for e in 1..=e_max {
                let st = tree.stage(e);
                for pi in 0..st.num_scenarios() {
                    for t in 0..st.num_periods() {
                        f(e, pi, t, v[e - 1][pi][t]);
                    }
                }
            }
        };

        for (i, pv) in self.pv_technologies.iter().enumerate() {
            let loc = format!("pv technology {i}");
            if !(pv.capacity_kw > 0.0) {
                push("positive panel capacity", loc.clone(), format!("F = {}", pv.capacity_kw));
            }
            for (name, v) in [
                ("prep_cost", &pv.prep_cost),
                ("install_cost", &pv.install_cost),
                ("maint_cost", &pv.maint_cost),
                ("residual_value", &pv.residual_value),
            ] {
                if let Some(n) = v.iter().position(|&c| !nonneg(c)) {
                    push("non-negative cost", format!("{loc}, node {n}"), format!("{name} = {}", v[n]));
                }
            }
            let mut bad_gen = None;
            for_op(&pv.gen_cost, &mut |e, pi, t, c| {
                if !nonneg(c) && bad_gen.is_none() {
                    bad_gen = Some((e, pi, t, c));
                }
            });
            if let Some((e, pi, t, c)) = bad_gen {
                push(
                    "non-negative cost",
                    format!("{loc}, stage {e}, scenario {pi}, period {t}"),
                    format!("gen_cost = {c}"),
                );
            }
            let mut bad_av = None;
            for_op(&pv.availability, &mut |e, pi, t, a| {
                let pv_period = tree.stage(e).is_pv(t);
                let ok = (0.0..=1.0).contains(&a) && (pv_period || a == 0.0);
                if !ok && bad_av.is_none() {
                    bad_av = Some((e, pi, t, a));
                }
            });
            if let Some((e, pi, t, a)) = bad_av {
                push(
                    "pv availability",
                    format!("{loc}, stage {e}, scenario {pi}, period {t}"),
                    format!("availability {a} must lie in [0,1] and be 0 outside PV periods"),
                );
            }
            if pv.max_panels < self.limits.min_panel_batch || pv.max_panels > self.limits.max_total_panels {
                push(
                    "panel cap ordering",
                    loc.clone(),
                    format!(
                        "need min batch {} <= tech cap {} <= global cap {}",
                        self.limits.min_panel_batch, pv.max_panels, self.limits.max_total_panels
                    ),
                );
            }
        }
        for (b, bs) in self.bess_technologies.iter().enumerate() {
            let loc = format!("bess technology {b}");
            if !(bs.unit_capacity_kwh > 0.0) {
                push("positive unit capacity", loc.clone(), format!("k' = {}", bs.unit_capacity_kwh));
            }
            if !nonneg(bs.op_cost) {
                push("non-negative cost", loc.clone(), format!("op_cost = {}", bs.op_cost));
            }
            for (name, v) in [
                ("prep_cost", &bs.prep_cost),
                ("install_cost", &bs.install_cost),
                ("maint_cost", &bs.maint_cost),
                ("residual_value", &bs.residual_value),
            ] {
                if let Some(n) = v.iter().position(|&c| !nonneg(c)) {
                    push("non-negative cost", format!("{loc}, node {n}"), format!("{name} = {}", v[n]));
                }
            }
            for e in 1..=e_max {
                let f = bs.loss[e - 1];
                if !(0.0..1.0).contains(&f) {
                    push("loss factor range", format!("{loc}, stage {e}"), format!("loss {f} outside [0,1)"));
                }
                for (name, r) in [("charge", bs.charge_depth[e - 1]), ("discharge", bs.discharge_depth[e - 1])] {
                    if !(r > 0.0 && r <= 1.0) {
                        push("depth range", format!("{loc}, stage {e}"), format!("{name} depth {r} outside (0,1]"));
                    }
                }
            }
            if bs.max_units < self.limits.min_unit_batch || bs.max_units > self.limits.max_total_units {
                push(
                    "unit cap ordering",
                    loc.clone(),
                    format!(
                        "need min batch {} <= tech cap {} <= global cap {}",
                        self.limits.min_unit_batch, bs.max_units, self.limits.max_total_units
                    ),
                );
            }
        }
        if let Some(n) = self.limits.budget.iter().position(|&b| !nonneg(b)) {
            push("non-negative budget", format!("node {n}"), format!("budget {}", self.limits.budget[n]));
        }

        let mut bad_load = None;
        for_op(&self.loads.base, &mut |e, pi, t, l| {
            if !nonneg(l) && bad_load.is_none() {
                bad_load = Some((e, pi, t, l));
            }
        });
        if let Some((e, pi, t, l)) = bad_load {
            push(
                "non-negative load",
                format!("stage {e}, scenario {pi}, period {t}"),
                format!("base load {l}"),
            );
        }
        for (name, v) in [("import_price", &self.grid.import_price), ("export_price", &self.grid.export_price)] {
            let mut bad = None;
            for_op(v, &mut |e, pi, t, p| {
                if !nonneg(p) && bad.is_none() {
                    bad = Some((e, pi, t, p));
                }
            });
            if let Some((e, pi, t, p)) = bad {
                push(
                    "non-negative price",
                    format!("stage {e}, scenario {pi}, period {t}"),
                    format!("{name} = {p}"),
                );
            }
        }

        for (j, l) in self.loads.elastic.iter().enumerate() {
            for e in 1..=e_max {
                let st = tree.stage(e);
                let loc = format!("elastic load {j}, stage {e}");
                for &t in &l.window[e - 1] {
                    if t >= st.num_periods() {
                        push("window within day", loc.clone(), format!("period {t} does not exist"));
                        continue;
                    }
                    let cap = l.max_curtail[e - 1][t];
                    if !nonneg(cap) || !nonneg(l.ramp[e - 1][t]) || !nonneg(l.discomfort[e - 1][t]) {
                        push(
                            "non-negative elastic data",
                            format!("{loc}, period {t}"),
                            "curtailment cap, ramp and discomfort must be >= 0".into(),
                        );
                    }
                    for pi in 0..st.num_scenarios() {
                        let sp = l.setpoint[e - 1][pi][t];
                        if !nonneg(sp) || cap > sp + 1e-12 {
                            push(
                                "curtailment within setpoint",
                                format!("{loc}, scenario {pi}, period {t}"),
                                format!("max curtailment {cap} exceeds setpoint {sp}"),
                            );
                            break;
                        }
                    }
                }
            }
        }
        for (j, l) in self.loads.deferrable.iter().enumerate() {
            for e in 1..=e_max {
                let st = tree.stage(e);
                let loc = format!("deferrable load {j}, stage {e}");
                let window = &l.window[e - 1];
                if let Some(&t) = window.iter().find(|&&t| t >= st.num_periods()) {
                    push("window within day", loc.clone(), format!("period {t} does not exist"));
                    continue;
                }
                if !window.contains(&l.reference_start[e - 1]) {
                    push(
                        "reference start in window",
                        loc.clone(),
                        format!("reference start {} outside window", l.reference_start[e - 1]),
                    );
                }
                if l.duration_hours[e - 1] < 1 || !nonneg(l.power[e - 1]) {
                    push(
                        "deferrable requirement",
                        loc.clone(),
                        "duration must be >= 1 hour and power >= 0".into(),
                    );
                }
                if self.feasible_starts(j, e).is_empty() {
                    push(
                        "deferrable feasible start",
                        loc.clone(),
                        "no start in the window completes within the day".into(),
                    );
                }
                if let Some(&t) = window.iter().find(|&&t| !nonneg(l.discomfort[e - 1][t])) {
                    push("non-negative discomfort", format!("{loc}, period {t}"), "D2 < 0".into());
                }
            }
        }
        let nd = self.num_deferrable();
        for &(a, b) in &self.loads.incompatible {
            if a >= nd || b >= nd || a == b {
                push("incompatibility pair", format!("pair ({a},{b})"), "must name two distinct deferrable loads".into());
            }
        }
        for p in &self.loads.precedence {
            if p.before >= nd || p.after >= nd || p.before == p.after {
                push(
                    "precedence pair",
                    format!("pair ({},{})", p.before, p.after),
                    "must name two distinct deferrable loads".into(),
                );
            }
        }

        for e in 1..=e_max {
            if !nonneg(self.discomfort.max_expected[e - 1]) {
                push(
                    "non-negative discomfort cap",
                    format!("stage {e}"),
                    format!("cap {}", self.discomfort.max_expected[e - 1]),
                );
            }
            for (p, prof) in self.discomfort.profiles[e - 1].iter().enumerate() {
                let loc = format!("stage {e}, profile {p}");
                if prof.expected_excess > prof.max_excess {
                    push(
                        "expected excess exceeds max excess",
                        loc.clone(),
                        format!("{} > {}", prof.expected_excess, prof.max_excess),
                    );
                }
                if !(0.0..=1.0).contains(&prof.prob_bound) {
                    push("probability bound range", loc.clone(), format!("{}", prof.prob_bound));
                }
                if !nonneg(prof.max_excess) || !nonneg(prof.expected_excess) || !nonneg(prof.threshold) {
                    push("non-negative profile data", loc, "threshold and excess fractions must be >= 0".into());
                }
            }
        }
        out
    }

    /// Periods needed to supply `m1` hours when starting at `t_start`.
    pub fn derive_m2(&self, j: usize, e: usize, t_start: usize) -> Result<usize, InstanceError> {
        let need = self.loads.deferrable[j].duration_hours[e - 1];
        let periods = &self.tree.stage(e).periods;
        let mut acc = 0u32;
        for (k, p) in periods.iter().enumerate().skip(t_start) {
            acc += p.hours;
            if acc >= need {
                return Ok(k - t_start + 1);
            }
        }
        Err(InstanceError::InsufficientHours {
            load: j,
            stage: e,
            start: t_start,
        })
    }

    /// Window periods from which the requirement completes within the day.
    pub fn feasible_starts(&self, j: usize, e: usize) -> Vec<usize> {
        let mut starts: Vec<usize> = self.loads.deferrable[j].window[e - 1]
            .iter()
            .copied()
            .filter(|&t| self.derive_m2(j, e, t).is_ok())
            .collect();
        starts.sort_unstable();
        starts.dedup();
        starts
    }

    /// Start periods whose supply interval covers period `t`.
    pub fn supply_starts(&self, j: usize, e: usize, t: usize) -> Vec<usize> {
        self.feasible_starts(j, e)
            .into_iter()
            .filter(|&s| {
                let m2 = self.derive_m2(j, e, s).expect("feasible start");
                s <= t && t < s + m2
            })
            .collect()
    }

    /// Operational nodes `q'` whose start forces supply of load `j` at node `q`.
    pub fn supply_window_set(&self, j: usize, e: usize, q: usize) -> Vec<usize> {
        let ops = &self.tree.stage(e).ops;
        let node = ops.nodes()[q];
        self.supply_starts(j, e, node.period)
            .into_iter()
            .filter_map(|s| ops.node(node.scenario, s))
            .collect()
    }

    /// Start periods of the later load admissible after `before` starts at `t`.
    pub fn precedence_periods(&self, pair: usize, e: usize, t: usize) -> Vec<usize> {
        let p = &self.loads.precedence[pair];
        let Ok(m2) = self.derive_m2(p.before, e, t) else {
            return Vec::new();
        };
        let earliest = t + m2 + p.latency;
        self.feasible_starts(p.after, e)
            .into_iter()
            .filter(|&s| s >= earliest)
            .collect()
    }

    /// Operational-node form of [`precedence_periods`](Self::precedence_periods).
    pub fn precedence_set(&self, pair: usize, e: usize, q: usize) -> Vec<usize> {
        let ops = &self.tree.stage(e).ops;
        let node = ops.nodes()[q];
        self.precedence_periods(pair, e, node.period)
            .into_iter()
            .filter_map(|s| ops.node(node.scenario, s))
            .collect()
    }

    /// Deferrable start pairs `(t, t')` of loads `a`, `b` with overlapping
    /// supply intervals.
    pub fn overlapping_starts(&self, a: usize, b: usize, e: usize) -> Vec<(usize, usize)> {
        let sa = self.feasible_starts(a, e);
        let sb = self.feasible_starts(b, e);
        let mut out = Vec::new();
        for &t in &sa {
            let end_a = t + self.derive_m2(a, e, t).expect("feasible start") - 1;
            for &u in &sb {
                let end_b = u + self.derive_m2(b, e, u).expect("feasible start") - 1;
                if t <= end_b && u <= end_a {
                    out.push((t, u));
                }
            }
        }
        out
    }

    /// True when node `n` is a leaf of the strategic tree.
    pub fn is_leaf(&self, n: NodeId) -> bool {
        self.tree.is_leaf(n)
    }

    /// Whether the SD constraint system has any profile to enforce.
    pub fn has_profiles(&self) -> bool {
        self.discomfort.profiles.iter().any(|p| !p.is_empty())
    }
}
