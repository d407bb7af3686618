//! Instance generation: cost-trajectory trees, representative days and
//! synthetic instances of the standard sizes.

mod kmedoids;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::instance::{
    BessTechnology, DeferrableLoad, DiscomfortPolicy, DiscomfortProfile, ElasticLoad, GridParams, Instance, Loads,
    Meta, OpParam, Precedence, PvTechnology, SystemLimits, SCHEMA,
};
use crate::tree::{MultiHorizonTree, NodeId, Period};

pub use kmedoids::{normalize_features, representative_days, Clustering, RepresentativeDay};

#[derive(Debug, thiserror::Error)]
pub enum ScengenError {
    #[error("{0}")]
    Argument(String),
}

/// Cost path followed by a child relative to its parent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Trajectory {
    Root,
    Stable,
    Down,
    Up,
    /// Evenly spaced multiplier, used when the branching is not 3.
    Spaced,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CostNode {
    pub id: NodeId,
    pub stage: usize,
    pub parent: Option<NodeId>,
    pub probability: f64,
    pub trajectory: Trajectory,
    /// Multiplier applied to the parent's costs.
    pub multiplier: f64,
    /// Installation cost per item.
    pub costs: Vec<f64>,
    /// Maintenance cost per item, 1.5% of the installation cost.
    pub maintenance: Vec<f64>,
}

/// Maintenance as a share of the node's installation cost.
pub const MAINTENANCE_SHARE: f64 = 0.015;

/// Per-node cost tables over a balanced tree in breadth-first order.
///
/// With branching 3 the children follow a stable, a downward and an upward
/// trajectory; the downward and upward multipliers are drawn uniformly in
/// `[1 - spread, 1]` and `[1, 1 + spread]`.
pub fn generate_strategic_tree(
    stages: usize,
    branching: usize,
    base_costs: &[f64],
    spread: f64,
    seed: u64,
) -> Result<Vec<CostNode>, ScengenError> {
    if stages < 2 {
        return Err(ScengenError::Argument(format!("need at least 2 stages, got {stages}")));
    }
    if branching < 1 {
        return Err(ScengenError::Argument("branching must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&spread) {
        return Err(ScengenError::Argument(format!("spread {spread} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let with_maint = |costs: Vec<f64>| {
        let maintenance = costs.iter().map(|c| c * MAINTENANCE_SHARE).collect();
        (costs, maintenance)
    };
    let (costs, maintenance) = with_maint(base_costs.to_vec());
    let mut nodes = vec![CostNode {
        id: 0,
        stage: 1,
        parent: None,
        probability: 1.0,
        trajectory: Trajectory::Root,
        multiplier: 1.0,
        costs,
        maintenance,
    }];
    let mut frontier = vec![0];
    for e in 2..=stages {
        let mut next = Vec::new();
        for &p in &frontier {
            for k in 0..branching {
                let (trajectory, multiplier) = if branching == 3 {
                    match k {
                        0 => (Trajectory::Stable, 1.0),
                        1 => (Trajectory::Down, 1.0 - spread * rng.gen::<f64>()),
                        _ => (Trajectory::Up, 1.0 + spread * rng.gen::<f64>()),
                    }
                } else if branching == 1 {
                    (Trajectory::Stable, 1.0)
                } else {
                    let step = 2.0 * spread / (branching - 1) as f64;
                    (Trajectory::Spaced, 1.0 - spread + step * k as f64)
                };
                let parent: &CostNode = &nodes[p];
                let probability = parent.probability / branching as f64;
                let (costs, maintenance) = with_maint(parent.costs.iter().map(|c| c * multiplier).collect());
                let id = nodes.len();
                nodes.push(CostNode {
                    id,
                    stage: e,
                    parent: Some(p),
                    probability,
                    trajectory,
                    multiplier,
                    costs,
                    maintenance,
                });
                next.push(id);
            }
        }
        frontier = next;
    }
    Ok(nodes)
}

/// Dimensions of a generated instance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub stages: usize,
    pub branching: usize,
    pub scenarios: usize,
    pub periods: usize,
    pub pv: usize,
    pub bess: usize,
    pub elastic: usize,
    pub deferrable: usize,
    pub incompatible: usize,
    pub precedence: usize,
}

impl Dims {
    pub fn num_nodes(&self) -> usize {
        (0..self.stages).map(|k| self.branching.pow(k as u32)).sum()
    }

    pub fn num_scenarios(&self) -> usize {
        self.branching.pow(self.stages as u32 - 1)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Size {
    Small,
    Medium,
    Large,
    Custom(Dims),
}

impl Size {
    pub fn dims(&self) -> Dims {
        let table = |stages, scenarios, elastic, deferrable, pairs| Dims {
            stages,
            branching: 3,
            scenarios,
            periods: 24,
            pv: 3,
            bess: 2,
            elastic,
            deferrable,
            incompatible: pairs,
            precedence: pairs,
        };
        match self {
            Size::Small => table(3, 10, 25, 25, 10),
            Size::Medium => table(4, 20, 40, 35, 15),
            Size::Large => table(6, 20, 75, 75, 50),
            Size::Custom(d) => d.clone(),
        }
    }

    /// Expected-discomfort cap per node.
    pub fn discomfort_cap(&self) -> f64 {
        match self {
            Size::Small | Size::Medium => 20.0,
            Size::Large => 40.0,
            Size::Custom(d) => 20.0 * (d.elastic + d.deferrable) as f64 / 50.0,
        }
    }
}

impl fmt::Display for Size {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Size::Small => f.write_str("small"),
            Size::Medium => f.write_str("medium"),
            Size::Large => f.write_str("large"),
            Size::Custom(d) => write!(
                f,
                "custom:stages={},branching={},scenarios={},periods={},pv={},bess={},elastic={},deferrable={},incompatible={},precedence={}",
                d.stages, d.branching, d.scenarios, d.periods, d.pv, d.bess, d.elastic, d.deferrable, d.incompatible, d.precedence
            ),
        }
    }
}

impl FromStr for Size {
    type Err = ScengenError;

    /// `small`, `medium`, `large` or `custom:key=value,...` with keys as in
    /// [`Dims`]; omitted keys default to a single-scenario two-stage shape
    /// without loads.
    fn from_str(s: &str) -> Result<Self, ScengenError> {
        match s {
            "small" => return Ok(Size::Small),
            "medium" => return Ok(Size::Medium),
            "large" => return Ok(Size::Large),
            _ => {}
        }
        let Some(rest) = s.strip_prefix("custom") else {
            return Err(ScengenError::Argument(format!(
                "unknown size {s:?} (expected small, medium, large or custom:...)"
            )));
        };
        let mut d = Dims {
            stages: 2,
            branching: 1,
            scenarios: 1,
            periods: 2,
            pv: 1,
            bess: 1,
            elastic: 0,
            deferrable: 0,
            incompatible: 0,
            precedence: 0,
        };
        for kv in rest.trim_start_matches(':').split(',').filter(|kv| !kv.is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| ScengenError::Argument(format!("expected key=value, got {kv:?}")))?;
            let v: usize = v
                .trim()
                .parse()
                .map_err(|_| ScengenError::Argument(format!("{k}: {v:?} is not a count")))?;
            let slot = match k.trim() {
                "stages" | "E" => &mut d.stages,
                "branching" => &mut d.branching,
                "scenarios" => &mut d.scenarios,
                "periods" | "T" => &mut d.periods,
                "pv" => &mut d.pv,
                "bess" => &mut d.bess,
                "elastic" => &mut d.elastic,
                "deferrable" => &mut d.deferrable,
                "incompatible" => &mut d.incompatible,
                "precedence" => &mut d.precedence,
                other => return Err(ScengenError::Argument(format!("unknown dimension {other:?}"))),
            };
            *slot = v;
        }
        Ok(Size::Custom(d))
    }
}

/// Anchor costs in €/W for the PV technologies and BESS technologies.
pub const PV_COST_PER_W: [f64; 3] = [2.5, 2.1, 1.95];
pub const BESS_COST_PER_W: [f64; 2] = [1.05, 1.3];
pub const BUDGET_PER_NODE: f64 = 20_000.0;
pub const DAYS_PER_STAGE: u32 = 365;
pub const COST_SPREAD: f64 = 0.3;
/// Residual value as a share of the leaf installation cost, reflecting the
/// lifetime left after the horizon.
pub const PV_RESIDUAL_SHARE: f64 = 0.7;
pub const BESS_RESIDUAL_SHARE: f64 = 0.5;
pub const SD_PROB_BOUND: f64 = 0.05;
pub const SD_MAX_EXCESS: f64 = 0.25;
pub const SD_EXPECTED_EXCESS: f64 = 0.05;

const PANEL_KW: f64 = 0.3;
const BESS_UNIT_KWH: f64 = 5.0;
const BESS_UNIT_KW: f64 = 2.5;

/// Splits 24 hours into `t` periods, the earlier ones taking the remainder.
pub fn split_day(t: usize) -> Vec<u32> {
    let base = 24 / t as u32;
    let extra = 24 % t as u32;
    (0..t as u32).map(|k| base + u32::from(k < extra)).collect()
}

fn sun(hour: usize) -> f64 {
    if (6..20).contains(&hour) {
        (std::f64::consts::PI * (hour as f64 + 0.5 - 6.0) / 14.0).sin().max(0.0)
    } else {
        0.0
    }
}

fn base_shape(hour: usize) -> f64 {
    let morning = (-((hour as f64 - 7.5) / 1.5).powi(2)).exp();
    let evening = (-((hour as f64 - 19.5) / 2.0).powi(2)).exp();
    0.35 + 0.4 * morning + 0.7 * evening
}

fn tariff(hour: usize) -> f64 {
    match hour {
        0..=6 => 0.12,
        17..=20 => 0.30,
        _ => 0.21,
    }
}

/// Operational description of one stage: period lengths, scenario
/// probabilities and per-scenario day factors.
struct StageDays {
    hours: Vec<u32>,
    pv: Vec<bool>,
    probs: Vec<f64>,
    /// `[scenario][period]` average base load (kW).
    load: Vec<Vec<f64>>,
    /// `[scenario][period]` average sun availability in [0, 1].
    availability: Vec<Vec<f64>>,
    /// `[scenario][period]` import price (€/kWh).
    import: Vec<Vec<f64>>,
    /// `[scenario]` load factor of the day.
    load_factor: Vec<f64>,
}

fn stage_days(rng: &mut ChaCha8Rng, e: usize, scenarios: usize, periods: usize) -> StageDays {
    let history = (4 * scenarios).max(8);
    let mut factors = Vec::with_capacity(history);
    let mut features = Vec::with_capacity(history);
    for _ in 0..history {
        let lf: f64 = rng.gen_range(0.7..1.3);
        let sf: f64 = rng.gen_range(0.2..1.0);
        let pl: f64 = rng.gen_range(0.85..1.15);
        let mut f: Vec<f64> = (0..24).map(|h| base_shape(h) * lf).collect();
        f.extend((0..24).map(|h| sun(h) * sf));
        factors.push((lf, sf, pl));
        features.push(f);
    }
    let clusters = representative_days(&features, scenarios, rng.gen()).expect("history holds enough days");
    let growth = 1.02f64.powi(e as i32 - 1);
    let price_growth = 1.03f64.powi(e as i32 - 1);
    let hours = split_day(periods);
    let mut bounds = Vec::with_capacity(periods);
    let mut h0 = 0usize;
    for &h in &hours {
        bounds.push((h0, h0 + h as usize));
        h0 += h as usize;
    }
    let pv = bounds.iter().map(|&(a, b)| (a..b).any(|h| sun(h) > 0.0)).collect();
    let avg = |a: usize, b: usize, f: &dyn Fn(usize) -> f64| (a..b).map(f).sum::<f64>() / (b - a) as f64;
    let mut out = StageDays {
        hours,
        pv,
        probs: Vec::new(),
        load: Vec::new(),
        availability: Vec::new(),
        import: Vec::new(),
        load_factor: Vec::new(),
    };
    for day in &clusters.days {
        let (lf, sf, pl) = factors[day.index];
        out.probs.push(day.probability);
        out.load_factor.push(lf);
        out.load.push(bounds.iter().map(|&(a, b)| avg(a, b, &|h| base_shape(h) * lf * growth)).collect());
        out.availability.push(bounds.iter().map(|&(a, b)| avg(a, b, &|h| sun(h) * sf)).collect());
        out.import.push(bounds.iter().map(|&(a, b)| avg(a, b, &|h| tariff(h) * pl * price_growth)).collect());
    }
    out
}

fn round(v: f64, digits: i32) -> f64 {
    let s = 10f64.powi(digits);
    (v * s).round() / s
}

/// Synthetic instance of the given size. The reference schedule (no
/// curtailment, every deferrable load at its reference start) is always
/// feasible and has zero discomfort.
pub fn synthetic_instance(size: &Size, seed: u64) -> Result<Instance, ScengenError> {
    let d = size.dims();
    if d.stages < 2 || d.branching < 1 || d.scenarios < 1 || d.periods < 1 || d.periods > 24 {
        return Err(ScengenError::Argument(format!(
            "need stages >= 2, branching >= 1, scenarios >= 1 and 1 <= periods <= 24 (got {d:?})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e_max = d.stages;

    let days: Vec<StageDays> = (1..=e_max).map(|e| stage_days(&mut rng, e, d.scenarios, d.periods)).collect();
    let stage_specs = days
        .iter()
        .map(|s| {
            let periods = s.hours.iter().zip(&s.pv).map(|(&hours, &pv)| Period { hours, pv }).collect();
            (DAYS_PER_STAGE, periods, s.probs.clone())
        })
        .collect();
    let tree = MultiHorizonTree::balanced(stage_specs, d.branching);
    let t_len = d.periods;

    // Strategic cost trajectories: one item per PV and BESS technology.
    let pv_unit: Vec<f64> = (0..d.pv)
        .map(|i| PV_COST_PER_W[i % 3] * (1.0 + 0.05 * (i / 3) as f64) * 1000.0 * PANEL_KW)
        .collect();
    let bess_unit: Vec<f64> = (0..d.bess)
        .map(|b| BESS_COST_PER_W[b % 2] * (1.0 + 0.05 * (b / 2) as f64) * 1000.0 * BESS_UNIT_KW)
        .collect();
    let mut base = pv_unit.clone();
    base.extend(&bess_unit);
    let cost_tree = generate_strategic_tree(e_max, d.branching, &base, COST_SPREAD, rng.gen())?;
    assert_eq!(cost_tree.len(), tree.num_nodes());
    let node_vec = |f: &dyn Fn(&crate::scengen::CostNode) -> f64| -> Vec<f64> {
        cost_tree.iter().map(|c| round(f(c), 6)).collect()
    };

    let op_from = |f: &dyn Fn(usize, usize, usize) -> f64| -> OpParam {
        days.iter()
            .enumerate()
            .map(|(e, s)| {
                (0..s.probs.len())
                    .map(|p| (0..s.hours.len()).map(|t| round(f(e, p, t), 6)).collect())
                    .collect()
            })
            .collect()
    };

    let pv_technologies: Vec<PvTechnology> = (0..d.pv)
        .map(|i| {
            let prep = rng.gen_range(300.0..700.0);
            PvTechnology {
                name: format!("pv-{i}"),
                capacity_kw: PANEL_KW,
                max_panels: 40.0,
                prep_cost: node_vec(&|c| prep * c.multiplier),
                install_cost: node_vec(&|c| c.costs[i]),
                maint_cost: node_vec(&|c| c.maintenance[i]),
                residual_value: node_vec(&|c| PV_RESIDUAL_SHARE * c.costs[i]),
                gen_cost: op_from(&|_, _, _| 0.005),
                availability: op_from(&|e, p, t| if days[e].pv[t] { days[e].availability[p][t] * (1.0 - 0.03 * i as f64) } else { 0.0 }),
            }
        })
        .collect();
    let bess_technologies: Vec<BessTechnology> = (0..d.bess)
        .map(|b| {
            let item = d.pv + b;
            let prep = rng.gen_range(200.0..500.0);
            BessTechnology {
                name: format!("bess-{b}"),
                unit_capacity_kwh: BESS_UNIT_KWH,
                loss: vec![0.01 + 0.01 * b as f64; e_max],
                charge_depth: vec![0.5; e_max],
                discharge_depth: vec![0.9; e_max],
                op_cost: 0.01,
                max_units: 4.0,
                prep_cost: node_vec(&|c| prep * c.multiplier),
                install_cost: node_vec(&|c| c.costs[item]),
                maint_cost: node_vec(&|c| c.maintenance[item]),
                residual_value: node_vec(&|c| BESS_RESIDUAL_SHARE * c.costs[item]),
            }
        })
        .collect();
    let limits = SystemLimits {
        max_total_panels: 60.0,
        min_panel_batch: 4.0,
        max_total_units: 6.0,
        min_unit_batch: 1.0,
        budget: vec![BUDGET_PER_NODE; tree.num_nodes()],
    };

    // Elastic loads: contiguous windows, curtailment up to half the setpoint.
    let mut elastic = Vec::with_capacity(d.elastic);
    for j in 0..d.elastic {
        let len = rng.gen_range((t_len / 4).max(1)..=(t_len / 2).max(1));
        let start = rng.gen_range(0..=t_len - len);
        let window: Vec<usize> = (start..start + len).collect();
        let level: f64 = rng.gen_range(0.1..0.5);
        let noise: Vec<Vec<Vec<f64>>> = days
            .iter()
            .map(|s| (0..s.probs.len()).map(|_| (0..t_len).map(|_| rng.gen_range(0.9..1.1)).collect()).collect())
            .collect();
        let setpoint = op_from(&|e, p, t| {
            if window.contains(&t) {
                level * days[e].load_factor[p] * noise[e][p][t]
            } else {
                0.0
            }
        });
        let mut max_curtail = vec![vec![0.0; t_len]; e_max];
        let mut ramp = vec![vec![0.0; t_len]; e_max];
        for e in 0..e_max {
            for &t in &window {
                let lo = setpoint[e].iter().map(|r| r[t]).fold(f64::INFINITY, f64::min);
                max_curtail[e][t] = round(0.5 * lo, 6);
                let step = if t > 0 && window.contains(&(t - 1)) {
                    setpoint[e].iter().map(|r| (r[t] - r[t - 1]).abs()).fold(0.0, f64::max)
                } else {
                    0.0
                };
                ramp[e][t] = round(step + 0.05, 6);
            }
        }
        let rate: f64 = rng.gen_range(0.5..2.0);
        elastic.push(ElasticLoad {
            name: format!("elastic-{j}"),
            setpoint,
            window: vec![window; e_max],
            max_curtail,
            ramp,
            discomfort: vec![vec![round(rate, 6); t_len]; e_max],
        });
    }

    // Deferrable loads: the reference start always completes within the day.
    let hours = &days[0].hours;
    let interval = |start: usize, need: u32| -> Option<usize> {
        let mut acc = 0;
        for (t, &h) in hours.iter().enumerate().skip(start) {
            acc += h;
            if acc >= need {
                return Some(t);
            }
        }
        None
    };
    let mut deferrable = Vec::with_capacity(d.deferrable);
    let mut reference: Vec<(usize, usize)> = Vec::with_capacity(d.deferrable);
    for j in 0..d.deferrable {
        let need: u32 = rng.gen_range(1..=3);
        let starts: Vec<usize> = (0..t_len).filter(|&t| interval(t, need).is_some()).collect();
        let tau = *starts.choose(&mut rng).expect("24 hours fit any requirement up to 3 hours");
        let width = (t_len / 3).max(1);
        let lo = tau.saturating_sub(rng.gen_range(0..=width));
        let hi = (tau + rng.gen_range(0..=width)).min(t_len - 1);
        let rate: f64 = rng.gen_range(0.5..1.5);
        reference.push((tau, interval(tau, need).expect("feasible reference start")));
        deferrable.push(DeferrableLoad {
            name: format!("deferrable-{j}"),
            reference_start: vec![tau; e_max],
            power: vec![round(rng.gen_range(0.5..2.0), 6); e_max],
            duration_hours: vec![need; e_max],
            window: vec![(lo..=hi).collect(); e_max],
            discomfort: vec![(0..t_len).map(|t| round(rate * (t as f64 - tau as f64).abs(), 6)).collect(); e_max],
        });
    }

    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for a in 0..d.deferrable {
        for b in 0..d.deferrable {
            if a != b {
                pairs.push((a, b));
            }
        }
    }
    pairs.shuffle(&mut rng);
    let mut incompatible = Vec::new();
    for &(a, b) in &pairs {
        if incompatible.len() == d.incompatible {
            break;
        }
        let (ra, rb) = (reference[a], reference[b]);
        let disjoint = ra.1 < rb.0 || rb.1 < ra.0;
        if a < b && disjoint {
            incompatible.push((a, b));
        }
    }
    let mut precedence = Vec::new();
    for &(a, b) in &pairs {
        if precedence.len() == d.precedence {
            break;
        }
        let latency = rng.gen_range(0..=1);
        if reference[b].0 >= reference[a].1 + 1 + latency {
            precedence.push(Precedence {
                before: a,
                after: b,
                latency,
            });
        }
    }

    let cap = size.discomfort_cap();
    let inst = Instance {
        schema: SCHEMA.into(),
        pv_technologies,
        bess_technologies,
        limits,
        loads: Loads {
            base: op_from(&|e, p, t| days[e].load[p][t]),
            elastic,
            deferrable,
            incompatible,
            precedence,
        },
        grid: GridParams {
            import_price: op_from(&|e, p, t| days[e].import[p][t]),
            export_price: op_from(&|e, p, t| days[e].import[p][t] * 0.25),
        },
        discomfort: DiscomfortPolicy {
            max_expected: vec![cap; e_max],
            profiles: vec![
                vec![DiscomfortProfile {
                    threshold: cap,
                    prob_bound: SD_PROB_BOUND,
                    max_excess: SD_MAX_EXCESS,
                    expected_excess: SD_EXPECTED_EXCESS,
                }];
                e_max
            ],
        },
        meta: Meta {
            name: format!("synthetic-{}-seed{seed}", match size {
                Size::Custom(_) => "custom".to_string(),
                s => s.to_string(),
            }),
            currency: "EUR".into(),
            seed: Some(seed),
        },
        tree,
    };
    // Round-trip through JSON so the returned value is exactly what a saved
    // file reloads to.
    Instance::from_json(&inst.to_json()).map_err(|e| ScengenError::Argument(format!("generated instance invalid: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_branch_keeps_cost() {
        let t = generate_strategic_tree(2, 3, &[2.1], 0.0, 1).unwrap();
        assert_eq!(t[1].trajectory, Trajectory::Stable);
        assert_eq!(t[1].costs, vec![2.1]);
    }

    #[test]
    fn maintenance_is_share_of_install() {
        let t = generate_strategic_tree(2, 1, &[100.0], 0.3, 1).unwrap();
        assert!((t[0].maintenance[0] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn bad_tree_arguments() {
        assert!(generate_strategic_tree(1, 3, &[1.0], 0.3, 0).is_err());
        assert!(generate_strategic_tree(3, 0, &[1.0], 0.3, 0).is_err());
    }

    #[test]
    fn day_split_sums_to_24() {
        for t in 1..=24 {
            assert_eq!(split_day(t).iter().sum::<u32>(), 24);
        }
    }

    #[test]
    fn custom_size_parses() {
        let s: Size = "custom:stages=2,branching=1,scenarios=1,periods=2".parse().unwrap();
        assert_eq!(s.dims().num_nodes(), 2);
        assert!("custom:bogus=1".parse::<Size>().is_err());
    }
}
