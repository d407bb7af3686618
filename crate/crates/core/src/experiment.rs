//! Table-style experiment runs: a JSON configuration names instances,
//! variants, methods and bound schemes; the runner writes one JSON per run, a
//! consolidated CSV and a provenance record.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bounds::{compute_bound, vsd, BoundOptions, BoundRequest};
use crate::heuristics::{sfr3, srh, write_iteration_log, Sfr3Params};
use crate::instance::{load_instance, Instance};
use crate::io::write_atomic;
use crate::milp::SolverControls;
use crate::model::{build_model, check_feasibility, solve_monolithic, Fixings, Scope, Solution, Variant};
use crate::scengen::{synthetic_instance, Size};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Where an instance comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstanceSource {
    Generated { size: String, seed: u64 },
    File { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum MethodSpec {
    Monolithic,
    Sfr3 {
        strategy: String,
        #[serde(default)]
        seed: u64,
    },
    Srh,
}

impl MethodSpec {
    pub fn label(&self) -> String {
        match self {
            MethodSpec::Monolithic => "monolithic".into(),
            MethodSpec::Sfr3 { strategy, seed } => format!("sfr3[{strategy};seed={seed}]"),
            MethodSpec::Srh => "srh".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub instances: Vec<InstanceSource>,
    pub variants: Vec<Variant>,
    #[serde(default)]
    pub methods: Vec<MethodSpec>,
    #[serde(default)]
    pub bounds: Vec<BoundRequest>,
    /// Compute the value of the strategic decision for every method result.
    #[serde(default)]
    pub vsd: bool,
    #[serde(default)]
    pub controls: SolverControls,
    #[serde(default = "one")]
    pub jobs: usize,
}

fn one() -> usize {
    1
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
            path: path.into(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| ExperimentError::Config(e.to_string()))
    }
}

/// One row of the consolidated table.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub instance: String,
    pub variant: String,
    /// `method` or `bound`.
    pub kind: String,
    pub name: String,
    pub stages: usize,
    pub nodes: usize,
    pub scenarios: usize,
    pub constraints: usize,
    pub variables: usize,
    pub integers: usize,
    pub z: Option<f64>,
    /// Relative distance to the monolithic optimum of the same variant.
    pub gap: Option<f64>,
    /// Cost over the SRH cost, for methods.
    pub gr: Option<f64>,
    pub vsd: Option<f64>,
    pub audit: String,
    pub status: String,
    /// Per-run JSON, relative to the output directory.
    pub file: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub instance: String,
    pub variant: String,
    pub name: String,
    pub time: f64,
    /// Time over the SRH time, for methods.
    pub tr: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Provenance {
    pub experiment: String,
    pub crate_version: String,
    pub solver: String,
    pub controls: SolverControls,
    pub instances: Vec<InstanceSource>,
    pub seeds: Vec<u64>,
    pub config: ExperimentConfig,
}

#[derive(Clone, Debug)]
pub struct ExperimentSummary {
    pub rows: Vec<ResultRow>,
    pub timings: Vec<TimingRow>,
    pub failures: usize,
    pub out_dir: PathBuf,
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

fn resolve(src: &InstanceSource, base: &Path) -> Result<Instance, String> {
    match src {
        InstanceSource::Generated { size, seed } => {
            let size: Size = size.parse().map_err(|e| format!("{e}"))?;
            synthetic_instance(&size, *seed).map_err(|e| e.to_string())
        }
        InstanceSource::File { path } => load_instance(base.join(path)).map_err(|e| e.to_string()),
    }
}

struct Writer<'a> {
    dir: &'a Path,
}

impl Writer<'_> {
    fn put(&self, name: &str, bytes: &[u8]) -> Result<(), ExperimentError> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes).map_err(|source| ExperimentError::Io { path, source })
    }
}

fn relative_gap(z: f64, reference: f64) -> f64 {
    (z - reference) / reference.abs().max(1e-10)
}

/// Runs the configured matrix into `out_dir`. Sub-run failures are recorded
/// in the table and counted; only I/O problems abort.
pub fn run_experiment(config: &ExperimentConfig, base: &Path, out_dir: &Path) -> Result<ExperimentSummary, ExperimentError> {
    if config.instances.is_empty() || config.variants.is_empty() {
        return Err(ExperimentError::Config("needs at least one instance and one variant".into()));
    }
    let w = Writer { dir: out_dir };
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    let mut failures = 0;
    for src in &config.instances {
        let inst = match resolve(src, base) {
            Ok(i) => i,
            Err(e) => {
                failures += 1;
                rows.push(ResultRow {
                    instance: format!("{src:?}"),
                    kind: "instance".into(),
                    status: format!("failed: {e}"),
                    ..ResultRow::default()
                });
                continue;
            }
        };
        let iname = slug(&inst.meta.name);
        w.put(&format!("{iname}.instance.json"), inst.to_json().as_bytes())?;
        let tree = &inst.tree;
        for &variant in &config.variants {
            let dims = build_model(&inst, variant, &Scope::full(tree), &Fixings::new()).map(|b| b.stats());
            let base_row = ResultRow {
                instance: inst.meta.name.clone(),
                variant: variant.to_string(),
                stages: tree.num_stages(),
                nodes: tree.num_nodes(),
                scenarios: tree.num_scenarios(),
                constraints: dims.as_ref().map_or(0, |s| s.constraints),
                variables: dims.as_ref().map_or(0, |s| s.variables),
                integers: dims.as_ref().map_or(0, |s| s.integers + s.binaries),
                ..ResultRow::default()
            };
            let first_method = rows.len();
            let mut method_times = Vec::new();
            for m in &config.methods {
                let label = m.label();
                let file = format!("{iname}.{variant}.{}.json", slug(&label));
                let start = Instant::now();
                let result: Result<(Solution, Option<String>), String> = match m {
                    MethodSpec::Monolithic => solve_monolithic(&inst, variant, &config.controls)
                        .map(|(s, _)| (s, None))
                        .map_err(|e| e.to_string()),
                    MethodSpec::Sfr3 { strategy, seed } => Sfr3Params::preset(strategy, *seed)
                        .map_err(|e| e.to_string())
                        .and_then(|mut p| {
                            p.controls = config.controls.clone();
                            p.jobs = config.jobs;
                            sfr3(&inst, variant, &p).map_err(|e| e.to_string())
                        })
                        .map(|run| (run.solution, Some(iteration_csv(&run.log)))),
                    MethodSpec::Srh => srh(&inst, variant, &config.controls, config.jobs)
                        .map(|run| (run.solution, Some(iteration_csv(&run.log))))
                        .map_err(|e| e.to_string()),
                };
                let time = start.elapsed().as_secs_f64();
                let mut row = ResultRow {
                    kind: "method".into(),
                    name: label.clone(),
                    ..base_row.clone()
                };
                match result {
                    Ok((sol, log)) => {
                        let audit = check_feasibility(&inst, variant, &sol);
                        row.z = Some(sol.objective);
                        row.audit = if audit.passed() { "PASS" } else { "FAIL" }.into();
                        row.status = "ok".into();
                        row.file = file.clone();
                        if config.vsd {
                            match vsd(&inst, variant, &sol, &config.controls) {
                                Ok(r) => row.vsd = r.vsd,
                                Err(e) => row.status = format!("vsd failed: {e}"),
                            }
                        }
                        w.put(&file, sol.to_json().as_bytes())?;
                        if let Some(log) = log {
                            w.put(&file.replace(".json", ".iterations.csv"), log.as_bytes())?;
                        }
                    }
                    Err(e) => {
                        failures += 1;
                        row.status = format!("failed: {e}");
                    }
                }
                rows.push(row);
                method_times.push((label, time));
            }
            let z_star = rows[first_method..]
                .iter()
                .find(|r| r.name == "monolithic")
                .and_then(|r| r.z);
            let z_srh = rows[first_method..].iter().find(|r| r.name == "srh").and_then(|r| r.z);
            let t_srh = method_times.iter().find(|(l, _)| l == "srh").map(|(_, t)| *t);
            for r in &mut rows[first_method..] {
                if let Some(z) = r.z {
                    r.gap = z_star.map(|zs| relative_gap(z, zs));
                    r.gr = z_srh.map(|zr| z / zr);
                }
            }
            for (label, time) in method_times {
                timings.push(TimingRow {
                    instance: inst.meta.name.clone(),
                    variant: variant.to_string(),
                    tr: t_srh.map(|t| time / t),
                    name: label,
                    time,
                });
            }
            for req in &config.bounds {
                let label = bound_label(req);
                let file = format!("{iname}.{variant}.{}.json", slug(&label));
                let opts = BoundOptions {
                    controls: config.controls.clone(),
                    jobs: config.jobs,
                    timings: false,
                };
                let start = Instant::now();
                let mut row = ResultRow {
                    kind: "bound".into(),
                    name: label.clone(),
                    ..base_row.clone()
                };
                match compute_bound(&inst, variant, req, &opts) {
                    Ok(rep) => {
                        row.z = Some(rep.value);
                        row.gap = z_star.map(|zs| relative_gap(rep.value, zs));
                        row.status = "ok".into();
                        row.file = file.clone();
                        w.put(&file, rep.to_json().as_bytes())?;
                    }
                    Err(e) => {
                        failures += 1;
                        row.status = format!("failed: {e}");
                    }
                }
                rows.push(row);
                timings.push(TimingRow {
                    instance: inst.meta.name.clone(),
                    variant: variant.to_string(),
                    name: label,
                    time: start.elapsed().as_secs_f64(),
                    tr: None,
                });
            }
        }
    }
    w.put("results.csv", &to_csv(&rows))?;
    w.put("timings.csv", &to_csv(&timings))?;
    let provenance = Provenance {
        experiment: config.name.clone(),
        crate_version: env!("CARGO_PKG_VERSION").into(),
        solver: std::env::var("MHRES_SOLVER").unwrap_or_else(|_| "highs".into()),
        controls: config.controls.clone(),
        instances: config.instances.clone(),
        seeds: config
            .instances
            .iter()
            .filter_map(|s| match s {
                InstanceSource::Generated { seed, .. } => Some(*seed),
                InstanceSource::File { .. } => None,
            })
            .chain(config.methods.iter().filter_map(|m| match m {
                MethodSpec::Sfr3 { seed, .. } => Some(*seed),
                _ => None,
            }))
            .chain(config.bounds.iter().filter_map(|b| b.seed))
            .collect(),
        config: config.clone(),
    };
    let prov = serde_json::to_string_pretty(&provenance).expect("provenance serializes");
    w.put("provenance.json", prov.as_bytes())?;
    Ok(ExperimentSummary {
        rows,
        timings,
        failures,
        out_dir: out_dir.into(),
    })
}

pub fn bound_label(req: &BoundRequest) -> String {
    let mut s = req.scheme.to_string();
    if let Some(g) = req.groups {
        let _ = write!(s, "(G={g};seed={})", req.seed.unwrap_or(0));
    }
    if let Some(e) = req.e_star {
        let _ = write!(s, "(e*={e})");
    }
    s
}

fn iteration_csv(log: &[crate::heuristics::IterationRecord]) -> String {
    let mut buf = Vec::new();
    write_iteration_log(log, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv is utf-8")
}

fn to_csv<T: Serialize>(rows: &[T]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("rows serialize");
    }
    w.into_inner().expect("writing to memory")
}

/// Reads a consolidated CSV back.
pub fn read_results(path: &Path) -> Result<Vec<ResultRow>, ExperimentError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .collect::<Result<Vec<ResultRow>, _>>()
        .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))
}

/// Aligned text table of the consolidated results.
pub fn render_table(rows: &[ResultRow]) -> String {
    let fmt = |v: Option<f64>, pct: bool| match v {
        Some(x) if pct => format!("{:.3}%", 100.0 * x),
        Some(x) => format!("{x:.4}"),
        None => "-".into(),
    };
    let mut out = format!(
        "{:<28} {:<4} {:<6} {:<32} {:>5} {:>7} {:>8} {:>16} {:>10} {:>8} {:>12} {:<5} {}\n",
        "instance", "var", "kind", "name", "nodes", "scen", "cons", "z", "gap", "GR", "VSD", "audit", "status"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<28} {:<4} {:<6} {:<32} {:>5} {:>7} {:>8} {:>16} {:>10} {:>8} {:>12} {:<5} {}",
            r.instance,
            r.variant,
            r.kind,
            r.name,
            r.nodes,
            r.scenarios,
            r.constraints,
            fmt(r.z, false),
            fmt(r.gap, true),
            fmt(r.gr, false),
            fmt(r.vsd, false),
            r.audit,
            r.status
        );
    }
    out
}
