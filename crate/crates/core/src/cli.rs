//! Command-line front end. Exit codes: 0 success, 1 audit failure, 2 usage
//! or input error, 3 solver failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::bounds::{compute_bound, vsd, BoundOptions, BoundRequest, Scheme};
use crate::experiment::{read_results, render_table, run_experiment, ExperimentConfig};
use crate::heuristics::{sfr3, srh, write_iteration_log, HeuristicRun, Sfr3Params};
use crate::instance::{load_instance, Instance};
use crate::io::write_atomic;
use crate::milp::{self, lp::write_lp, SolverControls};
use crate::model::{build_model, check_feasibility, nodal_discomfort_stats, Fixings, Scope, Solution, Variant};
use crate::scengen::{representative_days, synthetic_instance, Size};

pub const EXIT_OK: i32 = 0;
pub const EXIT_AUDIT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "mhres", version, about = "Multi-horizon PV and battery investment planning")]
pub struct Cli {
    /// Worker threads for independent subproblems.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Method {
    Monolithic,
    Sfr3,
    Srh,
}

#[derive(clap::Args, Debug)]
pub struct SolverArgs {
    /// Relative MIP gap.
    #[arg(long, default_value_t = 1e-6)]
    pub gap: f64,
    /// Time limit per solve, in seconds.
    #[arg(long)]
    pub time_limit: Option<f64>,
}

impl SolverArgs {
    fn controls(&self) -> SolverControls {
        SolverControls {
            rel_gap: self.gap,
            time_limit: self.time_limit,
            ..SolverControls::default()
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Writes a synthetic instance.
    Generate {
        /// small, medium, large or custom:key=value,...
        #[arg(long)]
        size: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Picks representative days from a CSV of daily profiles (one row per day).
    Repdays {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV of (day, probability, members); printed when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solves an instance with the full model or a matheuristic.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value = "nod")]
        variant: Variant,
        #[arg(long, value_enum, default_value = "monolithic")]
        method: Method,
        /// SFR3 preset: weak-myopic, stronger-myopic, multistage-myopic:K or relaxed:K,R,PHI.
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long)]
        e_hat: Option<usize>,
        #[arg(long, default_value_t = 0)]
        e_hat_r: usize,
        #[arg(long, default_value_t = 0.0)]
        phi: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Iteration log CSV for sfr3 and srh.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Writes the full model in LP format and exits without solving.
        #[arg(long)]
        lp: Option<PathBuf>,
    },
    /// Computes a lower bound.
    Bound {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value = "nod")]
        variant: Variant,
        #[arg(long)]
        scheme: Scheme,
        /// Group count for smg.
        #[arg(long)]
        g: Option<usize>,
        /// Breaking stage for smc.
        #[arg(long)]
        e_star: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        solver: SolverArgs,
        /// Keep wall times in the report.
        #[arg(long)]
        timings: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Value of the strategic decision of a feasible solution.
    Vsd {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value = "nod")]
        variant: Variant,
        #[arg(long)]
        feasible: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-checks a solution against every constraint family.
    Audit {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        solution: PathBuf,
        /// Defaults to the variant recorded in the solution.
        #[arg(long)]
        variant: Option<Variant>,
        /// Prints the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Runs an experiment configuration.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Prints the consolidated table of an experiment directory.
    Report {
        #[arg(long)]
        results: PathBuf,
    },
}

/// Error carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(e: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_USAGE,
            message: e.to_string(),
        }
    }

    fn solver(e: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_SOLVER,
            message: e.to_string(),
        }
    }
}

fn read_instance(path: &Path) -> Result<Instance, CliError> {
    load_instance(path).map_err(CliError::usage)
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    write_atomic(path, bytes).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => write(p, text.as_bytes()),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

/// Parses `args` and runs the command; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn run(cli: Cli) -> Result<i32, CliError> {
    milp::backend_from_env().map_err(CliError::usage)?;
    let jobs = cli.jobs.max(1);
    match cli.command {
        Command::Generate { size, seed, out } => {
            let size: Size = size.parse().map_err(CliError::usage)?;
            let inst = synthetic_instance(&size, seed).map_err(CliError::usage)?;
            inst.save(&out).map_err(CliError::usage)?;
            println!(
                "{}: {} stages, {} strategic nodes, {} scenarios",
                inst.meta.name,
                inst.tree.num_stages(),
                inst.tree.num_nodes(),
                inst.tree.num_scenarios()
            );
            Ok(EXIT_OK)
        }
        Command::Repdays { input, k, seed, out } => {
            let profiles = read_profiles(&input)?;
            let c = representative_days(&profiles, k, seed).map_err(CliError::usage)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["day", "probability", "members"]).map_err(CliError::usage)?;
            for d in &c.days {
                w.write_record([d.index.to_string(), d.probability.to_string(), d.members.len().to_string()])
                    .map_err(CliError::usage)?;
            }
            let bytes = w.into_inner().map_err(CliError::usage)?;
            emit(&out, String::from_utf8_lossy(&bytes).trim_end())?;
            Ok(EXIT_OK)
        }
        Command::Solve {
            instance,
            variant,
            method,
            strategy,
            e_hat,
            e_hat_r,
            phi,
            seed,
            solver,
            out,
            log,
            lp,
        } => {
            let inst = read_instance(&instance)?;
            let controls = solver.controls();
            if let Some(path) = lp {
                let built = build_model(&inst, variant, &Scope::full(&inst.tree), &Fixings::new()).map_err(CliError::usage)?;
                write(&path, write_lp(&built.milp).as_bytes())?;
                let s = built.stats();
                println!(
                    "wrote {}: {} constraints, {} variables ({} integer, {} binary)",
                    path.display(),
                    s.constraints,
                    s.variables,
                    s.integers,
                    s.binaries
                );
                return Ok(EXIT_OK);
            }
            let (sol, run): (Solution, Option<HeuristicRun>) = match method {
                Method::Monolithic => {
                    let (sol, outcome) = crate::model::solve_monolithic(&inst, variant, &controls).map_err(CliError::solver)?;
                    println!("status {} best bound {:?}", outcome.status, outcome.best_bound);
                    (sol, None)
                }
                Method::Sfr3 => {
                    let mut params = match (&strategy, e_hat) {
                        (Some(s), None) => Sfr3Params::preset(s, seed).map_err(CliError::usage)?,
                        (None, Some(e)) => Sfr3Params::new(e, e_hat_r, phi, seed),
                        (None, None) => Sfr3Params::preset("weak-myopic", seed).map_err(CliError::usage)?,
                        (Some(_), Some(_)) => return Err(CliError::usage("give either --strategy or --e-hat")),
                    };
                    params.controls = controls;
                    params.jobs = jobs;
                    let r = sfr3(&inst, variant, &params).map_err(|e| match e {
                        crate::heuristics::HeuristicError::Params(_) => CliError::usage(e),
                        _ => CliError::solver(e),
                    })?;
                    (r.solution.clone(), Some(r))
                }
                Method::Srh => {
                    let r = srh(&inst, variant, &controls, jobs).map_err(CliError::solver)?;
                    (r.solution.clone(), Some(r))
                }
            };
            if let (Some(path), Some(r)) = (&log, &run) {
                let mut buf = Vec::new();
                write_iteration_log(&r.log, &mut buf).map_err(CliError::usage)?;
                write(path, &buf)?;
            }
            let audit = check_feasibility(&inst, variant, &sol);
            println!(
                "{variant} cost {:.6} (pv {:.2}, bess {:.2}, operational {:.2}, residual {:.2}) audit {}",
                sol.objective,
                sol.cost.pv_investment,
                sol.cost.bess_investment,
                sol.cost.operational,
                sol.cost.residual_value,
                if audit.passed() { "PASS" } else { "FAIL" }
            );
            if let Some(p) = &out {
                sol.save(p).map_err(CliError::usage)?;
            }
            Ok(if audit.passed() { EXIT_OK } else { EXIT_AUDIT })
        }
        Command::Bound {
            instance,
            variant,
            scheme,
            g,
            e_star,
            seed,
            solver,
            timings,
            out,
        } => {
            let inst = read_instance(&instance)?;
            let req = BoundRequest {
                scheme,
                groups: g,
                seed: Some(seed),
                e_star,
            };
            let opts = BoundOptions {
                controls: solver.controls(),
                jobs,
                timings,
            };
            let rep = compute_bound(&inst, variant, &req, &opts).map_err(|e| match e {
                crate::bounds::BoundError::Params(_) | crate::bounds::BoundError::Tree(_) => CliError::usage(e),
                _ => CliError::solver(e),
            })?;
            if out.is_some() {
                println!("{} {} = {:.6}", scheme, variant, rep.value);
            }
            emit(&out, &rep.to_json())?;
            Ok(EXIT_OK)
        }
        Command::Vsd {
            instance,
            variant,
            feasible,
            solver,
            out,
        } => {
            let inst = read_instance(&instance)?;
            let sol = Solution::load(&feasible).map_err(CliError::usage)?;
            let audit = check_feasibility(&inst, variant, &sol);
            if !audit.passed() {
                return Err(CliError {
                    code: EXIT_AUDIT,
                    message: format!("{} fails the {variant} audit", feasible.display()),
                });
            }
            let r = vsd(&inst, variant, &sol, &solver.controls()).map_err(CliError::solver)?;
            match (&r.finding, r.vsd, r.gr) {
                (Some(f), _, _) => eprintln!("{f}"),
                (None, Some(v), Some(gr)) => eprintln!("VSD {v:.6} GR {gr:.6}"),
                _ => {}
            }
            emit(&out, &serde_json::to_string_pretty(&r).expect("vsd reports serialize"))?;
            Ok(EXIT_OK)
        }
        Command::Audit {
            instance,
            solution,
            variant,
            json,
        } => {
            let inst = read_instance(&instance)?;
            let sol = Solution::load(&solution).map_err(CliError::usage)?;
            let variant = variant.unwrap_or(sol.variant);
            let report = check_feasibility(&inst, variant, &sol);
            if json {
                println!("{}", serde_json::to_string_pretty(&report).expect("audit reports serialize"));
            } else {
                println!(
                    "{} ({} checks, max relative residual {:.3e})",
                    if report.passed() { "PASS" } else { "FAIL" },
                    report.checked,
                    report.max_residual
                );
                for v in &report.violations {
                    println!("  {} at {}: {:.3e}", v.family, v.location, v.residual);
                }
                print_discomfort(&inst, &sol);
            }
            Ok(if report.passed() { EXIT_OK } else { EXIT_AUDIT })
        }
        Command::Experiment { config, out } => {
            let cfg = ExperimentConfig::load(&config).map_err(CliError::usage)?;
            let mut cfg = cfg;
            cfg.jobs = cfg.jobs.max(jobs);
            let base = config.parent().unwrap_or(Path::new("."));
            let summary = run_experiment(&cfg, base, &out).map_err(CliError::usage)?;
            print!("{}", render_table(&summary.rows));
            if summary.failures > 0 {
                eprintln!("{} sub-runs failed", summary.failures);
                return Ok(EXIT_SOLVER);
            }
            Ok(EXIT_OK)
        }
        Command::Report { results } => {
            let path = if results.is_dir() { results.join("results.csv") } else { results };
            let rows = read_results(&path).map_err(CliError::usage)?;
            print!("{}", render_table(&rows));
            Ok(EXIT_OK)
        }
    }
}

fn print_discomfort(inst: &Instance, sol: &Solution) {
    let stats = nodal_discomfort_stats(inst, sol);
    println!("nodal discomfort");
    println!("{:>6} {:>6} {:>12} {:>12} {:>12} {:>12} {:>14}", "node", "stage", "mean", "p95", "max", "cap", "violation freq");
    for s in &stats {
        let freq = s.exceed_probability.iter().copied().fold(0.0, f64::max);
        println!(
            "{:>6} {:>6} {:>12.4} {:>12.4} {:>12.4} {:>12.4} {:>13.2}%",
            s.node,
            s.stage,
            s.expected,
            s.p95,
            s.max,
            s.cap,
            100.0 * freq
        );
    }
    if let Some(worst) = stats
        .iter()
        .flat_map(|s| s.exceed_probability.iter().copied())
        .max_by(f64::total_cmp)
    {
        println!("max nodal violation frequency {:.2}%", 100.0 * worst);
    }
}

/// Daily profiles from CSV; a first row that does not parse as numbers is
/// taken as a header.
fn read_profiles(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        let parsed: Result<Vec<f64>, _> = rec.iter().map(|f| f.trim().parse::<f64>()).collect();
        match parsed {
            Ok(v) => rows.push(v),
            Err(_) if k == 0 => continue,
            Err(e) => return Err(CliError::usage(format!("{} row {}: {e}", path.display(), k + 1))),
        }
    }
    Ok(rows)
}
