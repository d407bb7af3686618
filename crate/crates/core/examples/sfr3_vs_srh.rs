//! Runs SFR3 under several strategies and the SRH benchmark, audits every
//! output and tabulates gaps against the monolithic optimum.
//!
//! ```bash
//! cargo run --example sfr3_vs_srh
//! ```

use mhres::heuristics::{compare, sfr3, srh, MethodRun, Sfr3Params};
use mhres::model::{check_feasibility, solve_monolithic, Variant};
use mhres::scengen::{synthetic_instance, Size};
use mhres::SolverControls;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let size: Size = "custom:stages=3,branching=3,scenarios=2,periods=6,pv=2,bess=1,elastic=1,deferrable=2,incompatible=1".parse()?;
    let inst = synthetic_instance(&size, 5)?;
    let variant = Variant::RN;
    let controls = SolverControls::default();
    let (opt, out) = solve_monolithic(&inst, variant, &controls)?;
    let mut runs = vec![MethodRun {
        method: "monolithic".into(),
        instance: inst.meta.name.clone(),
        variant,
        objective: opt.objective,
        time: out.wall_time,
    }];

    let e = inst.tree.num_stages();
    let strategies = ["weak-myopic".to_string(), "relaxed:2,1,0.3333".into(), format!("multistage-myopic:{e}")];
    for s in &strategies {
        let mut params = Sfr3Params::preset(s, 7)?;
        params.controls = controls.clone();
        let run = sfr3(&inst, variant, &params)?;
        let audit = check_feasibility(&inst, variant, &run.solution);
        println!("sfr3 {s:<22} {} subproblems, audit {}", run.log.len(), if audit.passed() { "PASS" } else { "FAIL" });
        if !audit.passed() {
            return Err(format!("sfr3 {s} failed the audit").into());
        }
        runs.push(MethodRun {
            method: format!("sfr3 {s}"),
            instance: inst.meta.name.clone(),
            variant,
            objective: run.solution.objective,
            time: run.wall_time,
        });
    }
    let run = srh(&inst, variant, &controls, 1)?;
    let audit = check_feasibility(&inst, variant, &run.solution);
    println!("srh {} subproblems, audit {}", run.log.len(), if audit.passed() { "PASS" } else { "FAIL" });
    if !audit.passed() {
        return Err("srh failed the audit".into());
    }
    runs.push(MethodRun {
        method: "srh".into(),
        instance: inst.meta.name.clone(),
        variant,
        objective: run.solution.objective,
        time: run.wall_time,
    });

    println!("{:<32} {:>14} {:>9} {:>7}", "method", "cost", "gap %", "GR");
    for row in compare(&runs, "srh", Some(opt.objective))? {
        println!(
            "{:<32} {:>14.4} {:>9.4} {:>7.4}",
            row.method,
            row.objective,
            100.0 * row.gap.unwrap_or(0.0),
            row.gr
        );
        if row.objective < opt.objective * (1.0 - 1e-6) {
            return Err(format!("{} beats the optimum", row.method).into());
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
