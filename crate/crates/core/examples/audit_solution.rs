//! Solves an instance, saves the solution, then breaks a deferrable load's
//! start decisions and shows the audit naming the violated family.
//!
//! ```bash
//! cargo run --example audit_solution
//! ```

use mhres::model::Solution;
use mhres::scengen::{synthetic_instance, Size};
use mhres::{check_feasibility, solve_monolithic, SolverControls, Variant};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let size: Size = "custom:stages=3,branching=2,scenarios=2,periods=6,pv=1,bess=1,elastic=1,deferrable=1".parse()?;
    let inst = synthetic_instance(&size, 4)?;
    let (sol, _) = solve_monolithic(&inst, Variant::RN, &SolverControls::exact())?;

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("solution.json");
    sol.save(&path)?;
    let loaded = Solution::load(&path)?;
    let clean = check_feasibility(&inst, loaded.variant, &loaded);
    println!(
        "saved optimum {:.4}: audit {} with max residual {:.2e}",
        loaded.objective,
        if clean.passed() { "PASS" } else { "FAIL" },
        clean.max_residual
    );
    if !clean.passed() {
        return Err("optimal solution failed the audit".into());
    }

    // Dropping every start of the first deferrable load at the root.
    let mut broken = loaded.clone();
    for scenario in &mut broken.nodes[0].delta[0] {
        scenario.iter_mut().for_each(|d| *d = 0.0);
    }
    let report = check_feasibility(&inst, broken.variant, &broken);
    println!("corrupted copy: {} violations", report.violations.len());
    for v in report.violations.iter().take(5) {
        println!("  {} at {}: {:.3e}", v.family, v.location, v.residual);
    }
    if !report.violations.iter().any(|v| v.family == "deferrable_start") {
        return Err("audit missed the broken start decisions".into());
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
