//! Solves a desk-scale synthetic instance under all three discomfort
//! variants and audits each optimum.
//!
//! ```bash
//! cargo run --example solve_monolithic
//! ```

use mhres::model::{check_feasibility, solve_monolithic, Variant};
use mhres::scengen::{synthetic_instance, Size};
use mhres::SolverControls;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let size: Size = "custom:stages=3,branching=2,scenarios=2,periods=6,pv=2,bess=1,elastic=2,deferrable=2,incompatible=1,precedence=1".parse()?;
    let inst = synthetic_instance(&size, 11)?;
    println!("instance {} with {} strategic nodes", inst.meta.name, inst.tree.num_nodes());

    let mut previous = f64::NEG_INFINITY;
    for variant in Variant::ALL {
        let (sol, outcome) = solve_monolithic(&inst, variant, &SolverControls::exact())?;
        let audit = check_feasibility(&inst, variant, &sol);
        println!(
            "{variant:>3}: status {} objective {:.4} recomputed {:.4} audit {} (max residual {:.2e})",
            outcome.status,
            outcome.objective.unwrap_or(f64::NAN),
            sol.objective,
            if audit.passed() { "PASS" } else { "FAIL" },
            audit.max_residual,
        );
        for v in audit.violations.iter().take(5) {
            println!("    {} at {}: {:.3e}", v.family, v.location, v.residual);
        }
        if !audit.passed() {
            return Err(format!("{variant} optimum failed the audit").into());
        }
        if sol.objective + 1e-9 < previous {
            return Err("variant costs are not ordered".into());
        }
        previous = sol.objective;
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
