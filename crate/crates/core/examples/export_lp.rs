//! Builds the full model of a desk-scale instance for each variant and
//! writes it in LP format for inspection with other solvers.
//!
//! ```bash
//! cargo run --example export_lp
//! ```

use mhres::milp::lp::write_lp;
use mhres::scengen::{synthetic_instance, Size};
use mhres::{build_model, Fixings, Scope, Variant};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let size: Size = "custom:stages=3,branching=2,scenarios=2,periods=4,pv=1,bess=1,elastic=1,deferrable=1".parse()?;
    let inst = synthetic_instance(&size, 2)?;
    let dir = tempfile::tempdir()?;
    for variant in Variant::ALL {
        let built = build_model(&inst, variant, &Scope::full(&inst.tree), &Fixings::new())?;
        let s = built.stats();
        let text = write_lp(&built.milp);
        let path = dir.path().join(format!("{variant}.lp"));
        std::fs::write(&path, &text)?;
        println!(
            "{variant:>3}: {} constraints, {} variables ({} integer, {} binary), {} nonzeros, {} lines",
            s.constraints,
            s.variables,
            s.integers,
            s.binaries,
            s.nonzeros,
            text.lines().count()
        );
        if !text.contains("End") {
            return Err("LP file is not terminated".into());
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
