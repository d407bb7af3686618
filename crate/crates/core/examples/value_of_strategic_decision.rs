//! Imposes the expected-value investment plan on the full scenario tree and
//! measures how much worse it is than the stochastic optimum.
//!
//! ```bash
//! cargo run --example value_of_strategic_decision
//! ```

use mhres::bounds::vsd;
use mhres::model::{solve_monolithic, Variant};
use mhres::scengen::{synthetic_instance, Size};
use mhres::SolverControls;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let size: Size = "custom:stages=3,branching=3,scenarios=2,periods=6,pv=2,bess=1,elastic=1,deferrable=1".parse()?;
    let inst = synthetic_instance(&size, 2)?;
    let controls = SolverControls::exact();
    for variant in Variant::ALL {
        let (opt, _) = solve_monolithic(&inst, variant, &controls)?;
        let r = vsd(&inst, variant, &opt, &controls)?;
        match (r.z_s_mhev, r.vsd, r.gr) {
            (Some(z), Some(v), Some(gr)) => {
                println!("{variant:>3}: z* {:.4}  EV plan {z:.4}  VSD {v:.4}  GR {gr:.4}", opt.objective);
                if v < -1e-6 * z.abs() {
                    return Err(format!("{variant}: the EV plan beats the optimum").into());
                }
            }
            _ => println!("{variant:>3}: {}", r.finding.as_deref().unwrap_or("no result")),
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
