//! Computes every lower-bounding scheme on a small synthetic instance and
//! checks the certification chain against the monolithic optimum.
//!
//! ```bash
//! cargo run --example lower_bounds
//! ```

use mhres::bounds::{bound_mhev, bound_mhoev, bound_smc, bound_smg, bound_sws, BoundOptions, BoundReport};
use mhres::model::{solve_monolithic, Variant};
use mhres::scengen::{synthetic_instance, Size};
use mhres::SolverControls;

fn show(label: &str, r: &BoundReport, z_star: f64) {
    println!(
        "{label:<10} {:>14.4}  ({} subproblems, weight sum {:.12}, {:+.3}% vs z*)",
        r.value,
        r.subproblems.len(),
        r.total_weight(),
        100.0 * (r.value - z_star) / z_star.abs()
    );
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let size: Size = "custom:stages=3,branching=2,scenarios=2,periods=6,pv=2,bess=1,elastic=1,deferrable=1".parse()?;
    let inst = synthetic_instance(&size, 3)?;
    let variant = Variant::RN;
    let opts = BoundOptions {
        controls: SolverControls::exact(),
        jobs: 2,
        timings: false,
    };
    let (opt, _) = solve_monolithic(&inst, variant, &opts.controls)?;
    let z_star = opt.objective;
    let tol = 1e-6 * z_star.abs();
    println!("z* ({variant}) = {z_star:.4}");

    let sws = bound_sws(&inst, variant, &opts)?;
    show("sws", &sws, z_star);
    let omega = inst.tree.num_scenarios();
    for g in 1..=omega {
        let r = bound_smg(&inst, variant, g, 7, &opts)?;
        show(&format!("smg({g})"), &r, z_star);
        if r.value > z_star + tol {
            return Err(format!("smg({g}) exceeds z*").into());
        }
    }
    let e_max = inst.tree.num_stages();
    let mut previous = f64::INFINITY;
    for e_star in 1..e_max {
        let r = bound_smc(&inst, variant, e_star, &opts)?;
        show(&format!("smc({e_star})"), &r, z_star);
        if r.value > z_star + tol || r.value > previous + tol {
            return Err(format!("smc({e_star}) breaks the bound chain").into());
        }
        previous = r.value;
    }
    if bound_smc(&inst, variant, e_max - 1, &opts)?.value != sws.value {
        return Err("smc(E-1) differs from sws".into());
    }
    show("mhev", &bound_mhev(&inst, variant, &opts)?, z_star);
    show("mhoev", &bound_mhoev(&inst, variant, &opts)?, z_star);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
