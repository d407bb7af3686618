//! Generates the small synthetic instance, writes it to disk, reloads it and
//! checks that the reload is identical and passes validation.
//!
//! ```bash
//! cargo run --example generate_instance
//! ```

use mhres::load_instance;
use mhres::scengen::{synthetic_instance, Size};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let size: Size = "small".parse()?;
    let inst = synthetic_instance(&size, 7)?;
    let tree = &inst.tree;
    println!(
        "{}: {} stages, {} strategic nodes, {} strategic scenarios",
        inst.meta.name,
        tree.num_stages(),
        tree.num_nodes(),
        tree.num_scenarios()
    );
    for e in 1..=tree.num_stages() {
        let st = tree.stage(e);
        println!(
            "  stage {e}: {} nodes, {} days, {} operational scenarios",
            tree.stage_nodes(e).len(),
            st.days,
            st.num_scenarios()
        );
    }
    println!(
        "  {} PV, {} BESS, {} elastic and {} deferrable loads",
        inst.num_pv(),
        inst.num_bess(),
        inst.num_elastic(),
        inst.num_deferrable()
    );

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("small.json");
    inst.save(&path)?;
    let back = load_instance(&path)?;
    if back != inst {
        return Err("reloaded instance differs".into());
    }
    if !back.check_invariants().is_empty() {
        return Err("reloaded instance violates its invariants".into());
    }
    back.check_coverage()?;
    println!("round trip through {} bytes of JSON is exact", std::fs::metadata(&path)?.len());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
