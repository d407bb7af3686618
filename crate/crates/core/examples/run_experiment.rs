//! Runs a small experiment matrix from a JSON configuration and prints the
//! consolidated table.
//!
//! ```bash
//! cargo run --example run_experiment
//! ```

use mhres::experiment::{render_table, run_experiment, ExperimentConfig};

const CONFIG: &str = r#"{
  "name": "desk",
  "instances": [
    { "size": "custom:stages=3,branching=2,scenarios=2,periods=4,pv=1,bess=1,elastic=1,deferrable=1", "seed": 1 }
  ],
  "variants": ["nod", "rn"],
  "methods": [
    { "method": "monolithic" },
    { "method": "sfr3", "strategy": "weak-myopic" },
    { "method": "srh" }
  ],
  "bounds": [
    { "scheme": "mhev" },
    { "scheme": "sws" },
    { "scheme": "smc", "e_star": 1 }
  ],
  "vsd": true
}"#;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let config: ExperimentConfig = serde_json::from_str(CONFIG)?;
    let dir = tempfile::tempdir()?;
    let summary = run_experiment(&config, dir.path(), &dir.path().join("out"))?;
    println!("{}", render_table(&summary.rows));
    for t in &summary.timings {
        println!("{:>3} {:<28} {:7.3}s", t.variant, t.name, t.time);
    }
    if summary.failures > 0 {
        return Err(format!("{} runs failed", summary.failures).into());
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
