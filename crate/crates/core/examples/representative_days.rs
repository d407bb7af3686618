//! Reduces a year of synthetic daily load and irradiance profiles to a handful
//! of representative days by k-medoids.
//!
//! ```bash
//! cargo run --example representative_days
//! ```

use mhres::scengen::representative_days;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 365 days of 24 load values followed by 24 irradiance values.
fn year(seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..365)
        .map(|d| {
            let season = (2.0 * std::f64::consts::PI * d as f64 / 365.0).cos();
            let cloud: f64 = rng.gen_range(0.3..1.0);
            let load = (0..24).map(|h| {
                let evening = if (17..22).contains(&h) { 1.5 } else { 0.0 };
                2.0 + 0.8 * season + evening + rng.gen_range(-0.2..0.2)
            });
            let sun = (0..24).map(move |h| {
                let x = (h as f64 - 12.0) / (5.0 - 1.5 * season);
                (1.0 - x * x).max(0.0) * cloud
            });
            load.chain(sun).collect()
        })
        .collect()
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let days = year(3);
    for k in [1, 4, 8] {
        let c = representative_days(&days, k, 0)?;
        let objective = c.objective_trace.last().copied().unwrap_or(f64::NAN);
        println!("k = {k}: total distance {objective:.2} after {} swaps", c.objective_trace.len() - 1);
        for d in &c.days {
            let load: f64 = d.profile[..24].iter().sum();
            let sun: f64 = d.profile[24..].iter().sum();
            println!(
                "  day {:>3}  probability {:.3}  load {load:6.1}  irradiance {sun:5.2}",
                d.index, d.probability
            );
        }
        let total: f64 = c.days.iter().map(|d| d.probability).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err("probabilities do not sum to one".into());
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
