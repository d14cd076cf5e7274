//! All five training scenarios on one seeded federation.
//!
//! ```bash
//! cargo run --release --example scenario_matrix
//! ```

use eh_otafl::config::{build_federation, RunConfig};
use eh_otafl::trainer::{run_experiment, Scenario};

fn main() -> eh_otafl::Result<()> {
    let base = RunConfig { rounds: 500, ..RunConfig::default() };
    let fed = build_federation(&base)?;
    let f_star = fed.task.global_loss(&fed.task.optimum().expect("quadratic task"))?;
    println!("devices {}  antennas {}  F* {f_star:.5}", base.devices, base.antennas());
    println!("{:<26} {:>12} {:>12} {:>10}", "scenario", "final loss", "excess", "mean |S|");
    for scenario in Scenario::ALL {
        let cfg = RunConfig { scenario, ..base.clone() }.scenario_config()?;
        let (records, _) = run_experiment(&fed, cfg)?;
        let last = records.last().expect("rounds > 0");
        let mean_s = records.iter().map(|r| r.participants as f64).sum::<f64>() / records.len() as f64;
        println!("{:<26} {:>12.6} {:>12.3e} {:>10.2}", scenario.name(), last.loss, last.loss - f_star, mean_s);
    }
    Ok(())
}
