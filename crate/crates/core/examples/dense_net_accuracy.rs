//! A small tanh network on the bundled four-class toy set.
//!
//! ```bash
//! cargo run --release --example dense_net_accuracy
//! ```

use eh_otafl::config::{build_federation, RunConfig};
use eh_otafl::trainer::{run_experiment, Scenario};

fn main() -> eh_otafl::Result<()> {
    let base = RunConfig::parse("task = dense_net\nhidden = 16\nbatch = 32\nlr = 0.1\nrounds = 300")?;
    let fed = build_federation(&base)?;
    println!("model dimension {}", fed.task.dim());
    for scenario in [Scenario::ConventionalFl, Scenario::EhErrorFree, Scenario::EhOta] {
        let cfg = RunConfig { scenario, ..base.clone() }.scenario_config()?;
        let (records, _) = run_experiment(&fed, cfg)?;
        let acc: Vec<String> = records
            .iter()
            .filter(|r| (r.round + 1) % 60 == 0)
            .map(|r| format!("{:.3}", r.accuracy.unwrap_or(f64::NAN)))
            .collect();
        println!("{:<18} accuracy every 60 rounds: {}", scenario.name(), acc.join(" "));
    }
    Ok(())
}
