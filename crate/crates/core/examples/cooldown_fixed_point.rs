//! Periodic arrivals with and without cooldown weighting.
//!
//! With periods (1, 5, 10, 20) and staggered phases the weighted scheme
//! orbits the data-weighted optimum, while the unweighted one settles on a
//! point pulled toward the frequently powered devices.
//!
//! ```bash
//! cargo run --release --example cooldown_fixed_point
//! ```

use eh_otafl::config::{build_federation, RunConfig};
use eh_otafl::model::BatchSize;
use eh_otafl::trainer::{LearningRate, Scenario, Simulator};

fn main() -> eh_otafl::Result<()> {
    let mut cfg = RunConfig::parse(
        "devices = 80\n\
         energy_groups = uniform:1,uniform:5,uniform:10,uniform:20\n\
         uniform_phase = stratified\n\
         dim = 10\n\
         samples_per_device = 64",
    )?;
    cfg.batch = BatchSize::Full;
    cfg.lr = LearningRate::Constant(0.05);
    cfg.rounds = 2000;
    let fed = build_federation(&cfg)?;
    let opt = fed.task.optimum().expect("quadratic task");

    for scenario in [Scenario::EhErrorFree, Scenario::EhErrorFreeUnweighted] {
        let sc = RunConfig { scenario, ..cfg.clone() }.scenario_config()?;
        let mut sim = Simulator::new(&fed, sc)?;
        let mut mean = vec![0.0; opt.len()];
        for t in 0..sc.rounds {
            sim.run_round()?;
            if t >= sc.rounds - 20 {
                for (m, x) in mean.iter_mut().zip(sim.model().as_slice()) {
                    *m += x / 20.0;
                }
            }
        }
        let dist: f64 = mean.iter().zip(opt.as_slice()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        println!("{scenario:<26} distance of last-period mean to optimum {dist:.3e}");
    }
    Ok(())
}
