//! Energy arrival processes and the cooldown multipliers they produce.
//!
//! ```bash
//! cargo run --release --example energy_arrivals
//! ```

use eh_otafl::energy::{participants, ArrivalPolicy, EnergyDevice, EnergyProfile};
use eh_otafl::rng::SeedStreams;

fn main() -> eh_otafl::Result<()> {
    let profiles: Vec<EnergyProfile> = ["bernoulli:1", "bernoulli:0.2", "uniform:5@2", "uniform:20@6"]
        .iter()
        .map(|s| s.parse())
        .collect::<eh_otafl::Result<_>>()?;
    let mut devices: Vec<EnergyDevice> = profiles.iter().map(|&p| EnergyDevice::new(p, 0)).collect();
    let streams = SeedStreams::new(11);

    println!("round  participants (device:cooldown)");
    let mut counts = vec![0u64; devices.len()];
    let rounds = 2000;
    for t in 0..rounds {
        let s = participants(&mut devices, t, ArrivalPolicy::Harvest, &streams)?;
        for p in &s {
            counts[p.device] += 1;
        }
        if t < 25 {
            let list: Vec<String> = s.iter().map(|p| format!("{}:{}", p.device, p.cooldown)).collect();
            println!("{t:>5}  {}", list.join(" "));
        }
    }
    println!();
    for (p, c) in profiles.iter().zip(counts) {
        println!("{p:<14} expected rate {:.3}  observed {:.3}", p.arrival_rate(), c as f64 / rounds as f64);
    }
    Ok(())
}
