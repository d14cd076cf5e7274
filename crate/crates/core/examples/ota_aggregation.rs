//! One over-the-air round, side by side with the error-free aggregate.
//!
//! ```bash
//! cargo run --release --example ota_aggregation
//! ```

use eh_otafl::channel::{BetaBar, ChannelParams, Topology};
use eh_otafl::model::ParameterVector;
use eh_otafl::ota::{aggregate_error_free, scale_difference, Aggregator, OverTheAir};
use eh_otafl::rng::SeedStreams;

fn main() -> eh_otafl::Result<()> {
    let deltas = [
        vec![0.4, -0.2, 0.1, 0.0],
        vec![0.1, 0.3, -0.5, 0.2],
        vec![-0.3, 0.1, 0.2, 0.6],
    ];
    // (data share, cooldown) per device
    let weights = [(0.5, 1), (0.25, 4), (0.25, 2)];
    let scaled = deltas
        .iter()
        .zip(weights)
        .map(|(d, (p, c))| scale_difference(&ParameterVector::new(d.clone())?, p, c))
        .collect::<eh_otafl::Result<Vec<_>>>()?;
    let exact = aggregate_error_free(&scaled)?;
    println!("error-free   {:?}", exact.as_slice());

    let unequal = Topology::from_distances(vec![0.9, 1.0, 1.1], 4.0)?;
    // Unequal path gains leave a bias of β_m / β̄ that more antennas cannot remove.
    for (label, topology) in [("equal gains", Topology::unit(3)), ("unequal gains", unequal)] {
        println!("{label}: {:?}", topology.gains());
        for antennas in [10, 100, 1000, 10_000] {
            let ota = OverTheAir {
                topology: topology.clone(),
                params: ChannelParams { antennas, fading_var: 1.0, noise_var: 0.01 },
                beta_bar: BetaBar::MeanParticipants,
                streams: SeedStreams::new(3),
            };
            let agg = ota.aggregate(0, &[0, 1, 2], &scaled)?;
            let err = agg.update.dist_sq(&exact)?.sqrt() / exact.norm_sq().sqrt();
            let p = agg.powers.expect("over-the-air rounds report term powers");
            println!(
                "  K = {antennas:>5}  relative error {err:.4}  signal {:.3e}  interference {:.3e}  noise {:.3e}",
                p.signal, p.interference, p.noise
            );
        }
    }
    Ok(())
}
