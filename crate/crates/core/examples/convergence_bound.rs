//! Bound curves for the three scenarios, plus the constant-step floor.
//!
//! ```bash
//! cargo run --release --example convergence_bound
//! ```

use eh_otafl::bound::{asymptotic_floor, bound_trace, BoundParams, BoundScenario};
use eh_otafl::trainer::LearningRate;

fn main() -> eh_otafl::Result<()> {
    let base = BoundParams::large_model();
    let eh_alpha = 0.3375;
    let curves = BoundScenario::ALL
        .iter()
        .map(|s| bound_trace(&s.apply(&base, eh_alpha)))
        .collect::<eh_otafl::Result<Vec<_>>>()?;
    println!("{:>5} {:>14} {:>14} {:>14}", "t", "conventional", "eh_error_free", "eh_ota");
    for t in (0..=base.rounds as usize).step_by(50) {
        println!(
            "{t:>5} {:>14.5e} {:>14.5e} {:>14.5e}",
            curves[0][t].loss, curves[1][t].loss, curves[2][t].loss
        );
    }

    for antennas in [40, 400, 4000] {
        let p = BoundParams { antennas, lr: LearningRate::Constant(0.01), ..base.clone() };
        println!("K = {antennas:>4}  floor {:.4e}", asymptotic_floor(&p)?);
    }
    Ok(())
}
