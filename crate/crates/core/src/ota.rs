//! Over-the-air aggregation.
//!
//! Each participant scales its model difference by `C_m(t) = p_m(t) c_m(t)`,
//! packs it into `N` complex symbols and transmits it simultaneously with the
//! others. Antenna `k` of the server observes
//!
//! ```text
//! y_k[n] = Σ_m h_{m,k}[n] x_m[n] + z_k[n]
//! ```
//!
//! and the server combines with the conjugate of the summed channel,
//!
//! ```text
//! y[n] = (1/K) Σ_k (Σ_m h_{m,k}[n])* y_k[n]
//!      = signal[n] + interference[n] + noise[n]
//! ```
//!
//! then rescales by `1 / (C(t) σ_h² β̄)` to recover the aggregate. The
//! error-free path divides the plain weighted sum by `C(t)`.

use num_complex::Complex64;

use crate::channel::{draw_channel, BetaBar, ChannelParams, ChannelRealization, Topology};
use crate::error::{Error, Result};
use crate::model::{pack, ParameterVector};
use crate::rng::SeedStreams;

/// `Δθ_m^s = C_m(t) Δθ_m` together with its weight `C_m(t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledDifference {
    values: ParameterVector,
    weight: f64,
}

impl ScaledDifference {
    pub fn values(&self) -> &ParameterVector {
        &self.values
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }
}

pub fn scale_difference(
    delta: &ParameterVector,
    share: f64,
    cooldown: u64,
) -> Result<ScaledDifference> {
    if cooldown == 0 {
        return Err(Error::NonPositiveCooldown);
    }
    if !(share > 0.0 && share.is_finite()) {
        return Err(Error::invalid("data share", "must be positive"));
    }
    let weight = share * cooldown as f64;
    Ok(ScaledDifference {
        values: delta.scaled(weight),
        weight,
    })
}

/// `C(t) = Σ_m C_m(t)`.
pub fn total_weight(scaled: &[ScaledDifference]) -> f64 {
    scaled.iter().map(|s| s.weight).sum()
}

fn common_len(scaled: &[ScaledDifference]) -> Result<usize> {
    let first = scaled.first().ok_or(Error::RoundSkipped)?;
    let len = first.values.len();
    for s in scaled {
        s.values.check_len(len)?;
    }
    Ok(len)
}

/// `(1 / C(t)) Σ_m Δθ_m^s`. An empty list means the round is skipped.
pub fn aggregate_error_free(scaled: &[ScaledDifference]) -> Result<ParameterVector> {
    let len = common_len(scaled)?;
    let c = total_weight(scaled);
    if !(c > 0.0) {
        return Err(Error::RoundSkipped);
    }
    let mut sum = ParameterVector::zeros(len)?;
    for s in scaled {
        sum.axpy(1.0, &s.values)?;
    }
    Ok(sum.scaled(1.0 / c))
}

/// Combined receive signal with its three components kept for diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct CombinedSignal {
    pub combined: Vec<Complex64>,
    pub signal: Vec<Complex64>,
    pub interference: Vec<Complex64>,
    pub noise: Vec<Complex64>,
}

/// Per-term energy after recovery scaling, summed over all `2N` real
/// coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TermPowers {
    pub signal: f64,
    pub interference: f64,
    pub noise: f64,
}

impl CombinedSignal {
    pub fn term_powers(&self, total_weight: f64, fading_var: f64, beta_bar: f64) -> TermPowers {
        let scale = 1.0 / (total_weight * fading_var * beta_bar);
        let energy = |v: &[Complex64]| v.iter().map(|c| c.norm_sqr()).sum::<f64>() * scale * scale;
        TermPowers {
            signal: energy(&self.signal),
            interference: energy(&self.interference),
            noise: energy(&self.noise),
        }
    }
}

/// Superposes the packed transmissions over `channel` and applies conjugate
/// combining. `scaled[i]` is sent by `channel.devices()[i]`.
pub fn transmit_and_combine(
    scaled: &[ScaledDifference],
    channel: &ChannelRealization,
) -> Result<CombinedSignal> {
    let len = common_len(scaled)?;
    let symbols = len / 2;
    if scaled.len() != channel.devices().len() {
        return Err(Error::DimensionMismatch {
            expected: channel.devices().len(),
            found: scaled.len(),
        });
    }
    if symbols != channel.symbols() {
        return Err(Error::DimensionMismatch {
            expected: channel.symbols(),
            found: symbols,
        });
    }
    let packed: Vec<_> = scaled.iter().map(|s| pack(&s.values)).collect();
    let zero = Complex64::new(0.0, 0.0);
    let mut combined = vec![zero; symbols];
    let mut signal = vec![zero; symbols];
    let mut interference = vec![zero; symbols];
    let mut noise = vec![zero; symbols];
    let z = channel.noise();
    for k in 0..channel.antennas() {
        let base = k * symbols;
        for n in 0..symbols {
            let mut h_sum = zero;
            let mut received = zero;
            let mut own = zero;
            for (i, x) in packed.iter().enumerate() {
                let h = channel.fading(i)[base + n];
                let x = x.symbols()[n];
                h_sum += h;
                received += h * x;
                own += h.norm_sqr() * x;
            }
            let h_conj = h_sum.conj();
            combined[n] += h_conj * (received + z[base + n]);
            signal[n] += own;
            interference[n] += h_conj * received - own;
            noise[n] += h_conj * z[base + n];
        }
    }
    let inv_k = 1.0 / channel.antennas() as f64;
    for v in [&mut combined, &mut signal, &mut interference, &mut noise] {
        v.iter_mut().for_each(|c| *c *= inv_k);
    }
    Ok(CombinedSignal {
        combined,
        signal,
        interference,
        noise,
    })
}

/// `Δθ̂[n] = Re y[n] / (C σ_h² β̄)`, `Δθ̂[n + N] = Im y[n] / (C σ_h² β̄)`.
pub fn recover(
    signal: &CombinedSignal,
    total_weight: f64,
    fading_var: f64,
    beta_bar: f64,
) -> Result<ParameterVector> {
    if !(total_weight > 0.0) {
        return Err(Error::RoundSkipped);
    }
    if !(beta_bar > 0.0 && beta_bar.is_finite()) {
        return Err(Error::invalid("beta_bar", "must be positive"));
    }
    if !(fading_var > 0.0 && fading_var.is_finite()) {
        return Err(Error::invalid("sigma_h2", "must be positive"));
    }
    let scale = 1.0 / (total_weight * fading_var * beta_bar);
    let values = signal
        .combined
        .iter()
        .map(|c| c.re * scale)
        .chain(signal.combined.iter().map(|c| c.im * scale))
        .collect();
    ParameterVector::new(values)
}

/// Result of one aggregation.
#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    /// Update added to the global model.
    pub update: ParameterVector,
    pub powers: Option<TermPowers>,
    /// `Σ_m ‖Δθ_m^s‖²`, the energy put on the air this round.
    pub transmit_energy: f64,
}

/// Aggregation backend. `participants[i]` is the device index that produced
/// `scaled[i]`.
pub trait Aggregator: Send + Sync {
    fn aggregate(
        &self,
        round: u64,
        participants: &[usize],
        scaled: &[ScaledDifference],
    ) -> Result<Aggregate>;
}

fn transmit_energy(scaled: &[ScaledDifference]) -> f64 {
    scaled.iter().map(|s| s.values.norm_sq()).sum()
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ErrorFree;

impl Aggregator for ErrorFree {
    fn aggregate(
        &self,
        _round: u64,
        _participants: &[usize],
        scaled: &[ScaledDifference],
    ) -> Result<Aggregate> {
        Ok(Aggregate {
            update: aggregate_error_free(scaled)?,
            powers: None,
            transmit_energy: transmit_energy(scaled),
        })
    }
}

#[derive(Clone, Debug)]
pub struct OverTheAir {
    pub topology: Topology,
    pub params: ChannelParams,
    pub beta_bar: BetaBar,
    pub streams: SeedStreams,
}

impl Aggregator for OverTheAir {
    fn aggregate(
        &self,
        round: u64,
        participants: &[usize],
        scaled: &[ScaledDifference],
    ) -> Result<Aggregate> {
        let len = common_len(scaled)?;
        let channel = draw_channel(
            &self.topology,
            participants,
            &self.params,
            len / 2,
            &self.streams,
            round,
        )?;
        let combined = transmit_and_combine(scaled, &channel)?;
        let c = total_weight(scaled);
        let beta_bar = self.beta_bar.resolve(&self.topology, participants);
        let update = recover(&combined, c, self.params.fading_var, beta_bar)?;
        Ok(Aggregate {
            update,
            powers: Some(combined.term_powers(c, self.params.fading_var, beta_bar)),
            transmit_energy: transmit_energy(scaled),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::complex_normal;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pv(v: &[f64]) -> ParameterVector {
        ParameterVector::new(v.to_vec()).unwrap()
    }

    fn random_vec(rng: &mut ChaCha8Rng, len: usize) -> ParameterVector {
        pv(&(0..len).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>())
    }

    #[test]
    fn scaling_examples() {
        let d = pv(&[4.0, -8.0]);
        let s = scale_difference(&d, 0.25, 1).unwrap();
        assert_eq!(s.values().as_slice(), &[1.0, -2.0]);
        let s = scale_difference(&d, 1.0 / 40.0, 20).unwrap();
        assert_eq!(s.weight(), 0.5);
        let s = scale_difference(&pv(&[0.0, 0.0]), 0.3, 7).unwrap();
        assert_eq!(s.values().as_slice(), &[0.0, 0.0]);
        assert!(matches!(scale_difference(&d, 0.25, 0), Err(Error::NonPositiveCooldown)));
    }

    #[test]
    fn error_free_with_equal_weights_is_plain_average() {
        let ds = [pv(&[1.0, 2.0]), pv(&[3.0, -2.0]), pv(&[2.0, 6.0])];
        let scaled: Vec<_> = ds.iter().map(|d| scale_difference(d, 1.0 / 3.0, 1).unwrap()).collect();
        let agg = aggregate_error_free(&scaled).unwrap();
        assert!((agg.as_slice()[0] - 2.0).abs() < 1e-15);
        assert!((agg.as_slice()[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn error_free_single_participant_is_its_own_difference() {
        let d = pv(&[0.3, -0.7, 1.1, 2.5]);
        let agg = aggregate_error_free(&[scale_difference(&d, 0.125, 4).unwrap()]).unwrap();
        assert_eq!(agg, d);
    }

    #[test]
    fn error_free_two_device_weighted_mean() {
        let (v, w) = (pv(&[1.0, 0.0]), pv(&[5.0, -4.0]));
        let scaled = [scale_difference(&v, 0.5, 2).unwrap(), scale_difference(&w, 0.5, 6).unwrap()];
        assert_eq!(total_weight(&scaled), 4.0);
        let agg = aggregate_error_free(&scaled).unwrap();
        assert_eq!(agg.as_slice(), &[(1.0 + 15.0) / 4.0, (0.0 - 12.0) / 4.0]);
    }

    #[test]
    fn empty_round_is_skipped() {
        assert!(matches!(aggregate_error_free(&[]), Err(Error::RoundSkipped)));
    }

    fn identity_channel(devices: usize, antennas: usize, symbols: usize) -> ChannelRealization {
        let one = Complex64::new(1.0, 0.0);
        ChannelRealization::from_parts(
            (0..devices).collect(),
            antennas,
            symbols,
            vec![vec![one; antennas * symbols]; devices],
            vec![Complex64::new(0.0, 0.0); antennas * symbols],
        )
        .unwrap()
    }

    #[test]
    fn identity_channel_returns_transmitted_symbols() {
        let d = pv(&[0.5, -1.5, 2.0, 3.0]);
        let s = scale_difference(&d, 1.0, 1).unwrap();
        let y = transmit_and_combine(std::slice::from_ref(&s), &identity_channel(1, 3, 2)).unwrap();
        assert_eq!(y.combined, pack(&d).symbols());
        let rec = recover(&y, s.weight(), 1.0, 1.0).unwrap();
        assert_eq!(rec, d);
    }

    #[test]
    fn identity_channel_matches_error_free_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let d = random_vec(&mut rng, 16);
            let s = scale_difference(&d, rng.random_range(0.1..1.0), rng.random_range(1..20)).unwrap();
            let y = transmit_and_combine(std::slice::from_ref(&s), &identity_channel(1, 5, 8)).unwrap();
            let ota = recover(&y, s.weight(), 1.0, 1.0).unwrap();
            let ef = aggregate_error_free(&[s]).unwrap();
            let rel = ota.dist_sq(&ef).unwrap().sqrt() / ef.norm_sq().sqrt();
            assert!(rel < 1e-10, "relative difference {rel}");
        }
    }

    fn random_channel(rng: &mut ChaCha8Rng, devices: usize, k: usize, n: usize, gains: &[f64], noise: f64) -> ChannelRealization {
        let fading = (0..devices)
            .map(|i| (0..k * n).map(|_| complex_normal(rng, gains[i])).collect())
            .collect();
        let z = (0..k * n).map(|_| complex_normal(rng, noise)).collect();
        ChannelRealization::from_parts((0..devices).collect(), k, n, fading, z).unwrap()
    }

    #[test]
    fn decomposition_matches_explicit_double_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (m, k, n) = (4, 6, 5);
        let scaled: Vec<_> = (0..m)
            .map(|_| scale_difference(&random_vec(&mut rng, 2 * n), 0.25, rng.random_range(1..5)).unwrap())
            .collect();
        let ch = random_channel(&mut rng, m, k, n, &[1.0, 0.5, 2.0, 0.1], 0.7);
        let y = transmit_and_combine(&scaled, &ch).unwrap();
        let x: Vec<_> = scaled.iter().map(|s| pack(s.values())).collect();
        for sym in 0..n {
            let mut sig = Complex64::new(0.0, 0.0);
            let mut int = sig;
            let mut noi = sig;
            for a in 0..m {
                let gain: f64 = (0..k).map(|kk| ch.coefficient(a, kk, sym).norm_sqr()).sum::<f64>() / k as f64;
                sig += gain * x[a].symbols()[sym];
                for b in (0..m).filter(|&b| b != a) {
                    for kk in 0..k {
                        int += ch.coefficient(a, kk, sym).conj() * ch.coefficient(b, kk, sym) * x[b].symbols()[sym];
                    }
                }
                for kk in 0..k {
                    noi += ch.coefficient(a, kk, sym).conj() * ch.noise()[kk * n + sym];
                }
            }
            int /= k as f64;
            noi /= k as f64;
            for (got, want) in [(y.signal[sym], sig), (y.interference[sym], int), (y.noise[sym], noi)] {
                assert!((got - want).norm() <= 1e-12 * want.norm().max(1.0));
            }
            let total = y.signal[sym] + y.interference[sym] + y.noise[sym];
            assert!((total - y.combined[sym]).norm() <= 1e-12 * y.combined[sym].norm().max(1.0));
        }
    }

    #[test]
    fn interference_concentrates_with_many_antennas() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 16;
        let scaled: Vec<_> = (0..2)
            .map(|_| {
                let v: Vec<f64> = (0..2 * n).map(|_| rng.random_range(0.5..1.5)).collect();
                scale_difference(&pv(&v), 0.5, 1).unwrap()
            })
            .collect();
        let ch = random_channel(&mut rng, 2, 10_000, n, &[1.0, 1.0], 0.0);
        let y = transmit_and_combine(&scaled, &ch).unwrap();
        let mean_int = y.interference.iter().map(|c| c.norm()).sum::<f64>() / n as f64;
        let mean_sig = y.signal.iter().map(|c| c.norm()).sum::<f64>() / n as f64;
        assert!(mean_int < 0.02 * mean_sig, "{mean_int} vs {mean_sig}");
    }

    #[test]
    fn dimension_mismatches_are_errors() {
        let s = scale_difference(&pv(&[1.0, 2.0, 3.0, 4.0]), 1.0, 1).unwrap();
        assert!(transmit_and_combine(std::slice::from_ref(&s), &identity_channel(1, 2, 3)).is_err());
        assert!(transmit_and_combine(std::slice::from_ref(&s), &identity_channel(2, 2, 2)).is_err());
        let t = scale_difference(&pv(&[1.0, 2.0]), 1.0, 1).unwrap();
        assert!(aggregate_error_free(&[s, t]).is_err());
    }

    #[test]
    fn recover_rejects_zero_weight() {
        let y = CombinedSignal {
            combined: vec![Complex64::new(1.0, 1.0)],
            signal: vec![],
            interference: vec![],
            noise: vec![],
        };
        assert!(matches!(recover(&y, 0.0, 1.0, 1.0), Err(Error::RoundSkipped)));
        assert!(recover(&y, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn single_device_recovery_is_unbiased_up_to_gain_ratio() {
        // E[Δθ̂] = (β_m / β̄) Δθ_m for a single participant.
        let topology = Topology::from_distances(vec![0.8], 4.0).unwrap();
        let beta = topology.gains()[0];
        let agg = OverTheAir {
            topology,
            params: ChannelParams { antennas: 4, fading_var: 1.0, noise_var: 0.5 },
            beta_bar: BetaBar::Fixed(1.0),
            streams: SeedStreams::new(12),
        };
        let d = pv(&[1.0, -0.5, 0.25, 2.0]);
        let s = scale_difference(&d, 1.0, 3).unwrap();
        let trials = 20_000;
        let mut mean = [0.0; 4];
        for r in 0..trials {
            let a = agg.aggregate(r, &[0], std::slice::from_ref(&s)).unwrap();
            mean.iter_mut().zip(a.update.as_slice()).for_each(|(m, u)| *m += u / trials as f64);
        }
        for (m, x) in mean.iter().zip(d.as_slice()) {
            assert!((m - beta * x).abs() < 0.03 * beta * 2.0, "{m} vs {}", beta * x);
        }
    }
}
