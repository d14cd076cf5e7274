//! Energy arrivals and cooldown bookkeeping.
//!
//! A device harvests either one unit of energy or nothing per global round.
//! Harvesting lets it run its local steps and transmit in that same round,
//! so an arrival, a participation and the spend all happen together and the
//! unit battery never carries charge over.
//!
//! The cooldown multiplier is `c_m(t) = t − λ_m(t)`, where `λ_m(t)` is the
//! previous arrival. Before the first arrival the device behaves as if one
//! arrived the round before training started.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{Purpose, SeedStreams};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EnergyProfile {
    /// Arrival with probability `rate` in every round.
    Bernoulli { rate: f64 },
    /// Exactly one arrival every `period` rounds, at `t ≡ phase (mod period)`.
    Uniform { period: u64, phase: u64 },
}

impl EnergyProfile {
    pub fn bernoulli(rate: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::InvalidProfile(format!("bernoulli:{rate}")));
        }
        Ok(EnergyProfile::Bernoulli { rate })
    }

    pub fn uniform(period: u64, phase: u64) -> Result<Self> {
        if period == 0 {
            return Err(Error::InvalidProfile("uniform:0".into()));
        }
        Ok(EnergyProfile::Uniform {
            period,
            phase: phase % period,
        })
    }

    pub fn with_phase(self, phase: u64) -> Self {
        match self {
            EnergyProfile::Uniform { period, .. } => EnergyProfile::Uniform {
                period,
                phase: phase % period,
            },
            other => other,
        }
    }

    /// Long-run fraction of rounds with an arrival.
    pub fn arrival_rate(&self) -> f64 {
        match *self {
            EnergyProfile::Bernoulli { rate } => rate,
            EnergyProfile::Uniform { period, .. } => 1.0 / period as f64,
        }
    }
}

/// Parses `bernoulli:<rate>` or `uniform:<period>`; the phase of a uniform
/// profile is assigned separately (see [`assign_phases`]). `uniform:<period>@<phase>`
/// pins it explicitly.
impl FromStr for EnergyProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidProfile(s.to_string());
        let (kind, arg) = s.trim().split_once(':').ok_or_else(bad)?;
        match kind {
            "bernoulli" => Self::bernoulli(arg.parse().map_err(|_| bad())?),
            "uniform" => {
                let (period, phase) = match arg.split_once('@') {
                    Some((p, ph)) => (p, ph.parse().map_err(|_| bad())?),
                    None => (arg, 0),
                };
                Self::uniform(period.parse().map_err(|_| bad())?, phase)
            }
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for EnergyProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnergyProfile::Bernoulli { rate } => write!(f, "bernoulli:{rate}"),
            EnergyProfile::Uniform { period, .. } => write!(f, "uniform:{period}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhaseAssignment {
    /// Phase drawn uniformly from `[0, T_m)` per device.
    Random,
    /// The `i`-th device with a given period gets phase `i mod T_m`.
    Stratified,
}

impl fmt::Display for PhaseAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PhaseAssignment::Random => "random",
            PhaseAssignment::Stratified => "stratified",
        })
    }
}

impl FromStr for PhaseAssignment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(PhaseAssignment::Random),
            "stratified" => Ok(PhaseAssignment::Stratified),
            _ => Err(Error::invalid("uniform_phase", "expected random or stratified")),
        }
    }
}

pub fn assign_phases(
    profiles: &[EnergyProfile],
    mode: PhaseAssignment,
    streams: &SeedStreams,
) -> Vec<EnergyProfile> {
    let mut seen: Vec<(u64, u64)> = Vec::new();
    profiles
        .iter()
        .enumerate()
        .map(|(m, p)| match *p {
            EnergyProfile::Uniform { period, .. } => {
                let phase = match mode {
                    PhaseAssignment::Random => streams
                        .stream(Purpose::Phase, m as u64, 0)
                        .random_range(0..period),
                    PhaseAssignment::Stratified => {
                        let rank = match seen.iter_mut().find(|(p, _)| *p == period) {
                            Some((_, count)) => {
                                *count += 1;
                                *count - 1
                            }
                            None => {
                                seen.push((period, 1));
                                0
                            }
                        };
                        rank % period
                    }
                };
                p.with_phase(phase)
            }
            other => other,
        })
        .collect()
}

/// `E_m(t)`.
pub fn sample_arrival<R: Rng>(profile: &EnergyProfile, t: u64, rng: &mut R) -> bool {
    match *profile {
        EnergyProfile::Bernoulli { rate } => rate >= 1.0 || (rate > 0.0 && rng.random::<f64>() < rate),
        EnergyProfile::Uniform { period, phase } => {
            (t as i128 - phase as i128).rem_euclid(period as i128) == 0
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnergyState {
    start: u64,
    last_arrival: Option<u64>,
    last_seen: Option<u64>,
    cooldown: u64,
}

impl EnergyState {
    /// State for a device whose training starts at round `start`.
    pub fn new(start: u64) -> Self {
        Self {
            start,
            last_arrival: None,
            last_seen: None,
            cooldown: 1,
        }
    }

    pub fn last_arrival(&self) -> Option<u64> {
        self.last_arrival
    }

    /// Cooldown recorded at the latest arrival.
    pub fn cooldown(&self) -> u64 {
        self.cooldown
    }

    /// Advances to round `t`. On an arrival returns `c_m(t)` measured against
    /// the previous arrival, then moves `λ_m` to `t`.
    pub fn update_cooldown(&mut self, t: u64, arrived: bool) -> Result<Option<u64>> {
        if let Some(previous) = self.last_seen {
            if t <= previous {
                return Err(Error::NonMonotoneTime { previous, current: t });
            }
        }
        if t < self.start {
            return Err(Error::NonMonotoneTime {
                previous: self.start,
                current: t,
            });
        }
        self.last_seen = Some(t);
        if !arrived {
            return Ok(None);
        }
        let c = match self.last_arrival {
            Some(lambda) => t - lambda,
            None => t - self.start + 1,
        };
        self.cooldown = c;
        self.last_arrival = Some(t);
        Ok(Some(c))
    }
}

/// A device's energy process together with its bookkeeping.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyDevice {
    pub profile: EnergyProfile,
    pub state: EnergyState,
}

impl EnergyDevice {
    pub fn new(profile: EnergyProfile, start: u64) -> Self {
        Self {
            profile,
            state: EnergyState::new(start),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Participant {
    pub device: usize,
    pub cooldown: u64,
}

/// Whether arrivals come from the energy processes or every device is
/// always powered.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArrivalPolicy {
    Harvest,
    AlwaysOn,
}

/// `S_t` with each participant's cooldown for round `t`, in device order.
/// Device `m` draws from the `(Energy, m, t)` substream.
pub fn participants(
    devices: &mut [EnergyDevice],
    t: u64,
    policy: ArrivalPolicy,
    streams: &SeedStreams,
) -> Result<Vec<Participant>> {
    let mut out = Vec::new();
    for (m, d) in devices.iter_mut().enumerate() {
        let arrived = match policy {
            ArrivalPolicy::AlwaysOn => true,
            ArrivalPolicy::Harvest => {
                sample_arrival(&d.profile, t, &mut streams.stream(Purpose::Energy, m as u64, t))
            }
        };
        if let Some(cooldown) = d.state.update_cooldown(t, arrived)? {
            out.push(Participant { device: m, cooldown });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parses_profile_strings() {
        assert_eq!("bernoulli:0.1".parse::<EnergyProfile>().unwrap(), EnergyProfile::Bernoulli { rate: 0.1 });
        assert_eq!(
            "uniform:20".parse::<EnergyProfile>().unwrap(),
            EnergyProfile::Uniform { period: 20, phase: 0 }
        );
        assert_eq!(
            "uniform:20@7".parse::<EnergyProfile>().unwrap(),
            EnergyProfile::Uniform { period: 20, phase: 7 }
        );
        for bad in ["bernoulli:1.5", "uniform:0", "poisson:3", "bernoulli", "uniform:x"] {
            assert!(bad.parse::<EnergyProfile>().is_err(), "{bad}");
        }
    }

    #[test]
    fn degenerate_profiles_always_arrive() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let always = EnergyProfile::bernoulli(1.0).unwrap();
        let every = EnergyProfile::uniform(1, 0).unwrap();
        assert!((0..1000).all(|t| sample_arrival(&always, t, &mut rng)));
        assert!((0..1000).all(|t| sample_arrival(&every, t, &mut rng)));
        let never = EnergyProfile::bernoulli(0.0).unwrap();
        assert!((0..1000).all(|t| !sample_arrival(&never, t, &mut rng)));
    }

    #[test]
    fn bernoulli_frequency_matches_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let p = EnergyProfile::bernoulli(0.1).unwrap();
        let n = 100_000;
        let hits = (0..n).filter(|&t| sample_arrival(&p, t, &mut rng)).count();
        let freq = hits as f64 / n as f64;
        assert!((freq - 0.1).abs() < 0.01, "frequency {freq}");
    }

    #[test]
    fn bernoulli_gaps_are_geometric() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = EnergyProfile::bernoulli(0.2).unwrap();
        let mut state = EnergyState::new(0);
        let gaps: Vec<u64> = (0..200_000u64)
            .filter_map(|t| state.update_cooldown(t, sample_arrival(&p, t, &mut rng)).unwrap())
            .skip(1)
            .collect();
        let mean = gaps.iter().sum::<u64>() as f64 / gaps.len() as f64;
        assert!((mean - 5.0).abs() < 0.1, "mean gap {mean}");
    }

    #[test]
    fn uniform_windows_contain_exactly_one_arrival() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for (period, phase) in [(1, 0), (5, 3), (10, 9), (20, 11)] {
            let p = EnergyProfile::uniform(period, phase).unwrap();
            let arrivals: Vec<bool> = (0..400).map(|t| sample_arrival(&p, t, &mut rng)).collect();
            for w in arrivals.windows(period as usize) {
                assert_eq!(w.iter().filter(|&&a| a).count(), 1);
            }
        }
    }

    #[test]
    fn consecutive_arrivals_have_unit_cooldown() {
        let mut s = EnergyState::new(0);
        for t in 0..50 {
            assert_eq!(s.update_cooldown(t, true).unwrap(), Some(1));
        }
    }

    #[test]
    fn cooldown_is_gap_since_previous_arrival() {
        let mut s = EnergyState::new(0);
        assert_eq!(s.update_cooldown(3, true).unwrap(), Some(4));
        assert_eq!(s.update_cooldown(4, false).unwrap(), None);
        assert_eq!(s.update_cooldown(5, true).unwrap(), Some(2));
        assert_eq!(s.last_arrival(), Some(5));
    }

    #[test]
    fn first_arrival_bootstraps_from_training_start() {
        let mut s = EnergyState::new(10);
        assert_eq!(s.update_cooldown(10, true).unwrap(), Some(1));
        let mut s = EnergyState::new(10);
        assert_eq!(s.update_cooldown(14, true).unwrap(), Some(5));
    }

    #[test]
    fn non_monotone_time_is_rejected() {
        let mut s = EnergyState::new(0);
        s.update_cooldown(5, false).unwrap();
        assert!(matches!(
            s.update_cooldown(5, true),
            Err(Error::NonMonotoneTime { previous: 5, current: 5 })
        ));
        assert!(s.update_cooldown(4, true).is_err());
    }

    #[test]
    fn uniform_twenty_cooldown_settles_at_twenty() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = EnergyProfile::uniform(20, 6).unwrap();
        let mut s = EnergyState::new(0);
        let cooldowns: Vec<u64> = (0..100)
            .filter_map(|t| s.update_cooldown(t, sample_arrival(&p, t, &mut rng)).unwrap())
            .collect();
        assert_eq!(cooldowns, vec![7, 20, 20, 20, 20]);
    }

    #[test]
    fn participant_sets_follow_policies() {
        let streams = SeedStreams::new(1);
        let mut on: Vec<_> = (0..6).map(|_| EnergyDevice::new(EnergyProfile::bernoulli(1.0).unwrap(), 0)).collect();
        assert_eq!(participants(&mut on, 0, ArrivalPolicy::Harvest, &streams).unwrap().len(), 6);
        let mut off: Vec<_> = (0..6).map(|_| EnergyDevice::new(EnergyProfile::bernoulli(0.0).unwrap(), 0)).collect();
        assert!(participants(&mut off, 0, ArrivalPolicy::Harvest, &streams).unwrap().is_empty());
        let s = participants(&mut off, 1, ArrivalPolicy::AlwaysOn, &streams).unwrap();
        assert_eq!(s.len(), 6);
        assert!(s.iter().all(|p| p.cooldown == 2));
    }

    #[test]
    fn expected_participants_for_grouped_bernoulli() {
        let streams = SeedStreams::new(3);
        let rates = [1.0, 0.2, 0.1, 0.05];
        let mut devices: Vec<_> = (0..40)
            .map(|m| EnergyDevice::new(EnergyProfile::bernoulli(rates[m / 10]).unwrap(), 0))
            .collect();
        let rounds = 10_000;
        let total: usize = (0..rounds)
            .map(|t| participants(&mut devices, t, ArrivalPolicy::Harvest, &streams).unwrap().len())
            .sum();
        let mean = total as f64 / rounds as f64;
        assert!((mean - 13.5).abs() / 13.5 < 0.02, "mean |S_t| = {mean}");
    }

    #[test]
    fn stratified_phases_spread_each_period() {
        let profiles: Vec<_> = (0..20).map(|_| EnergyProfile::uniform(5, 0).unwrap()).collect();
        let phased = assign_phases(&profiles, PhaseAssignment::Stratified, &SeedStreams::new(0));
        let mut counts = [0; 5];
        for p in phased {
            if let EnergyProfile::Uniform { phase, .. } = p {
                counts[phase as usize] += 1;
            }
        }
        assert_eq!(counts, [4; 5]);
    }
}
