//! Topology, path loss and per-round Rayleigh fading.
//!
//! `h_{m,k}^n = √β_m · g` with `g ~ CN(0, σ_h²)` and `β_m = d_m^{-p}`; noise
//! `z_k^n ~ CN(0, σ_z²)`. Every entry is drawn fresh each round.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{Purpose, SeedStreams, NO_DEVICE};

#[derive(Clone, Debug, PartialEq)]
pub struct Topology {
    distances: Vec<f64>,
    path_loss_exponent: f64,
    gains: Vec<f64>,
}

impl Topology {
    pub fn from_distances(distances: Vec<f64>, path_loss_exponent: f64) -> Result<Self> {
        if let Some(&d) = distances.iter().find(|&&d| !(d > 0.0 && d.is_finite())) {
            return Err(Error::invalid("distance", format!("{d} is not positive")));
        }
        if !path_loss_exponent.is_finite() {
            return Err(Error::invalid("path_loss_exponent", "must be finite"));
        }
        let gains = distances
            .iter()
            .map(|d| d.powf(-path_loss_exponent))
            .collect();
        Ok(Self {
            distances,
            path_loss_exponent,
            gains,
        })
    }

    /// Distances i.i.d. uniform on `[lo, hi]`.
    pub fn build<R: Rng>(
        devices: usize,
        lo: f64,
        hi: f64,
        path_loss_exponent: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::InvalidDistanceRange { lo, hi });
        }
        let distances = (0..devices)
            .map(|_| if lo == hi { lo } else { rng.random_range(lo..=hi) })
            .collect();
        Self::from_distances(distances, path_loss_exponent)
    }

    /// Unit distance for every device, so `β_m = 1`.
    pub fn unit(devices: usize) -> Self {
        Self::from_distances(vec![1.0; devices], 0.0).expect("unit distances are valid")
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn path_loss_exponent(&self) -> f64 {
        self.path_loss_exponent
    }

    /// `β_m`.
    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn mean_gain(&self) -> f64 {
        self.gains.iter().sum::<f64>() / self.gains.len() as f64
    }

    pub fn mean_gain_over(&self, devices: &[usize]) -> f64 {
        devices.iter().map(|&m| self.gains[m]).sum::<f64>() / devices.len() as f64
    }
}

/// How the server picks `β̄` for recovery scaling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BetaBar {
    MeanParticipants,
    MeanAll,
    Fixed(f64),
}

impl BetaBar {
    pub fn resolve(&self, topology: &Topology, participants: &[usize]) -> f64 {
        match *self {
            BetaBar::MeanParticipants if !participants.is_empty() => {
                topology.mean_gain_over(participants)
            }
            BetaBar::MeanParticipants | BetaBar::MeanAll => topology.mean_gain(),
            BetaBar::Fixed(v) => v,
        }
    }
}

impl fmt::Display for BetaBar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BetaBar::MeanParticipants => f.write_str("mean_participants"),
            BetaBar::MeanAll => f.write_str("mean_all"),
            BetaBar::Fixed(v) => write!(f, "fixed:{v}"),
        }
    }
}

impl FromStr for BetaBar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::invalid(
                "beta_bar",
                "expected mean_participants, mean_all or fixed:<value>",
            )
        };
        match s {
            "mean_participants" => Ok(BetaBar::MeanParticipants),
            "mean_all" => Ok(BetaBar::MeanAll),
            _ => {
                let v: f64 = s
                    .strip_prefix("fixed:")
                    .ok_or_else(bad)?
                    .parse()
                    .map_err(|_| bad())?;
                if v > 0.0 && v.is_finite() {
                    Ok(BetaBar::Fixed(v))
                } else {
                    Err(bad())
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelParams {
    /// `K`.
    pub antennas: usize,
    /// `σ_h²`.
    pub fading_var: f64,
    /// `σ_z²`.
    pub noise_var: f64,
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if self.antennas == 0 {
            return Err(Error::invalid("antennas", "must be at least 1"));
        }
        if !(self.fading_var > 0.0 && self.fading_var.is_finite()) {
            return Err(Error::invalid("sigma_h2", "must be positive"));
        }
        if !(self.noise_var >= 0.0 && self.noise_var.is_finite()) {
            return Err(Error::invalid("sigma_z2", "must be non-negative"));
        }
        Ok(())
    }
}

/// One round of fading and noise. Coefficients are stored per participant
/// with antenna-major layout, `index = k * N + n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    devices: Vec<usize>,
    antennas: usize,
    symbols: usize,
    fading: Vec<Vec<Complex64>>,
    noise: Vec<Complex64>,
}

pub(crate) fn complex_normal<R: Rng>(rng: &mut R, var: f64) -> Complex64 {
    let s = (0.5 * var).sqrt();
    Complex64::new(
        s * rng.sample::<f64, _>(StandardNormal),
        s * rng.sample::<f64, _>(StandardNormal),
    )
}

impl ChannelRealization {
    /// Builds a realization from explicit coefficients.
    pub fn from_parts(
        devices: Vec<usize>,
        antennas: usize,
        symbols: usize,
        fading: Vec<Vec<Complex64>>,
        noise: Vec<Complex64>,
    ) -> Result<Self> {
        let len = antennas * symbols;
        if fading.len() != devices.len() {
            return Err(Error::DimensionMismatch {
                expected: devices.len(),
                found: fading.len(),
            });
        }
        for f in fading.iter().chain(std::iter::once(&noise)) {
            if f.len() != len {
                return Err(Error::DimensionMismatch {
                    expected: len,
                    found: f.len(),
                });
            }
        }
        Ok(Self {
            devices,
            antennas,
            symbols,
            fading,
            noise,
        })
    }

    pub fn devices(&self) -> &[usize] {
        &self.devices
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn symbols(&self) -> usize {
        self.symbols
    }

    /// Coefficients of the `i`-th participant (not device index).
    pub fn fading(&self, i: usize) -> &[Complex64] {
        &self.fading[i]
    }

    pub fn noise(&self) -> &[Complex64] {
        &self.noise
    }

    pub fn coefficient(&self, i: usize, k: usize, n: usize) -> Complex64 {
        self.fading[i][k * self.symbols + n]
    }
}

/// Draws a fresh realization for `participants` at `round`.
///
/// Device `m`'s coefficients come from the `(Fading, m, round)` substream and
/// the noise from `(Noise, NO_DEVICE, round)`, so devices are drawn in
/// parallel without affecting the result.
pub fn draw_channel(
    topology: &Topology,
    participants: &[usize],
    params: &ChannelParams,
    symbols: usize,
    streams: &SeedStreams,
    round: u64,
) -> Result<ChannelRealization> {
    params.validate()?;
    if participants.is_empty() {
        return Err(Error::RoundSkipped);
    }
    if let Some(&m) = participants.iter().find(|&&m| m >= topology.len()) {
        return Err(Error::invalid("participants", format!("device {m} not in topology")));
    }
    let len = params.antennas * symbols;
    let fading = participants
        .par_iter()
        .map(|&m| {
            let mut rng = streams.stream(Purpose::Fading, m as u64, round);
            let var = params.fading_var * topology.gains()[m];
            (0..len).map(|_| complex_normal(&mut rng, var)).collect()
        })
        .collect();
    let noise = if params.noise_var == 0.0 {
        vec![Complex64::new(0.0, 0.0); len]
    } else {
        let mut rng = streams.stream(Purpose::Noise, NO_DEVICE, round);
        (0..len)
            .map(|_| complex_normal(&mut rng, params.noise_var))
            .collect()
    };
    ChannelRealization::from_parts(
        participants.to_vec(),
        params.antennas,
        symbols,
        fading,
        noise,
    )
}
