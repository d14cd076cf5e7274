//! Global round loop.
//!
//! Each round the server broadcasts `θ_PS(t)`, the energized devices run `τ`
//! local steps, scale their differences by `p_m(t) c_m(t)` and the chosen
//! backend aggregates them into the update for `θ_PS(t + 1)`.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::channel::{BetaBar, ChannelParams, Topology};
use crate::energy::{participants, ArrivalPolicy, EnergyDevice, EnergyProfile, Participant};
use crate::error::{Error, Result};
use crate::model::{BatchSize, LossTask, ParameterVector};
use crate::ota::{scale_difference, total_weight, Aggregator, ErrorFree, OverTheAir, TermPowers};
use crate::rng::{Purpose, SeedStreams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// Every device every round, error-free aggregation.
    ConventionalFl,
    /// Every device every round, over the air.
    OtaFullEnergy,
    /// Harvesting devices, cooldown-weighted, error-free aggregation.
    EhErrorFree,
    /// Harvesting devices with `c_m(t) = 1`, error-free aggregation.
    EhErrorFreeUnweighted,
    /// Harvesting devices, cooldown-weighted, over the air.
    EhOta,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::ConventionalFl,
        Scenario::OtaFullEnergy,
        Scenario::EhErrorFree,
        Scenario::EhErrorFreeUnweighted,
        Scenario::EhOta,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::ConventionalFl => "conventional_fl",
            Scenario::OtaFullEnergy => "ota_full_energy",
            Scenario::EhErrorFree => "eh_error_free",
            Scenario::EhErrorFreeUnweighted => "eh_error_free_unweighted",
            Scenario::EhOta => "eh_ota",
        }
    }

    pub fn harvests(self) -> bool {
        !matches!(self, Scenario::ConventionalFl | Scenario::OtaFullEnergy)
    }

    pub fn over_the_air(self) -> bool {
        matches!(self, Scenario::OtaFullEnergy | Scenario::EhOta)
    }

    pub fn cooldown_weighted(self) -> bool {
        self != Scenario::EhErrorFreeUnweighted
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s.trim())
            .ok_or_else(|| Error::invalid("scenario", format!("unknown scenario `{s}`")))
    }
}

/// `η(t)`, either constant or `a − b t` floored at zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LearningRate {
    Constant(f64),
    Linear { initial: f64, slope: f64 },
}

impl LearningRate {
    pub fn at(&self, t: u64) -> f64 {
        match *self {
            LearningRate::Constant(eta) => eta,
            LearningRate::Linear { initial, slope } => (initial - slope * t as f64).max(0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            LearningRate::Constant(eta) => eta.is_finite() && eta >= 0.0,
            LearningRate::Linear { initial, slope } => {
                initial.is_finite() && initial >= 0.0 && slope.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("lr", "must be finite and non-negative"))
        }
    }
}

impl fmt::Display for LearningRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LearningRate::Constant(eta) => write!(f, "{eta}"),
            LearningRate::Linear { initial, slope } => write!(f, "linear:{initial}:{slope}"),
        }
    }
}

impl FromStr for LearningRate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid("lr", format!("expected a number or `linear:a:b`, got `{s}`"));
        let lr = match s.trim().strip_prefix("linear:") {
            Some(rest) => {
                let (a, b) = rest.split_once(':').ok_or_else(bad)?;
                LearningRate::Linear {
                    initial: a.trim().parse().map_err(|_| bad())?,
                    slope: b.trim().parse().map_err(|_| bad())?,
                }
            }
            None => LearningRate::Constant(s.trim().parse().map_err(|_| bad())?),
        };
        lr.validate()?;
        Ok(lr)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Per-device Adam moments, kept across rounds.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    steps: i32,
}

impl AdamState {
    pub fn new(dim: usize) -> Self {
        Self {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            steps: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub tau: usize,
    pub rounds: u64,
    pub lr: LearningRate,
    pub batch: BatchSize,
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tau == 0 {
            return Err(Error::invalid("tau", "must be at least 1"));
        }
        self.lr.validate()
    }
}

/// Everything about the system that does not change between scenarios.
#[derive(Clone, Debug)]
pub struct Federation {
    pub task: LossTask,
    /// One profile per device, phases already assigned.
    pub profiles: Vec<EnergyProfile>,
    pub topology: Topology,
    pub channel: ChannelParams,
    pub beta_bar: BetaBar,
}

impl Federation {
    pub fn validate(&self) -> Result<()> {
        let m = self.task.num_devices();
        for (name, len) in [("energy profiles", self.profiles.len()), ("topology", self.topology.len())] {
            if len != m {
                return Err(Error::invalid(name, format!("{len} entries for {m} devices")));
            }
        }
        self.channel.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord {
    pub round: u64,
    pub participants: usize,
    /// `C(t)`.
    pub total_weight: f64,
    /// Global loss after the round's update.
    pub loss: f64,
    pub accuracy: Option<f64>,
    pub powers: Option<TermPowers>,
    pub transmit_energy: f64,
    pub skipped: bool,
    pub wall_time: Duration,
}

/// Runs `τ` local steps from `theta` and returns `θ^{τ+1} − θ^1`.
#[allow(clippy::too_many_arguments)]
pub fn local_update(
    task: &LossTask,
    device: usize,
    theta: &ParameterVector,
    tau: usize,
    eta: f64,
    batch: BatchSize,
    optimizer: Optimizer,
    adam: Option<&mut AdamState>,
    streams: &SeedStreams,
    round: u64,
) -> Result<ParameterVector> {
    let mut rng = streams.stream(Purpose::Batch, device as u64, round);
    let mut local = theta.clone();
    let mut adam = adam;
    for _ in 0..tau {
        let idx = task.sample_batch(device, batch, &mut rng)?;
        let g = task.stochastic_gradient(device, &local, &idx)?;
        match (optimizer, adam.as_deref_mut()) {
            (Optimizer::Adam { beta1, beta2, eps }, Some(st)) => {
                st.steps += 1;
                let c1 = 1.0 - beta1.powi(st.steps);
                let c2 = 1.0 - beta2.powi(st.steps);
                let x = local.as_mut_slice();
                for (j, gj) in g.as_slice().iter().enumerate() {
                    st.m[j] = beta1 * st.m[j] + (1.0 - beta1) * gj;
                    st.v[j] = beta2 * st.v[j] + (1.0 - beta2) * gj * gj;
                    x[j] -= eta * (st.m[j] / c1) / ((st.v[j] / c2).sqrt() + eps);
                }
            }
            (Optimizer::Adam { .. }, None) => {
                return Err(Error::invalid("optimizer", "adam requires per-device state"))
            }
            (Optimizer::Sgd, _) => local.axpy(-eta, &g)?,
        }
    }
    local.sub(theta)
}

pub struct Simulator<'a> {
    federation: &'a Federation,
    config: ScenarioConfig,
    streams: SeedStreams,
    theta: ParameterVector,
    devices: Vec<EnergyDevice>,
    adam: Vec<Option<AdamState>>,
    aggregator: Box<dyn Aggregator + 'a>,
    next_round: u64,
}

impl<'a> Simulator<'a> {
    pub fn new(federation: &'a Federation, config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        federation.validate()?;
        let streams = SeedStreams::new(config.seed);
        let theta = federation.task.initial_model(&streams);
        Self::with_initial_model(federation, config, theta)
    }

    pub fn with_initial_model(
        federation: &'a Federation,
        config: ScenarioConfig,
        theta: ParameterVector,
    ) -> Result<Self> {
        config.validate()?;
        federation.validate()?;
        theta.check_len(federation.task.dim())?;
        let streams = SeedStreams::new(config.seed);
        let aggregator: Box<dyn Aggregator> = if config.scenario.over_the_air() {
            Box::new(OverTheAir {
                topology: federation.topology.clone(),
                params: federation.channel,
                beta_bar: federation.beta_bar,
                streams,
            })
        } else {
            Box::new(ErrorFree)
        };
        let dim = federation.task.dim();
        let adam = match config.optimizer {
            Optimizer::Adam { .. } => vec![Some(AdamState::new(dim)); federation.profiles.len()],
            Optimizer::Sgd => vec![None; federation.profiles.len()],
        };
        Ok(Self {
            federation,
            config,
            streams,
            theta,
            devices: federation.profiles.iter().map(|&p| EnergyDevice::new(p, 0)).collect(),
            adam,
            aggregator,
            next_round: 0,
        })
    }

    pub fn model(&self) -> &ParameterVector {
        &self.theta
    }

    pub fn next_round(&self) -> u64 {
        self.next_round
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn run_round(&mut self) -> Result<RoundRecord> {
        let start = Instant::now();
        let t = self.next_round;
        self.next_round += 1;
        let task = &self.federation.task;
        let policy = if self.config.scenario.harvests() {
            ArrivalPolicy::Harvest
        } else {
            ArrivalPolicy::AlwaysOn
        };
        let active = participants(&mut self.devices, t, policy, &self.streams)?;
        let finish = |theta: &ParameterVector, rec: RoundRecord| -> Result<RoundRecord> {
            Ok(RoundRecord {
                loss: task.global_loss(theta)?,
                accuracy: task.test_accuracy(theta),
                wall_time: start.elapsed(),
                ..rec
            })
        };
        let empty = RoundRecord {
            round: t,
            participants: active.len(),
            total_weight: 0.0,
            loss: f64::NAN,
            accuracy: None,
            powers: None,
            transmit_energy: 0.0,
            skipped: true,
            wall_time: Duration::ZERO,
        };
        if active.is_empty() {
            return finish(&self.theta, empty);
        }

        let eta = self.config.lr.at(t);
        let sizes = task.sizes();
        let data: usize = active.iter().map(|p| sizes[p.device]).sum();
        let mut work: Vec<(Participant, Option<AdamState>)> = active
            .iter()
            .map(|&p| (p, self.adam[p.device].take()))
            .collect();
        let cfg = self.config;
        let (theta, streams) = (&self.theta, &self.streams);
        let deltas: Vec<Result<ParameterVector>> = work
            .par_iter_mut()
            .map(|(p, adam)| {
                local_update(
                    task, p.device, theta, cfg.tau, eta, cfg.batch, cfg.optimizer,
                    adam.as_mut(), streams, t,
                )
            })
            .collect();
        for (p, adam) in work {
            self.adam[p.device] = adam;
        }
        let mut scaled = Vec::with_capacity(active.len());
        for (p, delta) in active.iter().zip(deltas) {
            let share = sizes[p.device] as f64 / data as f64;
            let cooldown = if cfg.scenario.cooldown_weighted() { p.cooldown } else { 1 };
            scaled.push(scale_difference(&delta?, share, cooldown)?);
        }
        let ids: Vec<usize> = active.iter().map(|p| p.device).collect();
        let agg = self.aggregator.aggregate(t, &ids, &scaled)?;
        self.theta.axpy(1.0, &agg.update)?;
        if !self.theta.is_finite() {
            return Err(Error::Diverged(t));
        }
        finish(
            &self.theta,
            RoundRecord {
                total_weight: total_weight(&scaled),
                powers: agg.powers,
                transmit_energy: agg.transmit_energy,
                skipped: false,
                ..empty
            },
        )
    }

    /// Runs the configured number of rounds from the current state.
    pub fn run(&mut self) -> Result<Vec<RoundRecord>> {
        (0..self.config.rounds).map(|_| self.run_round()).collect()
    }
}

/// Builds a simulator and runs it to completion.
pub fn run_experiment(
    federation: &Federation,
    config: ScenarioConfig,
) -> Result<(Vec<RoundRecord>, ParameterVector)> {
    let mut sim = Simulator::new(federation, config)?;
    let records = sim.run()?;
    Ok((records, sim.theta))
}
