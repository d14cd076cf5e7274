//! Flat `key = value` configuration.
//!
//! Blank lines and text after `#` are ignored. Every key has a default, so an
//! empty file is a complete configuration. Overrides use the same syntax and
//! are applied after the file.

use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use crate::bound::{BoundParams, ParticipantStats};
use crate::channel::{BetaBar, ChannelParams, Topology};
use crate::energy::{assign_phases, EnergyProfile, PhaseAssignment};
use crate::error::{Error, Result};
use crate::model::{BatchSize, DenseNetTask, LogisticTask, LossTask, QuadraticTask, TaskKind};
use crate::rng::{Purpose, SeedStreams, NO_DEVICE};
use crate::trainer::{Federation, LearningRate, Optimizer, Scenario, ScenarioConfig};

/// Splits text into `(line, key, value)` triples.
pub fn parse_pairs(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::ConfigSyntax {
            line: i + 1,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        let key = k.trim();
        if key.is_empty() {
            return Err(Error::ConfigSyntax {
                line: i + 1,
                message: "empty key".into(),
            });
        }
        out.push((i + 1, key.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Splits `tau=3 rounds=400` style override strings into pairs.
pub fn parse_overrides<S: AsRef<str>>(items: &[S]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for item in items {
        for token in item.as_ref().split_whitespace() {
            let (k, v) = token.split_once('=').ok_or_else(|| Error::ConfigSyntax {
                line: 0,
                message: format!("override `{token}` is not key=value"),
            })?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
    }
    Ok(out)
}

fn value<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::invalid(key, format!("cannot parse `{v}`")))
}

fn list<T: FromStr<Err = Error>>(v: &str) -> Result<Vec<T>> {
    v.split(',').map(|s| s.trim().parse()).collect()
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

/// Simulation settings. Defaults describe 40 devices in four equal energy
/// groups, `K = 5M` antennas, path-loss exponent 4 and unit fading and noise
/// variances.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub task: TaskKind,
    pub dim: usize,
    pub hidden: usize,
    pub devices: usize,
    pub samples_per_device: usize,
    pub sample_spread: f64,
    pub center_scale: f64,
    pub l2: f64,
    pub test_samples: usize,
    pub energy_groups: Vec<EnergyProfile>,
    pub uniform_phase: PhaseAssignment,
    pub distance_min: f64,
    pub distance_max: f64,
    pub path_loss_exponent: f64,
    /// `None` means `5 × devices`.
    pub antennas: Option<usize>,
    pub sigma_h2: f64,
    pub sigma_z2: f64,
    pub beta_bar: BetaBar,
    pub tau: usize,
    pub rounds: u64,
    pub lr: LearningRate,
    pub batch: BatchSize,
    pub optimizer: String,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::EhOta,
            task: TaskKind::Quadratic,
            dim: 20,
            hidden: 16,
            devices: 40,
            samples_per_device: 256,
            sample_spread: 1.0,
            center_scale: 1.0,
            l2: 0.01,
            test_samples: 1000,
            energy_groups: [1.0, 0.2, 0.1, 0.05]
                .iter()
                .map(|&a| EnergyProfile::Bernoulli { rate: a })
                .collect(),
            uniform_phase: PhaseAssignment::Random,
            distance_min: 0.5,
            distance_max: 2.0,
            path_loss_exponent: 4.0,
            antennas: None,
            sigma_h2: 1.0,
            sigma_z2: 1.0,
            beta_bar: BetaBar::MeanParticipants,
            tau: 1,
            rounds: 1000,
            lr: LearningRate::Constant(0.05),
            batch: BatchSize::Fixed(128),
            optimizer: "sgd".into(),
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 1,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (_, k, v) in parse_pairs(text)? {
            cfg.set(&k, &v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn apply_overrides(&mut self, pairs: &[(String, String)]) -> Result<()> {
        for (k, v) in pairs {
            self.set(k, v)?;
        }
        self.validate()
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "scenario" => self.scenario = v.parse()?,
            "task" => self.task = v.parse()?,
            "dim" => self.dim = value(key, v)?,
            "hidden" => self.hidden = value(key, v)?,
            "devices" => self.devices = value(key, v)?,
            "samples_per_device" => self.samples_per_device = value(key, v)?,
            "sample_spread" => self.sample_spread = value(key, v)?,
            "center_scale" => self.center_scale = value(key, v)?,
            "l2" => self.l2 = value(key, v)?,
            "test_samples" => self.test_samples = value(key, v)?,
            "energy_groups" => self.energy_groups = list(v)?,
            "uniform_phase" => self.uniform_phase = v.parse()?,
            "distance_min" => self.distance_min = value(key, v)?,
            "distance_max" => self.distance_max = value(key, v)?,
            "path_loss_exponent" => self.path_loss_exponent = value(key, v)?,
            "antennas" => {
                self.antennas = match v {
                    "auto" => None,
                    _ => Some(value(key, v)?),
                }
            }
            "sigma_h2" => self.sigma_h2 = value(key, v)?,
            "sigma_z2" => self.sigma_z2 = value(key, v)?,
            "beta_bar" => self.beta_bar = v.parse()?,
            "tau" => self.tau = value(key, v)?,
            "rounds" => self.rounds = value(key, v)?,
            "lr" => self.lr = v.parse()?,
            "batch" => self.batch = v.parse()?,
            "optimizer" => self.optimizer = v.to_string(),
            "adam_beta1" => self.adam_beta1 = value(key, v)?,
            "adam_beta2" => self.adam_beta2 = value(key, v)?,
            "adam_eps" => self.adam_eps = value(key, v)?,
            "seed" => self.seed = value(key, v)?,
            "out_dir" => self.out_dir = PathBuf::from(v),
            _ => return Err(Error::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, name: &str, reason: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::invalid(name, reason))
            }
        };
        check(self.devices > 0, "devices", "must be positive")?;
        check(self.dim >= 2 && self.dim.is_multiple_of(2), "dim", "must be even and at least 2")?;
        check(self.samples_per_device > 0, "samples_per_device", "must be positive")?;
        check(!self.energy_groups.is_empty(), "energy_groups", "needs at least one profile")?;
        check(self.energy_groups.len() <= self.devices, "energy_groups", "more groups than devices")?;
        check(self.tau > 0, "tau", "must be positive")?;
        check(self.antennas != Some(0), "antennas", "must be positive")?;
        check(self.sigma_h2 > 0.0, "sigma_h2", "must be positive")?;
        check(self.sigma_z2 >= 0.0, "sigma_z2", "must be non-negative")?;
        check(self.distance_min > 0.0 && self.distance_min <= self.distance_max, "distance_min", "need 0 < distance_min <= distance_max")?;
        self.optimizer()?;
        Ok(())
    }

    pub fn antennas(&self) -> usize {
        self.antennas.unwrap_or(5 * self.devices)
    }

    pub fn optimizer(&self) -> Result<Optimizer> {
        match self.optimizer.as_str() {
            "sgd" => Ok(Optimizer::Sgd),
            "adam" => Ok(Optimizer::Adam {
                beta1: self.adam_beta1,
                beta2: self.adam_beta2,
                eps: self.adam_eps,
            }),
            other => Err(Error::invalid("optimizer", format!("expected sgd or adam, got `{other}`"))),
        }
    }

    pub fn scenario_config(&self) -> Result<ScenarioConfig> {
        Ok(ScenarioConfig {
            scenario: self.scenario,
            tau: self.tau,
            rounds: self.rounds,
            lr: self.lr,
            batch: self.batch,
            optimizer: self.optimizer()?,
            seed: self.seed,
        })
    }

    /// Device `m` of `M` belongs to group `⌊m G / M⌋`.
    pub fn device_profiles(&self) -> Vec<EnergyProfile> {
        let g = self.energy_groups.len();
        (0..self.devices)
            .map(|m| self.energy_groups[m * g / self.devices])
            .collect()
    }

    /// Resolved settings, one `key = value` line each. Parsing the output
    /// gives back an equal configuration.
    pub fn manifest(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").expect("writing to a String");
        kv("scenario", self.scenario.to_string());
        kv("task", self.task.to_string());
        kv("dim", self.dim.to_string());
        kv("hidden", self.hidden.to_string());
        kv("devices", self.devices.to_string());
        kv("samples_per_device", self.samples_per_device.to_string());
        kv("sample_spread", self.sample_spread.to_string());
        kv("center_scale", self.center_scale.to_string());
        kv("l2", self.l2.to_string());
        kv("test_samples", self.test_samples.to_string());
        kv("energy_groups", join(&self.energy_groups));
        kv("uniform_phase", self.uniform_phase.to_string());
        kv("distance_min", self.distance_min.to_string());
        kv("distance_max", self.distance_max.to_string());
        kv("path_loss_exponent", self.path_loss_exponent.to_string());
        kv("antennas", self.antennas().to_string());
        kv("sigma_h2", self.sigma_h2.to_string());
        kv("sigma_z2", self.sigma_z2.to_string());
        kv("beta_bar", self.beta_bar.to_string());
        kv("tau", self.tau.to_string());
        kv("rounds", self.rounds.to_string());
        kv("lr", self.lr.to_string());
        kv("batch", self.batch.to_string());
        kv("optimizer", self.optimizer.clone());
        kv("adam_beta1", self.adam_beta1.to_string());
        kv("adam_beta2", self.adam_beta2.to_string());
        kv("adam_eps", self.adam_eps.to_string());
        kv("seed", self.seed.to_string());
        kv("out_dir", self.out_dir.display().to_string());
        s
    }
}

/// Builds the task, energy profiles and topology from `cfg.seed`.
pub fn build_federation(cfg: &RunConfig) -> Result<Federation> {
    cfg.validate()?;
    let streams = SeedStreams::new(cfg.seed);
    let task = match cfg.task {
        TaskKind::Quadratic => LossTask::Quadratic(QuadraticTask::generate(
            cfg.devices,
            cfg.dim,
            cfg.samples_per_device,
            cfg.center_scale,
            cfg.sample_spread,
            &streams,
        )?),
        TaskKind::Logistic => LossTask::Logistic(LogisticTask::generate(
            cfg.devices,
            cfg.dim,
            cfg.samples_per_device,
            cfg.test_samples,
            cfg.l2,
            &streams,
        )?),
        TaskKind::DenseNet => LossTask::DenseNet(DenseNetTask::new(cfg.devices, cfg.hidden, &streams)?),
    };
    let profiles = assign_phases(&cfg.device_profiles(), cfg.uniform_phase, &streams);
    let topology = Topology::build(
        cfg.devices,
        cfg.distance_min,
        cfg.distance_max,
        cfg.path_loss_exponent,
        &mut streams.stream(Purpose::Topology, NO_DEVICE, 0),
    )?;
    Ok(Federation {
        task,
        profiles,
        topology,
        channel: ChannelParams {
            antennas: cfg.antennas(),
            fading_var: cfg.sigma_h2,
            noise_var: cfg.sigma_z2,
        },
        beta_bar: cfg.beta_bar,
    })
}

/// Bound-evaluator settings; defaults are [`BoundParams::large_model`] with the
/// harvesting curves at the mean rate of the default energy groups.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundConfig {
    pub params: BoundParams,
    pub eh_alpha: f64,
    pub out_dir: PathBuf,
}

impl Default for BoundConfig {
    fn default() -> Self {
        Self {
            params: BoundParams::large_model(),
            eh_alpha: (1.0 + 0.2 + 0.1 + 0.05) / 4.0,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl BoundConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (_, k, v) in parse_pairs(text)? {
            cfg.set(&k, &v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn apply_overrides(&mut self, pairs: &[(String, String)]) -> Result<()> {
        for (k, v) in pairs {
            self.set(k, v)?;
        }
        self.validate()
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let p = &mut self.params;
        match key {
            "devices" => {
                let m: usize = value(key, v)?;
                let keep_ratio = (p.data_ratio - 1.0 / p.devices as f64).abs() < 1e-15;
                if p.gains.iter().all(|&g| g == p.gains[0]) {
                    p.gains = vec![p.gains[0]; m];
                }
                if keep_ratio {
                    p.data_ratio = 1.0 / m as f64;
                }
                p.devices = m;
            }
            "antennas" => p.antennas = value(key, v)?,
            "symbols" => p.symbols = value(key, v)?,
            "tau" => p.tau = value(key, v)?,
            "eh_alpha" => self.eh_alpha = value(key, v)?,
            "data_ratio" => p.data_ratio = value(key, v)?,
            "gains" => {
                let g: Vec<f64> = v
                    .split(',')
                    .map(|s| value(key, s.trim()))
                    .collect::<Result<_>>()?;
                p.gains = if g.len() == 1 { vec![g[0]; p.devices] } else { g };
            }
            "beta_bar" => p.beta_bar = value(key, v)?,
            "sigma_h2" => p.fading_var = value(key, v)?,
            "sigma_z2" => p.noise_var = value(key, v)?,
            "grad_sq" => p.grad_sq = value(key, v)?,
            "smoothness" => p.smoothness = value(key, v)?,
            "mu" => p.mu = value(key, v)?,
            "gamma" => p.gamma = value(key, v)?,
            "lr" => p.lr = v.parse()?,
            "initial_dist" => p.initial_dist = value(key, v)?,
            "rounds" => p.rounds = value(key, v)?,
            "a_variant" => p.variant = v.parse()?,
            "participants" => p.stats = v.parse::<ParticipantStats>()?,
            "out_dir" => self.out_dir = PathBuf::from(v),
            _ => return Err(Error::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eh_alpha > 0.0 && self.eh_alpha <= 1.0) {
            return Err(Error::invalid("eh_alpha", "must lie in (0, 1]"));
        }
        self.params.validate()
    }

    pub fn manifest(&self) -> String {
        let p = &self.params;
        let gains = if p.gains.iter().all(|&g| g == p.gains[0]) {
            p.gains[0].to_string()
        } else {
            join(&p.gains)
        };
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").expect("writing to a String");
        kv("devices", p.devices.to_string());
        kv("antennas", p.antennas.to_string());
        kv("symbols", p.symbols.to_string());
        kv("tau", p.tau.to_string());
        kv("eh_alpha", self.eh_alpha.to_string());
        kv("data_ratio", p.data_ratio.to_string());
        kv("gains", gains);
        kv("beta_bar", p.beta_bar.to_string());
        kv("sigma_h2", p.fading_var.to_string());
        kv("sigma_z2", p.noise_var.to_string());
        kv("grad_sq", p.grad_sq.to_string());
        kv("smoothness", p.smoothness.to_string());
        kv("mu", p.mu.to_string());
        kv("gamma", p.gamma.to_string());
        kv("lr", p.lr.to_string());
        kv("initial_dist", p.initial_dist.to_string());
        kv("rounds", p.rounds.to_string());
        kv("a_variant", p.variant.to_string());
        kv("participants", p.stats.to_string());
        kv("out_dir", self.out_dir.display().to_string());
        s
    }
}
