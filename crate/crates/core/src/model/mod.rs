//! Model parameters, loss tasks and their gradients.
//!
//! [`LossTask`] evaluates the data-weighted global loss
//! `F(θ) = Σ_m (|B_m| / B) F_m(θ)` and mini-batch gradients of the local
//! losses. The quadratic task is strongly convex with known optimum and is the
//! one the analytic tests lean on.

mod dense;
mod logistic;
mod quadratic;
mod vector;

use std::fmt;
use std::str::FromStr;

use rand::Rng;

pub use dense::DenseNetTask;
pub use logistic::LogisticTask;
pub use quadratic::QuadraticTask;
pub use vector::{pack, pack_slice, unpack, ComplexSymbolVector, ParameterVector};

use crate::error::{Error, Result};
use crate::rng::SeedStreams;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskKind {
    Quadratic,
    Logistic,
    DenseNet,
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskKind::Quadratic => "quadratic",
            TaskKind::Logistic => "logistic",
            TaskKind::DenseNet => "dense_net",
        })
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadratic" => Ok(TaskKind::Quadratic),
            "logistic" => Ok(TaskKind::Logistic),
            "dense_net" => Ok(TaskKind::DenseNet),
            other => Err(Error::invalid(
                "task",
                format!("`{other}` is not one of quadratic, logistic, dense_net"),
            )),
        }
    }
}

/// Mini-batch size for local SGD.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BatchSize {
    Full,
    Fixed(usize),
}

impl fmt::Display for BatchSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BatchSize::Full => f.write_str("full"),
            BatchSize::Fixed(n) => write!(f, "{n}"),
        }
    }
}

impl FromStr for BatchSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "full" {
            return Ok(BatchSize::Full);
        }
        match s.parse::<usize>() {
            Ok(n) if n > 0 => Ok(BatchSize::Fixed(n)),
            _ => Err(Error::invalid("batch", "expected `full` or a positive integer")),
        }
    }
}

#[derive(Clone, Debug)]
pub enum LossTask {
    Quadratic(QuadraticTask),
    Logistic(LogisticTask),
    DenseNet(DenseNetTask),
}

impl LossTask {
    pub fn kind(&self) -> TaskKind {
        match self {
            LossTask::Quadratic(_) => TaskKind::Quadratic,
            LossTask::Logistic(_) => TaskKind::Logistic,
            LossTask::DenseNet(_) => TaskKind::DenseNet,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            LossTask::Quadratic(t) => t.dim(),
            LossTask::Logistic(t) => t.dim(),
            LossTask::DenseNet(t) => t.dim(),
        }
    }

    pub fn sizes(&self) -> Vec<usize> {
        match self {
            LossTask::Quadratic(t) => t.sizes().to_vec(),
            LossTask::Logistic(t) => t.sizes(),
            LossTask::DenseNet(t) => t.sizes(),
        }
    }

    pub fn num_devices(&self) -> usize {
        self.sizes().len()
    }

    pub fn device_len(&self, m: usize) -> usize {
        self.sizes()[m]
    }

    /// `F_m(θ)`, the average per-sample loss over device `m`'s data.
    pub fn device_loss(&self, m: usize, theta: &ParameterVector) -> Result<f64> {
        theta.check_len(self.dim())?;
        Ok(match self {
            LossTask::Quadratic(t) => t.device_loss(m, theta),
            LossTask::Logistic(t) => t.device_loss(m, theta),
            LossTask::DenseNet(t) => t.device_loss(m, theta),
        })
    }

    pub fn global_loss(&self, theta: &ParameterVector) -> Result<f64> {
        theta.check_len(self.dim())?;
        let sizes = self.sizes();
        let total: usize = sizes.iter().sum();
        sizes
            .iter()
            .enumerate()
            .map(|(m, &n)| Ok(n as f64 / total as f64 * self.device_loss(m, theta)?))
            .sum()
    }

    /// `∇F_m(θ, ξ)` averaged over the batch indices.
    pub fn stochastic_gradient(
        &self,
        m: usize,
        theta: &ParameterVector,
        batch: &[usize],
    ) -> Result<ParameterVector> {
        theta.check_len(self.dim())?;
        let n = self.device_len(m);
        if n == 0 {
            return Err(Error::EmptyDataset(m));
        }
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if let Some(&bad) = batch.iter().find(|&&u| u >= n) {
            return Err(Error::invalid("batch", format!("index {bad} out of range")));
        }
        let g = match self {
            LossTask::Quadratic(t) => t.gradient(m, theta, batch),
            LossTask::Logistic(t) => t.gradient(m, theta, batch),
            LossTask::DenseNet(t) => t.gradient(m, theta, batch),
        };
        ParameterVector::new(g)
    }

    pub fn full_gradient(&self, m: usize, theta: &ParameterVector) -> Result<ParameterVector> {
        let batch: Vec<usize> = (0..self.device_len(m)).collect();
        self.stochastic_gradient(m, theta, &batch)
    }

    /// Uniform batch without replacement; the full set when the batch size
    /// reaches `|B_m|`.
    pub fn sample_batch<R: Rng>(&self, m: usize, size: BatchSize, rng: &mut R) -> Result<Vec<usize>> {
        let n = self.device_len(m);
        if n == 0 {
            return Err(Error::EmptyDataset(m));
        }
        Ok(match size {
            BatchSize::Fixed(k) if k < n => rand::seq::index::sample(rng, n, k).into_vec(),
            _ => (0..n).collect(),
        })
    }

    pub fn test_accuracy(&self, theta: &ParameterVector) -> Option<f64> {
        match self {
            LossTask::Quadratic(_) => None,
            LossTask::Logistic(t) => Some(t.test_accuracy(theta)),
            LossTask::DenseNet(t) => Some(t.test_accuracy(theta)),
        }
    }

    pub fn initial_model(&self, streams: &SeedStreams) -> ParameterVector {
        match self {
            LossTask::DenseNet(t) => t.initial_model(streams),
            _ => ParameterVector::zeros(self.dim()).expect("task dimension is even"),
        }
    }

    /// Known minimiser, available for the quadratic task.
    pub fn optimum(&self) -> Option<ParameterVector> {
        match self {
            LossTask::Quadratic(t) => Some(t.optimum()),
            _ => None,
        }
    }
}
