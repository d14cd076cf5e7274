use rand::Rng;
use rand_distr::StandardNormal;

use super::ParameterVector;
use crate::error::{Error, Result};
use crate::rng::{Purpose, SeedStreams, NO_DEVICE};

/// L2-regularised binary logistic regression on synthetic Gaussian classes.
/// The last parameter is the bias.
#[derive(Clone, Debug)]
pub struct LogisticTask {
    features: usize,
    l2: f64,
    devices: Vec<LabeledSet>,
    test: LabeledSet,
}

#[derive(Clone, Debug, Default)]
struct LabeledSet {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl LabeledSet {
    fn draw<R: Rng>(rng: &mut R, n: usize, features: usize) -> Self {
        let shift = 1.5 / (features as f64).sqrt();
        let mut set = LabeledSet::default();
        for _ in 0..n {
            let label = if rng.random::<bool>() { 1.0 } else { -1.0 };
            set.y.push(label);
            set.x.extend(
                (0..features).map(|_| label * shift + rng.sample::<f64, _>(StandardNormal)),
            );
        }
        set
    }

    fn len(&self) -> usize {
        self.y.len()
    }
}

fn softplus(s: f64) -> f64 {
    s.max(0.0) + (-s.abs()).exp().ln_1p()
}

fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

impl LogisticTask {
    pub fn generate(
        devices: usize,
        dim: usize,
        samples_per_device: usize,
        test_samples: usize,
        l2: f64,
        streams: &SeedStreams,
    ) -> Result<Self> {
        if dim < 2 || !dim.is_multiple_of(2) {
            return Err(Error::OddLength(dim));
        }
        if samples_per_device == 0 {
            return Err(Error::EmptyDataset(0));
        }
        if !(l2 >= 0.0) {
            return Err(Error::invalid("l2", "must be non-negative"));
        }
        let features = dim - 1;
        let sets = (0..devices)
            .map(|m| {
                let mut rng = streams.stream(Purpose::Dataset, m as u64, 0);
                LabeledSet::draw(&mut rng, samples_per_device, features)
            })
            .collect();
        let mut rng = streams.stream(Purpose::Dataset, NO_DEVICE, 1);
        let test = LabeledSet::draw(&mut rng, test_samples, features);
        Ok(Self {
            features,
            l2,
            devices: sets,
            test,
        })
    }

    pub fn dim(&self) -> usize {
        self.features + 1
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.devices.iter().map(LabeledSet::len).collect()
    }

    fn margin(&self, set: &LabeledSet, u: usize, theta: &[f64]) -> f64 {
        let x = &set.x[u * self.features..(u + 1) * self.features];
        let z: f64 = x.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>() + theta[self.features];
        set.y[u] * z
    }

    fn regulariser(&self, theta: &[f64]) -> f64 {
        0.5 * self.l2 * theta.iter().map(|t| t * t).sum::<f64>()
    }

    pub fn device_loss(&self, m: usize, theta: &ParameterVector) -> f64 {
        let set = &self.devices[m];
        let th = theta.as_slice();
        let data: f64 = (0..set.len())
            .map(|u| softplus(-self.margin(set, u, th)))
            .sum::<f64>()
            / set.len() as f64;
        data + self.regulariser(th)
    }

    pub fn gradient(&self, m: usize, theta: &ParameterVector, batch: &[usize]) -> Vec<f64> {
        let set = &self.devices[m];
        let th = theta.as_slice();
        let mut g = vec![0.0; self.dim()];
        for &u in batch {
            let coef = -set.y[u] * sigmoid(-self.margin(set, u, th));
            let x = &set.x[u * self.features..(u + 1) * self.features];
            for (gi, xi) in g.iter_mut().zip(x) {
                *gi += coef * xi;
            }
            g[self.features] += coef;
        }
        let inv = 1.0 / batch.len() as f64;
        g.iter_mut()
            .zip(th)
            .for_each(|(gi, t)| *gi = *gi * inv + self.l2 * t);
        g
    }

    pub fn test_accuracy(&self, theta: &ParameterVector) -> f64 {
        let th = theta.as_slice();
        let correct = (0..self.test.len())
            .filter(|&u| self.margin(&self.test, u, th) > 0.0)
            .count();
        correct as f64 / self.test.len().max(1) as f64
    }
}
