use rand::Rng;
use rand_distr::StandardNormal;

use super::ParameterVector;
use crate::error::{Error, Result};
use crate::rng::{Purpose, SeedStreams};

/// Device `m` holds sample points `x_u`; the per-sample loss is
/// `f(θ, u) = ½‖θ‖² − ⟨θ, x_u⟩ + ½‖c_m‖²` with `c_m` the mean of its points,
/// so `F_m(θ) = ½‖θ − c_m‖²` exactly and `∇f(θ, u) = θ − x_u`.
///
/// `L = μ = 1`, and the minimiser of the global loss is the data-weighted
/// mean of the centres.
#[derive(Clone, Debug)]
pub struct QuadraticTask {
    dim: usize,
    points: Vec<Vec<f64>>,
    sizes: Vec<usize>,
    centers: Vec<Vec<f64>>,
}

impl QuadraticTask {
    /// Centres drawn from `N(0, center_scale²)` per coordinate; each device
    /// gets `samples_per_device` points scattered around its centre with
    /// standard deviation `spread`.
    pub fn generate(
        devices: usize,
        dim: usize,
        samples_per_device: usize,
        center_scale: f64,
        spread: f64,
        streams: &SeedStreams,
    ) -> Result<Self> {
        if devices == 0 {
            return Err(Error::invalid("devices", "must be at least 1"));
        }
        if samples_per_device == 0 {
            return Err(Error::EmptyDataset(0));
        }
        let points = (0..devices)
            .map(|m| {
                let mut rng = streams.stream(Purpose::Dataset, m as u64, 0);
                let center: Vec<f64> = (0..dim)
                    .map(|_| center_scale * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let mut pts = Vec::with_capacity(samples_per_device * dim);
                for _ in 0..samples_per_device {
                    pts.extend(
                        center
                            .iter()
                            .map(|c| c + spread * rng.sample::<f64, _>(StandardNormal)),
                    );
                }
                pts
            })
            .collect();
        Self::from_points(dim, points)
    }

    /// Zero-spread task: device `m` holds `sizes[m]` copies of `centers[m]`.
    pub fn from_centers(centers: Vec<Vec<f64>>, sizes: Vec<usize>) -> Result<Self> {
        if centers.len() != sizes.len() || centers.is_empty() {
            return Err(Error::invalid("centers", "one size per centre required"));
        }
        let dim = centers[0].len();
        let points = centers
            .iter()
            .zip(&sizes)
            .map(|(c, &n)| {
                if c.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: c.len(),
                    });
                }
                Ok(c.repeat(n))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_points(dim, points)
    }

    fn from_points(dim: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 || !dim.is_multiple_of(2) {
            return Err(Error::OddLength(dim));
        }
        let sizes: Vec<usize> = points.iter().map(|p| p.len() / dim).collect();
        if let Some(m) = sizes.iter().position(|&n| n == 0) {
            return Err(Error::EmptyDataset(m));
        }
        let centers = points
            .iter()
            .zip(&sizes)
            .map(|(p, &n)| batch_mean(p, dim, 0..n))
            .collect();
        Ok(Self {
            dim,
            points,
            sizes,
            centers,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn center(&self, m: usize) -> &[f64] {
        &self.centers[m]
    }

    pub fn device_loss(&self, m: usize, theta: &ParameterVector) -> f64 {
        0.5 * theta
            .as_slice()
            .iter()
            .zip(&self.centers[m])
            .map(|(t, c)| (t - c) * (t - c))
            .sum::<f64>()
    }

    pub fn gradient(&self, m: usize, theta: &ParameterVector, batch: &[usize]) -> Vec<f64> {
        let mean = batch_mean(&self.points[m], self.dim, batch.iter().copied());
        theta
            .as_slice()
            .iter()
            .zip(mean)
            .map(|(t, x)| t - x)
            .collect()
    }

    /// `θ* = Σ p_m c_m`.
    pub fn optimum(&self) -> ParameterVector {
        let total: usize = self.sizes.iter().sum();
        let mut opt = vec![0.0; self.dim];
        for (c, &n) in self.centers.iter().zip(&self.sizes) {
            let p = n as f64 / total as f64;
            for (o, x) in opt.iter_mut().zip(c) {
                *o += p * x;
            }
        }
        ParameterVector::new(opt).expect("centres are finite")
    }
}

fn batch_mean(points: &[f64], dim: usize, idx: impl IntoIterator<Item = usize>) -> Vec<f64> {
    let mut sum = vec![0.0; dim];
    let mut count = 0usize;
    for u in idx {
        for (s, x) in sum.iter_mut().zip(&points[u * dim..(u + 1) * dim]) {
            *s += x;
        }
        count += 1;
    }
    sum.iter().map(|s| s / count as f64).collect()
}
