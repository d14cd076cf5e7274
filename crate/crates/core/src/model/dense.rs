use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use super::ParameterVector;
use crate::error::{Error, Result};
use crate::rng::{Purpose, SeedStreams, NO_DEVICE};

const TOY_BLOBS: &str = include_str!("../../data/toy_blobs.csv");
const INPUTS: usize = 2;
const CLASSES: usize = 4;

/// One-hidden-layer tanh network with softmax cross-entropy, trained on the
/// bundled four-blob toy set. Training rows are shuffled and split evenly
/// across devices; the test rows are held out for accuracy.
///
/// Parameter layout: `W1 (hidden × 2)`, `b1`, `W2 (4 × hidden)`, `b2`, plus
/// one inert padding entry when the count is odd.
#[derive(Clone, Debug)]
pub struct DenseNetTask {
    hidden: usize,
    devices: Vec<ClassSet>,
    test: ClassSet,
}

#[derive(Clone, Debug, Default)]
struct ClassSet {
    x: Vec<f64>,
    labels: Vec<usize>,
}

impl ClassSet {
    fn len(&self) -> usize {
        self.labels.len()
    }

    fn push(&mut self, x: &[f64; 2], label: usize) {
        self.x.extend_from_slice(x);
        self.labels.push(label);
    }
}

type Sample = ([f64; INPUTS], usize);

fn load_toy() -> Result<(Vec<Sample>, Vec<Sample>)> {
    let mut reader = csv::Reader::from_reader(TOY_BLOBS.as_bytes());
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for record in reader.records() {
        let record = record?;
        let field = |i: usize| {
            record
                .get(i)
                .ok_or_else(|| Error::Dataset("short row".into()))
        };
        let num = |i: usize| -> Result<f64> {
            field(i)?
                .parse()
                .map_err(|_| Error::Dataset(format!("bad number in column {i}")))
        };
        let x = [num(0)?, num(1)?];
        let label: usize = field(2)?
            .parse()
            .map_err(|_| Error::Dataset("bad label".into()))?;
        if label >= CLASSES {
            return Err(Error::Dataset(format!("label {label} out of range")));
        }
        match field(3)? {
            "train" => train.push((x, label)),
            "test" => test.push((x, label)),
            other => return Err(Error::Dataset(format!("unknown split `{other}`"))),
        }
    }
    Ok((train, test))
}

struct Layout {
    hidden: usize,
}

impl Layout {
    fn w1(&self) -> usize {
        0
    }
    fn b1(&self) -> usize {
        self.hidden * INPUTS
    }
    fn w2(&self) -> usize {
        self.b1() + self.hidden
    }
    fn b2(&self) -> usize {
        self.w2() + CLASSES * self.hidden
    }
    fn raw(&self) -> usize {
        self.b2() + CLASSES
    }
    fn padded(&self) -> usize {
        self.raw() + self.raw() % 2
    }
}

impl DenseNetTask {
    pub fn new(devices: usize, hidden: usize, streams: &SeedStreams) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::invalid("hidden", "must be at least 1"));
        }
        let (mut train, test_rows) = load_toy()?;
        if devices == 0 || devices > train.len() {
            return Err(Error::invalid(
                "devices",
                format!("must be in 1..={} for the toy set", train.len()),
            ));
        }
        train.shuffle(&mut streams.stream(Purpose::Dataset, NO_DEVICE, 0));
        let mut sets = vec![ClassSet::default(); devices];
        let base = train.len() / devices;
        let extra = train.len() % devices;
        let mut rows = train.iter();
        for (m, set) in sets.iter_mut().enumerate() {
            let take = base + usize::from(m < extra);
            for (x, label) in rows.by_ref().take(take) {
                set.push(x, *label);
            }
        }
        let mut test = ClassSet::default();
        for (x, label) in &test_rows {
            test.push(x, *label);
        }
        Ok(Self {
            hidden,
            devices: sets,
            test,
        })
    }

    fn layout(&self) -> Layout {
        Layout {
            hidden: self.hidden,
        }
    }

    pub fn dim(&self) -> usize {
        self.layout().padded()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.devices.iter().map(ClassSet::len).collect()
    }

    /// Gaussian weights with variance `1 / fan_in`, zero biases.
    pub fn initial_model(&self, streams: &SeedStreams) -> ParameterVector {
        let l = self.layout();
        let mut rng = streams.stream(Purpose::Init, NO_DEVICE, 0);
        let mut theta = vec![0.0; l.padded()];
        let s1 = (1.0 / INPUTS as f64).sqrt();
        let s2 = (1.0 / self.hidden as f64).sqrt();
        for w in &mut theta[l.w1()..l.b1()] {
            *w = s1 * rng.sample::<f64, _>(StandardNormal);
        }
        for w in &mut theta[l.w2()..l.b2()] {
            *w = s2 * rng.sample::<f64, _>(StandardNormal);
        }
        ParameterVector::new(theta).expect("finite initialisation")
    }

    /// Returns hidden activations and softmax probabilities.
    fn forward(&self, theta: &[f64], x: &[f64]) -> (Vec<f64>, [f64; CLASSES]) {
        let l = self.layout();
        let h: Vec<f64> = (0..self.hidden)
            .map(|j| {
                let w = &theta[l.w1() + j * INPUTS..l.w1() + (j + 1) * INPUTS];
                (w[0] * x[0] + w[1] * x[1] + theta[l.b1() + j]).tanh()
            })
            .collect();
        let mut logits = [0.0; CLASSES];
        for (c, z) in logits.iter_mut().enumerate() {
            let w = &theta[l.w2() + c * self.hidden..l.w2() + (c + 1) * self.hidden];
            *z = w.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>() + theta[l.b2() + c];
        }
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut probs = logits.map(|z| (z - max).exp());
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        (h, probs)
    }

    pub fn device_loss(&self, m: usize, theta: &ParameterVector) -> f64 {
        let set = &self.devices[m];
        let th = theta.as_slice();
        (0..set.len())
            .map(|u| {
                let (_, probs) = self.forward(th, &set.x[u * INPUTS..(u + 1) * INPUTS]);
                -probs[set.labels[u]].max(f64::MIN_POSITIVE).ln()
            })
            .sum::<f64>()
            / set.len() as f64
    }

    pub fn gradient(&self, m: usize, theta: &ParameterVector, batch: &[usize]) -> Vec<f64> {
        let l = self.layout();
        let set = &self.devices[m];
        let th = theta.as_slice();
        let mut g = vec![0.0; l.padded()];
        for &u in batch {
            let x = &set.x[u * INPUTS..(u + 1) * INPUTS];
            let (h, probs) = self.forward(th, x);
            let mut dlogits = probs;
            dlogits[set.labels[u]] -= 1.0;
            let mut dh = vec![0.0; self.hidden];
            for (c, dz) in dlogits.iter().enumerate() {
                let row = l.w2() + c * self.hidden;
                for j in 0..self.hidden {
                    g[row + j] += dz * h[j];
                    dh[j] += dz * th[row + j];
                }
                g[l.b2() + c] += dz;
            }
            for j in 0..self.hidden {
                let dpre = dh[j] * (1.0 - h[j] * h[j]);
                g[l.w1() + j * INPUTS] += dpre * x[0];
                g[l.w1() + j * INPUTS + 1] += dpre * x[1];
                g[l.b1() + j] += dpre;
            }
        }
        let inv = 1.0 / batch.len() as f64;
        g.iter_mut().for_each(|v| *v *= inv);
        g
    }

    pub fn test_accuracy(&self, theta: &ParameterVector) -> f64 {
        let th = theta.as_slice();
        let correct = (0..self.test.len())
            .filter(|&u| {
                let (_, probs) = self.forward(th, &self.test.x[u * INPUTS..(u + 1) * INPUTS]);
                let predicted = (0..CLASSES)
                    .max_by(|&a, &b| probs[a].total_cmp(&probs[b]))
                    .unwrap_or(0);
                predicted == self.test.labels[u]
            })
            .count();
        correct as f64 / self.test.len().max(1) as f64
    }
}
