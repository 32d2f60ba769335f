use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::layers::{Conv1d, Dense, Flatten, MaxPool1d, Relu};
use super::tensor::Tensor1D;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Layer {
    Conv1d(Conv1d),
    Relu(Relu),
    MaxPool(MaxPool1d),
    Flatten(Flatten),
    Dense(Dense),
}

impl Layer {
    pub fn output_shape(&self, input: (usize, usize)) -> Result<(usize, usize)> {
        match self {
            Layer::Conv1d(l) => l.output_shape(input),
            Layer::Relu(_) => Ok(input),
            Layer::MaxPool(l) => l.output_shape(input),
            Layer::Flatten(_) => Ok((1, input.0 * input.1)),
            Layer::Dense(l) => l.output_shape(input),
        }
    }

    fn params(&self) -> Option<(&[f64], &[f64])> {
        match self {
            Layer::Conv1d(l) => Some((&l.weights, &l.biases)),
            Layer::Dense(l) => Some((&l.weights, &l.biases)),
            _ => None,
        }
    }

    fn params_mut(&mut self) -> Option<(&mut [f64], &mut [f64])> {
        match self {
            Layer::Conv1d(l) => Some((&mut l.weights, &mut l.biases)),
            Layer::Dense(l) => Some((&mut l.weights, &mut l.biases)),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Layer::Conv1d(l) => l.validate(),
            Layer::Dense(l) => l.validate(),
            Layer::MaxPool(l) => l.validate(),
            _ => Ok(()),
        }
    }
}

/// Parameter gradients in model order: for each parametrised layer its
/// weights then its biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn scale(&mut self, factor: f64) {
        self.tensors.iter_mut().flatten().for_each(|g| *g *= factor);
    }

    pub fn is_zero(&self) -> bool {
        self.tensors.iter().flatten().all(|&g| g == 0.0)
    }

    pub fn flat(&self) -> Vec<f64> {
        self.tensors.concat()
    }
}

/// Feed-forward stack over a `channels x length` input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub input_channels: usize,
    pub input_length: usize,
    pub layers: Vec<Layer>,
    /// Seed used for weight initialisation.
    pub seed: u64,
}

impl Model {
    pub fn new(input_channels: usize, input_length: usize, layers: Vec<Layer>, seed: u64) -> Result<Self> {
        let model = Model {
            input_channels,
            input_length,
            layers,
            seed,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        for l in &self.layers {
            l.validate()?;
        }
        self.output_shape().map(|_| ())
    }

    pub fn output_shape(&self) -> Result<(usize, usize)> {
        self.layers
            .iter()
            .try_fold((self.input_channels, self.input_length), |s, l| l.output_shape(s))
    }

    pub fn input_size(&self) -> usize {
        self.input_channels * self.input_length
    }

    pub fn output_size(&self) -> usize {
        self.output_shape().map_or(0, |(c, l)| c * l)
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .filter_map(Layer::params)
            .map(|(w, b)| w.len() + b.len())
            .sum()
    }

    pub fn params(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .filter_map(Layer::params)
            .flat_map(|(w, b)| [w, b])
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .filter_map(Layer::params_mut)
            .flat_map(|(w, b)| [w, b])
            .collect()
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            tensors: self.params().iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }

    fn input(&self, features: &[f64]) -> Result<Tensor1D> {
        if features.len() != self.input_size() {
            return Err(Error::shape(format!(
                "model expects {} features, got {}",
                self.input_size(),
                features.len()
            )));
        }
        Tensor1D::new(self.input_channels, self.input_length, features.to_vec())
    }

    /// Prediction without touching the backward caches.
    pub fn predict(&self, features: &[f64]) -> Result<Vec<f64>> {
        let mut x = self.input(features)?;
        for l in &self.layers {
            x = match l {
                Layer::Conv1d(l) => l.infer(&x)?,
                Layer::Relu(l) => l.infer(&x),
                Layer::MaxPool(l) => l.infer(&x)?,
                Layer::Flatten(l) => l.infer(&x),
                Layer::Dense(l) => l.infer(&x)?,
            };
        }
        Ok(x.values)
    }

    /// Outputs together with which side of every ReLU each unit falls on and
    /// which position wins every pooling window. Two inputs with equal
    /// signatures lie in the same linear region of the network.
    pub fn predict_with_signature(&self, features: &[f64]) -> Result<(Vec<f64>, Vec<usize>)> {
        let mut x = self.input(features)?;
        let mut sig = Vec::new();
        for l in &self.layers {
            x = match l {
                Layer::Conv1d(l) => l.infer(&x)?,
                Layer::Relu(l) => {
                    sig.extend(x.values.iter().map(|&v| usize::from(v > 0.0)));
                    l.infer(&x)
                }
                Layer::MaxPool(l) => {
                    let (y, arg) = l.pool(&x)?;
                    sig.extend(arg);
                    y
                }
                Layer::Flatten(l) => l.infer(&x),
                Layer::Dense(l) => l.infer(&x)?,
            };
        }
        Ok((x.values, sig))
    }

    /// Forward pass that records what [`Model::backward`] needs.
    pub fn forward(&mut self, features: &[f64]) -> Result<Vec<f64>> {
        let mut x = self.input(features)?;
        for l in &mut self.layers {
            x = match l {
                Layer::Conv1d(l) => l.forward(&x)?,
                Layer::Relu(l) => l.forward(&x),
                Layer::MaxPool(l) => l.forward(&x)?,
                Layer::Flatten(l) => l.forward(&x),
                Layer::Dense(l) => l.forward(&x)?,
            };
        }
        Ok(x.values)
    }

    pub fn backward(&self, loss_grad: &[f64]) -> Result<Gradients> {
        let mut g = self.zero_gradients();
        self.backward_accumulate(loss_grad, &mut g)?;
        Ok(g)
    }

    /// Adds the parameter gradients of the most recent forward pass, given
    /// `dL/d output`, into `grads` and returns `dL/d input`.
    pub fn backward_accumulate(&self, loss_grad: &[f64], grads: &mut Gradients) -> Result<Vec<f64>> {
        let (oc, ol) = self.output_shape()?;
        if loss_grad.len() != oc * ol {
            return Err(Error::shape(format!("loss gradient has {} entries for {} outputs", loss_grad.len(), oc * ol)));
        }
        if grads.tensors.len() != self.params().len() {
            return Err(Error::shape("gradient set does not match the model"));
        }
        let mut d = Tensor1D::from_parts(oc, ol, loss_grad.to_vec());
        let mut slot = grads.tensors.len();
        for l in self.layers.iter().rev() {
            d = match l {
                Layer::Conv1d(_) | Layer::Dense(_) => {
                    slot -= 2;
                    let (gw, rest) = grads.tensors[slot..].split_at_mut(1);
                    let (gw, gb) = (&mut gw[0], &mut rest[0]);
                    match l {
                        Layer::Conv1d(l) => l.backward(&d, gw, gb)?,
                        Layer::Dense(l) => l.backward(&d, gw, gb)?,
                        _ => unreachable!(),
                    }
                }
                Layer::Relu(l) => l.backward(&d)?,
                Layer::MaxPool(l) => l.backward(&d)?,
                Layer::Flatten(l) => l.backward(&d)?,
            };
        }
        Ok(d.values)
    }

    /// `theta <- theta - lr * grad` for every parameter.
    pub fn sgd_step(&mut self, grads: &Gradients, lr: f64) -> Result<()> {
        if !(lr >= 0.0 && lr.is_finite()) {
            return Err(Error::domain(format!("learning rate must be finite and non-negative, got {lr}")));
        }
        let mut params = self.params_mut();
        if params.len() != grads.tensors.len() || params.iter().zip(&grads.tensors).any(|(p, g)| p.len() != g.len()) {
            return Err(Error::shape("gradient set does not match the model"));
        }
        for (p, g) in params.iter_mut().zip(&grads.tensors) {
            for (w, d) in p.iter_mut().zip(g) {
                *w -= lr * d;
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|p| p.iter().all(|v| v.is_finite()))
    }
}

/// Max-pool window and stride.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSize {
    pub window: usize,
    pub stride: usize,
}

/// Convolutional network over the feature vector viewed as one channel:
/// conv, ReLU, optional max-pool, conv, ReLU, flatten, dense, ReLU, dense.
///
/// The default leaves pooling out: on the 11-wide dispatch input a 2/2 pool
/// discards which feature won each window and roughly doubled test error in
/// experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnnArchitecture {
    pub conv1_filters: usize,
    pub conv2_filters: usize,
    pub kernel_size: usize,
    pub pool: Option<PoolSize>,
    pub hidden: usize,
}

impl Default for CnnArchitecture {
    fn default() -> Self {
        CnnArchitecture {
            conv1_filters: 16,
            conv2_filters: 32,
            kernel_size: 3,
            pool: None,
            hidden: 64,
        }
    }
}

impl CnnArchitecture {
    /// The default layout with a `window`/`stride` max-pool after the first
    /// convolution.
    pub fn pooled(window: usize, stride: usize) -> Self {
        CnnArchitecture {
            pool: Some(PoolSize { window, stride }),
            ..Self::default()
        }
    }

    pub fn build(&self, inputs: usize, outputs: usize, seed: u64) -> Result<Model> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = self.kernel_size;
        let mut layers = vec![
            Layer::Conv1d(Conv1d::init(&mut rng, 1, self.conv1_filters, k)),
            Layer::Relu(Relu::default()),
        ];
        if let Some(p) = self.pool {
            layers.push(Layer::MaxPool(MaxPool1d::new(p.window, p.stride)?));
        }
        layers.push(Layer::Conv1d(Conv1d::init(&mut rng, self.conv1_filters, self.conv2_filters, k)));
        layers.push(Layer::Relu(Relu::default()));
        layers.push(Layer::Flatten(Flatten::default()));
        let flat = layers
            .iter()
            .try_fold((1, inputs), |s, l| l.output_shape(s))
            .map(|(c, l)| c * l)?;
        layers.push(Layer::Dense(Dense::init(&mut rng, flat, self.hidden)));
        layers.push(Layer::Relu(Relu::default()));
        layers.push(Layer::Dense(Dense::init(&mut rng, self.hidden, outputs)));
        Model::new(1, inputs, layers, seed)
    }
}

/// Fully connected network with ReLU between hidden layers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DnnArchitecture {
    pub hidden: Vec<usize>,
}

impl Default for DnnArchitecture {
    fn default() -> Self {
        DnnArchitecture { hidden: vec![8; 4] }
    }
}

impl DnnArchitecture {
    pub fn build(&self, inputs: usize, outputs: usize, seed: u64) -> Result<Model> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::new();
        let mut width = inputs;
        for &h in &self.hidden {
            layers.push(Layer::Dense(Dense::init(&mut rng, width, h)));
            layers.push(Layer::Relu(Relu::default()));
            width = h;
        }
        layers.push(Layer::Dense(Dense::init(&mut rng, width, outputs)));
        Model::new(1, inputs, layers, seed)
    }
}
