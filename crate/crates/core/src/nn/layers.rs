use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::tensor::Tensor1D;

fn missing_cache(layer: &str) -> Error {
    Error::State(format!("{layer} backward called without a cached forward pass"))
}

/// Uniform in ±sqrt(6 / (fan_in + fan_out)).
fn glorot<R: Rng>(rng: &mut R, n: usize, fan_in: usize, fan_out: usize) -> Vec<f64> {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n).map(|_| rng.random_range(-a..=a)).collect()
}

/// Valid-padding, stride-1 cross-correlation:
/// `out[k][t] = b[k] + sum_i sum_j w[k][i][j] * x[i][t + j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv1d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    /// `[out][in][kernel]`, flattened.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    #[serde(skip)]
    cache: Option<Tensor1D>,
}

impl Conv1d {
    pub fn new(in_channels: usize, out_channels: usize, kernel_size: usize, weights: Vec<f64>, biases: Vec<f64>) -> Result<Self> {
        let layer = Conv1d {
            in_channels,
            out_channels,
            kernel_size,
            weights,
            biases,
            cache: None,
        };
        layer.validate()?;
        Ok(layer)
    }

    pub fn init<R: Rng>(rng: &mut R, in_channels: usize, out_channels: usize, kernel_size: usize) -> Self {
        let n = out_channels * in_channels * kernel_size;
        Conv1d {
            in_channels,
            out_channels,
            kernel_size,
            weights: glorot(rng, n, in_channels * kernel_size, out_channels * kernel_size),
            biases: vec![0.0; out_channels],
            cache: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.out_channels == 0 || self.kernel_size == 0 {
            return Err(Error::shape("conv dimensions must be positive"));
        }
        if self.weights.len() != self.out_channels * self.in_channels * self.kernel_size
            || self.biases.len() != self.out_channels
        {
            return Err(Error::shape("conv parameter arrays do not match its dimensions"));
        }
        Ok(())
    }

    pub fn output_shape(&self, (channels, length): (usize, usize)) -> Result<(usize, usize)> {
        if channels != self.in_channels {
            return Err(Error::shape(format!("conv expects {} channels, got {channels}", self.in_channels)));
        }
        if length < self.kernel_size {
            return Err(Error::shape(format!("conv input length {length} below kernel {}", self.kernel_size)));
        }
        Ok((self.out_channels, length - self.kernel_size + 1))
    }

    pub fn infer(&self, x: &Tensor1D) -> Result<Tensor1D> {
        let (oc, ol) = self.output_shape(x.shape())?;
        let (ic, k, il) = (self.in_channels, self.kernel_size, x.length);
        let mut out = vec![0.0; oc * ol];
        for o in 0..oc {
            let row = &mut out[o * ol..(o + 1) * ol];
            row.fill(self.biases[o]);
            for i in 0..ic {
                let w = &self.weights[(o * ic + i) * k..(o * ic + i + 1) * k];
                let xi = &x.values[i * il..(i + 1) * il];
                for (t, r) in row.iter_mut().enumerate() {
                    *r += w.iter().zip(&xi[t..t + k]).map(|(a, b)| a * b).sum::<f64>();
                }
            }
        }
        Ok(Tensor1D::from_parts(oc, ol, out))
    }

    pub fn forward(&mut self, x: &Tensor1D) -> Result<Tensor1D> {
        let y = self.infer(x)?;
        self.cache = Some(x.clone());
        Ok(y)
    }

    /// Adds `dL/dw` and `dL/db` into `gw`, `gb`; returns `dL/dx`.
    pub fn backward(&self, dy: &Tensor1D, gw: &mut [f64], gb: &mut [f64]) -> Result<Tensor1D> {
        let x = self.cache.as_ref().ok_or_else(|| missing_cache("conv"))?;
        let (oc, ol) = self.output_shape(x.shape())?;
        if dy.shape() != (oc, ol) {
            return Err(Error::shape("conv upstream gradient shape mismatch"));
        }
        let (ic, k, il) = (self.in_channels, self.kernel_size, x.length);
        let mut dx = vec![0.0; ic * il];
        for o in 0..oc {
            let d = dy.channel(o);
            gb[o] += d.iter().sum::<f64>();
            for i in 0..ic {
                let base = (o * ic + i) * k;
                let xi = &x.values[i * il..(i + 1) * il];
                let dxi = &mut dx[i * il..(i + 1) * il];
                for j in 0..k {
                    let w = self.weights[base + j];
                    let mut g = 0.0;
                    for t in 0..ol {
                        g += d[t] * xi[t + j];
                        dxi[t + j] += w * d[t];
                    }
                    gw[base + j] += g;
                }
            }
        }
        Ok(Tensor1D::from_parts(ic, il, dx))
    }
}

/// `y = W x + b` over the flattened input; output is a single-channel row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// `[out][in]`, flattened.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    #[serde(skip)]
    cache: Option<Tensor1D>,
}

impl Dense {
    pub fn new(inputs: usize, outputs: usize, weights: Vec<f64>, biases: Vec<f64>) -> Result<Self> {
        let layer = Dense {
            inputs,
            outputs,
            weights,
            biases,
            cache: None,
        };
        layer.validate()?;
        Ok(layer)
    }

    pub fn init<R: Rng>(rng: &mut R, inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weights: glorot(rng, inputs * outputs, inputs, outputs),
            biases: vec![0.0; outputs],
            cache: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs == 0 || self.outputs == 0 {
            return Err(Error::shape("dense dimensions must be positive"));
        }
        if self.weights.len() != self.inputs * self.outputs || self.biases.len() != self.outputs {
            return Err(Error::shape("dense parameter arrays do not match its dimensions"));
        }
        Ok(())
    }

    pub fn output_shape(&self, (channels, length): (usize, usize)) -> Result<(usize, usize)> {
        if channels * length != self.inputs {
            return Err(Error::shape(format!("dense expects {} inputs, got {}", self.inputs, channels * length)));
        }
        Ok((1, self.outputs))
    }

    pub fn infer(&self, x: &Tensor1D) -> Result<Tensor1D> {
        self.output_shape(x.shape())?;
        let out = self
            .weights
            .chunks_exact(self.inputs)
            .zip(&self.biases)
            .map(|(w, b)| b + w.iter().zip(&x.values).map(|(a, v)| a * v).sum::<f64>())
            .collect();
        Ok(Tensor1D::from_parts(1, self.outputs, out))
    }

    pub fn forward(&mut self, x: &Tensor1D) -> Result<Tensor1D> {
        let y = self.infer(x)?;
        self.cache = Some(x.clone());
        Ok(y)
    }

    pub fn backward(&self, dy: &Tensor1D, gw: &mut [f64], gb: &mut [f64]) -> Result<Tensor1D> {
        let x = self.cache.as_ref().ok_or_else(|| missing_cache("dense"))?;
        if dy.len() != self.outputs {
            return Err(Error::shape("dense upstream gradient shape mismatch"));
        }
        let mut dx = vec![0.0; self.inputs];
        for (o, &d) in dy.values.iter().enumerate() {
            gb[o] += d;
            let w = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let g = &mut gw[o * self.inputs..(o + 1) * self.inputs];
            for n in 0..self.inputs {
                g[n] += d * x.values[n];
                dx[n] += d * w[n];
            }
        }
        Ok(Tensor1D::from_parts(x.channels, x.length, dx))
    }
}

/// Elementwise `max(0, x)`; the derivative at 0 is taken as 0.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Relu {
    #[serde(skip)]
    cache: Option<Vec<bool>>,
}

impl Relu {
    pub fn infer(&self, x: &Tensor1D) -> Tensor1D {
        Tensor1D::from_parts(x.channels, x.length, x.values.iter().map(|&v| v.max(0.0)).collect())
    }

    pub fn forward(&mut self, x: &Tensor1D) -> Tensor1D {
        self.cache = Some(x.values.iter().map(|&v| v > 0.0).collect());
        self.infer(x)
    }

    pub fn backward(&self, dy: &Tensor1D) -> Result<Tensor1D> {
        let mask = self.cache.as_ref().ok_or_else(|| missing_cache("relu"))?;
        if mask.len() != dy.len() {
            return Err(Error::shape("relu upstream gradient shape mismatch"));
        }
        let dx = dy.values.iter().zip(mask).map(|(&d, &on)| if on { d } else { 0.0 }).collect();
        Ok(Tensor1D::from_parts(dy.channels, dy.length, dx))
    }
}

/// Per-channel window maximum; trailing partial windows are dropped and ties
/// resolve to the first maximal position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxPool1d {
    pub window: usize,
    pub stride: usize,
    #[serde(skip)]
    cache: Option<((usize, usize), Vec<usize>)>,
}

impl MaxPool1d {
    pub fn new(window: usize, stride: usize) -> Result<Self> {
        let layer = MaxPool1d {
            window,
            stride,
            cache: None,
        };
        layer.validate()?;
        Ok(layer)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.stride == 0 {
            return Err(Error::shape("pool window and stride must be at least 1"));
        }
        Ok(())
    }

    pub fn output_shape(&self, (channels, length): (usize, usize)) -> Result<(usize, usize)> {
        if length < self.window {
            return Err(Error::shape(format!("pool input length {length} below window {}", self.window)));
        }
        Ok((channels, (length - self.window) / self.stride + 1))
    }

    pub(crate) fn pool(&self, x: &Tensor1D) -> Result<(Tensor1D, Vec<usize>)> {
        let (c, ol) = self.output_shape(x.shape())?;
        let mut out = Vec::with_capacity(c * ol);
        let mut arg = Vec::with_capacity(c * ol);
        for ch in 0..c {
            let xs = x.channel(ch);
            for t in 0..ol {
                let start = t * self.stride;
                let mut best = start;
                for p in start + 1..start + self.window {
                    if xs[p] > xs[best] {
                        best = p;
                    }
                }
                out.push(xs[best]);
                arg.push(ch * x.length + best);
            }
        }
        Ok((Tensor1D::from_parts(c, ol, out), arg))
    }

    pub fn infer(&self, x: &Tensor1D) -> Result<Tensor1D> {
        Ok(self.pool(x)?.0)
    }

    pub fn forward(&mut self, x: &Tensor1D) -> Result<Tensor1D> {
        let (y, arg) = self.pool(x)?;
        self.cache = Some((x.shape(), arg));
        Ok(y)
    }

    /// Flat input positions selected by the last cached forward pass.
    pub fn argmax(&self) -> &[usize] {
        self.cache.as_ref().map_or(&[], |(_, a)| a.as_slice())
    }

    /// Routes each upstream delta to the position that won the forward max.
    pub fn backward(&self, dy: &Tensor1D) -> Result<Tensor1D> {
        let ((c, l), arg) = self.cache.as_ref().ok_or_else(|| missing_cache("maxpool"))?;
        if arg.len() != dy.len() {
            return Err(Error::shape("pool upstream gradient shape mismatch"));
        }
        let mut dx = vec![0.0; c * l];
        for (&src, &d) in arg.iter().zip(&dy.values) {
            dx[src] += d;
        }
        Ok(Tensor1D::from_parts(*c, *l, dx))
    }
}

/// Reshapes `channels x length` into a single row.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Flatten {
    #[serde(skip)]
    cache: Option<(usize, usize)>,
}

impl Flatten {
    pub fn infer(&self, x: &Tensor1D) -> Tensor1D {
        Tensor1D::from_parts(1, x.len(), x.values.clone())
    }

    pub fn forward(&mut self, x: &Tensor1D) -> Tensor1D {
        self.cache = Some(x.shape());
        self.infer(x)
    }

    pub fn backward(&self, dy: &Tensor1D) -> Result<Tensor1D> {
        let (c, l) = self.cache.ok_or_else(|| missing_cache("flatten"))?;
        if c * l != dy.len() {
            return Err(Error::shape("flatten upstream gradient shape mismatch"));
        }
        Ok(Tensor1D::from_parts(c, l, dy.values.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(values: &[f64]) -> Tensor1D {
        Tensor1D::row(values).unwrap()
    }

    #[test]
    fn conv_examples() {
        let c = Conv1d::new(1, 1, 3, vec![1.0, 0.0, -1.0], vec![0.0]).unwrap();
        assert_eq!(c.infer(&t(&[1.0, 2.0, 3.0, 4.0])).unwrap().values, vec![-2.0, -2.0]);
        let id = Conv1d::new(1, 1, 1, vec![1.0], vec![0.0]).unwrap();
        assert_eq!(id.infer(&t(&[3.0, -1.0, 2.5])).unwrap().values, vec![3.0, -1.0, 2.5]);
        let z = Conv1d::new(1, 2, 2, vec![0.0; 4], vec![1.5, -2.0]).unwrap();
        assert_eq!(z.infer(&t(&[9.0, 8.0, 7.0])).unwrap().values, vec![1.5, 1.5, -2.0, -2.0]);
    }

    #[test]
    fn conv_shape_errors() {
        let c = Conv1d::new(2, 1, 3, vec![0.0; 6], vec![0.0]).unwrap();
        assert!(matches!(c.infer(&t(&[1.0, 2.0, 3.0])), Err(Error::Shape(_))));
        let x = Tensor1D::new(2, 2, vec![0.0; 4]).unwrap();
        assert!(matches!(c.infer(&x), Err(Error::Shape(_))));
        assert!(Conv1d::new(1, 1, 3, vec![0.0; 2], vec![0.0]).is_err());
    }

    #[test]
    fn relu_examples() {
        let r = Relu::default();
        assert_eq!(r.infer(&t(&[-1.0, 0.0, 2.0])).values, vec![0.0, 0.0, 2.0]);
        let x = t(&[0.3, 1.0]);
        assert_eq!(r.infer(&x), x);
        let y = t(&[-3.0, 0.5, -0.1, 7.0]);
        assert_eq!(r.infer(&r.infer(&y)), r.infer(&y));
    }

    #[test]
    fn relu_negative_blocks_gradient() {
        let mut r = Relu::default();
        r.forward(&t(&[-1.0, -2.0, -0.5]));
        assert_eq!(r.backward(&t(&[1.0, 2.0, 3.0])).unwrap().values, vec![0.0; 3]);
    }

    #[test]
    fn pool_examples() {
        let p = MaxPool1d::new(2, 2).unwrap();
        assert_eq!(p.infer(&t(&[1.0, 3.0, 2.0, 5.0])).unwrap().values, vec![3.0, 5.0]);
        assert_eq!(p.infer(&t(&[2.0; 6])).unwrap().values, vec![2.0; 3]);
        // trailing partial window dropped
        assert_eq!(p.infer(&t(&[1.0, 3.0, 9.0])).unwrap().values, vec![3.0]);
        assert!(matches!(p.infer(&t(&[1.0])), Err(Error::Shape(_))));
        assert!(MaxPool1d::new(0, 1).is_err());
    }

    #[test]
    fn pool_tie_routes_to_first() {
        let mut p = MaxPool1d::new(2, 1).unwrap();
        assert_eq!(p.forward(&t(&[4.0, 4.0, 1.0])).unwrap().values, vec![4.0, 4.0]);
        // window 0 picks index 0, window 1 picks index 1
        assert_eq!(p.backward(&t(&[1.0, 10.0])).unwrap().values, vec![1.0, 10.0, 0.0]);
        let mut p = MaxPool1d::new(2, 2).unwrap();
        p.forward(&t(&[4.0, 4.0])).unwrap();
        assert_eq!(p.backward(&t(&[1.0])).unwrap().values, vec![1.0, 0.0]);
    }

    #[test]
    fn dense_examples() {
        let d = Dense::new(2, 1, vec![1.0, 2.0], vec![0.5]).unwrap();
        assert_eq!(d.infer(&t(&[3.0, 4.0])).unwrap().values, vec![11.5]);
        let id = Dense::new(2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![0.0; 2]).unwrap();
        assert_eq!(id.infer(&t(&[3.0, 4.0])).unwrap().values, vec![3.0, 4.0]);
        let z = Dense::new(2, 2, vec![0.0; 4], vec![1.0, -1.0]).unwrap();
        assert_eq!(z.infer(&t(&[3.0, 4.0])).unwrap().values, vec![1.0, -1.0]);
        assert!(matches!(d.infer(&t(&[1.0])), Err(Error::Shape(_))));
    }

    #[test]
    fn backward_without_forward_is_state_error() {
        let d = Dense::new(1, 1, vec![1.0], vec![0.0]).unwrap();
        let mut gw = [0.0];
        let mut gb = [0.0];
        assert!(matches!(d.backward(&t(&[1.0]), &mut gw, &mut gb), Err(Error::State(_))));
        assert!(matches!(Relu::default().backward(&t(&[1.0])), Err(Error::State(_))));
        assert!(matches!(MaxPool1d::new(1, 1).unwrap().backward(&t(&[1.0])), Err(Error::State(_))));
    }
}
