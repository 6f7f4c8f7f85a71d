use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::tape::{Tape, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "tanh" => Some(Activation::Tanh),
            "relu" => Some(Activation::Relu),
            _ => None,
        }
    }

    fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(T::zero()),
        }
    }
}

/// Fully connected network with a linear output layer.
///
/// Parameters are stored as `[W0, b0, W1, b1, ...]` with `Wk` of shape
/// `in x out` and `bk` of shape `1 x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    widths: Vec<usize>,
    activation: Activation,
    params: Vec<Matrix<T>>,
}

/// Tape handles for one recorded forward pass.
#[derive(Debug, Clone)]
pub struct MlpVars {
    pub params: Vec<Var>,
    pub output: Var,
}

impl<T: Scalar> Mlp<T> {
    /// Uniform fan-in initialization, `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], activation: Activation, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(widths, activation)?;
        for (layer, &fan_in) in net.params.chunks_mut(2).zip(widths) {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for m in layer {
                for x in m.as_mut_slice() {
                    *x = T::lit(rng.random_range(-bound..=bound));
                }
            }
        }
        Ok(net)
    }

    pub fn zeros(widths: &[usize], activation: Activation) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::Config(format!(
                "network needs at least two nonzero layer widths, got {widths:?}"
            )));
        }
        let params = widths
            .windows(2)
            .flat_map(|w| [Matrix::zeros(w[0], w[1]), Matrix::zeros(1, w[1])])
            .collect();
        Ok(Self {
            widths: widths.to_vec(),
            activation,
            params,
        })
    }

    pub fn from_params(widths: &[usize], activation: Activation, params: Vec<Matrix<T>>) -> Result<Self> {
        let net = Self::zeros(widths, activation)?;
        if params.len() != net.params.len() {
            return Err(Error::DimensionMismatch {
                context: "mlp parameter count",
                expected: net.params.len(),
                got: params.len(),
            });
        }
        for (want, got) in net.params.iter().zip(&params) {
            if want.shape() != got.shape() {
                return Err(Error::DimensionMismatch {
                    context: "mlp parameter shape",
                    expected: want.len(),
                    got: got.len(),
                });
            }
        }
        Ok(Self { params, ..net })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().expect("non-empty widths")
    }

    pub fn num_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn params(&self) -> &[Matrix<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Matrix<T>] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.iter().map(Matrix::len).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(Matrix::all_finite)
    }

    /// Single-sample inference without a tape.
    pub fn forward(&self, input: &[T]) -> Result<Vec<T>> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "mlp input",
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        Ok(self.forward_batch(&Matrix::row_vector(input.to_vec()))?.into_vec())
    }

    /// Batched inference without a tape; `input` is `batch x input_dim`.
    pub fn forward_batch(&self, input: &Matrix<T>) -> Result<Matrix<T>> {
        if input.cols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "mlp batch input",
                expected: self.input_dim(),
                got: input.cols(),
            });
        }
        let last = self.num_layers() - 1;
        let mut h = input.clone();
        for layer in 0..self.num_layers() {
            let (w, b) = (&self.params[2 * layer], &self.params[2 * layer + 1]);
            let mut z = h.matmul(w)?;
            let cols = z.cols();
            for (k, x) in z.as_mut_slice().iter_mut().enumerate() {
                let v = *x + b.as_slice()[k % cols];
                *x = if layer == last { v } else { self.activation.apply(v) };
            }
            h = z;
        }
        Ok(h)
    }

    /// Records the forward pass on `tape`. When `trainable` is false the
    /// parameters enter as constants, so gradients flow only to `input`.
    pub fn record(&self, tape: &mut Tape<T>, input: Var, trainable: bool) -> Result<MlpVars> {
        let params: Vec<Var> = self
            .params
            .iter()
            .map(|p| {
                if trainable {
                    tape.param(p.clone())
                } else {
                    tape.constant(p.clone())
                }
            })
            .collect();
        let last = self.num_layers() - 1;
        let mut h = input;
        for layer in 0..self.num_layers() {
            let z = tape.matmul(h, params[2 * layer])?;
            let z = tape.add_row(z, params[2 * layer + 1])?;
            h = if layer == last {
                z
            } else {
                match self.activation {
                    Activation::Tanh => tape.tanh(z),
                    Activation::Relu => tape.relu(z),
                }
            };
        }
        Ok(MlpVars { params, output: h })
    }

    /// `self <- tau * source + (1 - tau) * self`.
    pub fn soft_update_from(&mut self, source: &Self, tau: T) -> Result<()> {
        if self.widths != source.widths {
            return Err(Error::Config("soft update between different architectures".into()));
        }
        for (dst, src) in self.params.iter_mut().zip(&source.params) {
            for (d, &s) in dst.as_mut_slice().iter_mut().zip(src.as_slice()) {
                *d = tau * s + (T::one() - tau) * *d;
            }
        }
        Ok(())
    }

    /// Squared Euclidean distance between two parameter sets.
    pub fn distance_sq(&self, other: &Self) -> T {
        self.params
            .iter()
            .zip(&other.params)
            .flat_map(|(a, b)| a.as_slice().iter().zip(b.as_slice()))
            .map(|(&x, &y)| (x - y) * (x - y))
            .sum()
    }
}
