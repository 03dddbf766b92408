//! Layer catalogue. Each layer is pure on `forward` and accumulates into its
//! parameters' `grad` buffers on `backward`, given the same input it saw forward.

mod attention;
mod conv;
mod dense;
mod embedding;
mod encoder;
mod norm;

pub use attention::{
    multi_head_attention, scaled_dot_attention, scaled_dot_attention_backward, softmax_rows,
    MultiHeadAttention,
};
pub use conv::{conv1d_backward, conv1d_forward, conv1d_preactivation, maxpool1d_forward, Conv1d, Flatten, MaxPool1d};
pub use dense::{dense_forward, Dense};
pub use embedding::{ClsPool, Embedding};
pub use encoder::EncoderBlock;
pub use norm::LayerNorm;

use crate::error::Result;
use crate::tensor::Tensor;

/// A named trainable tensor together with its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape());
        Self {
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    None,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => relu(z),
            Activation::Sigmoid => sigmoid(z),
            Activation::None => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and the output `y`.
    pub fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::None => 1.0,
        }
    }
}

/// ReLU that propagates NaN instead of masking it.
pub fn relu(z: f64) -> f64 {
    if z < 0.0 {
        0.0
    } else {
        z
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Coarse layer type, used to introspect architectures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerKind {
    Dense,
    Conv1d,
    MaxPool1d,
    Flatten,
    Embedding,
    Encoder,
    ClsPool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense(Dense),
    Conv1d(Conv1d),
    MaxPool1d(MaxPool1d),
    Flatten(Flatten),
    Embedding(Embedding),
    Encoder(EncoderBlock),
    ClsPool(ClsPool),
}

impl Layer {
    pub fn kind(&self) -> LayerKind {
        match self {
            Layer::Dense(_) => LayerKind::Dense,
            Layer::Conv1d(_) => LayerKind::Conv1d,
            Layer::MaxPool1d(_) => LayerKind::MaxPool1d,
            Layer::Flatten(_) => LayerKind::Flatten,
            Layer::Embedding(_) => LayerKind::Embedding,
            Layer::Encoder(_) => LayerKind::Encoder,
            Layer::ClsPool(_) => LayerKind::ClsPool,
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        match self {
            Layer::Dense(l) => l.forward(x),
            Layer::Conv1d(l) => l.forward(x),
            Layer::MaxPool1d(l) => l.forward(x),
            Layer::Flatten(l) => l.forward(x),
            Layer::Embedding(l) => l.forward(x),
            Layer::Encoder(l) => l.forward(x),
            Layer::ClsPool(l) => l.forward(x),
        }
    }

    /// Backpropagates `grad_out` through the layer for input `x`, accumulating
    /// parameter gradients and returning the gradient with respect to `x`.
    pub fn backward(&mut self, x: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
        match self {
            Layer::Dense(l) => l.backward(x, grad_out),
            Layer::Conv1d(l) => l.backward(x, grad_out),
            Layer::MaxPool1d(l) => l.backward(x, grad_out),
            Layer::Flatten(l) => l.backward(x, grad_out),
            Layer::Embedding(l) => l.backward(x, grad_out),
            Layer::Encoder(l) => l.backward(x, grad_out),
            Layer::ClsPool(l) => l.backward(x, grad_out),
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        match self {
            Layer::Dense(l) => vec![&l.weight, &l.bias],
            Layer::Conv1d(l) => vec![&l.kernels, &l.bias],
            Layer::Embedding(l) => vec![&l.tokens, &l.positions],
            Layer::Encoder(l) => l.params(),
            Layer::MaxPool1d(_) | Layer::Flatten(_) | Layer::ClsPool(_) => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        match self {
            Layer::Dense(l) => vec![&mut l.weight, &mut l.bias],
            Layer::Conv1d(l) => vec![&mut l.kernels, &mut l.bias],
            Layer::Embedding(l) => vec![&mut l.tokens, &mut l.positions],
            Layer::Encoder(l) => l.params_mut(),
            Layer::MaxPool1d(_) | Layer::Flatten(_) | Layer::ClsPool(_) => Vec::new(),
        }
    }
}
