use crate::error::{NnError, Result};
use crate::layers::{Layer, LayerKind, Param};
use crate::tensor::Tensor;

/// A feed-forward stack of layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Self {
        Self { layers }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn layer_kinds(&self) -> Vec<LayerKind> {
        self.layers.iter().map(Layer::kind).collect()
    }

    pub fn count(&self, kind: LayerKind) -> usize {
        self.layers.iter().filter(|l| l.kind() == kind).count()
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut cur = x.clone();
        for layer in &self.layers {
            cur = layer.forward(&cur)?;
        }
        Ok(cur)
    }

    /// Forward pass keeping every intermediate: `trace[i]` is the input of
    /// layer `i`, the last element is the network output.
    pub fn forward_trace(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        let mut trace = Vec::with_capacity(self.layers.len() + 1);
        trace.push(x.clone());
        for layer in &self.layers {
            let next = layer.forward(trace.last().expect("trace is never empty"))?;
            trace.push(next);
        }
        Ok(trace)
    }

    /// Backpropagates from the output gradient, accumulating parameter gradients.
    pub fn backward(&mut self, trace: &[Tensor], grad_out: Tensor) -> Result<Tensor> {
        let mut grad = grad_out;
        for (layer, input) in self.layers.iter_mut().zip(trace).rev() {
            grad = layer.backward(input, &grad)?;
        }
        Ok(grad)
    }

    pub fn params(&self) -> Vec<&Param> {
        self.layers.iter().flat_map(Layer::params).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(Param::zero_grad);
    }

    pub fn parameter_count(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }

    pub fn named_tensors(&self) -> Vec<(String, Tensor)> {
        self.params().into_iter().map(|p| (p.name.clone(), p.value.clone())).collect()
    }

    /// Overwrites parameter values by name; every parameter must be supplied with its exact shape.
    pub fn load_tensors(&mut self, tensors: &[(String, Tensor)]) -> Result<()> {
        let mut params = self.params_mut();
        if params.len() != tensors.len() {
            return Err(NnError::Checkpoint(format!(
                "expected {} tensors, found {}",
                params.len(),
                tensors.len()
            )));
        }
        for (p, (name, t)) in params.iter_mut().zip(tensors) {
            if &p.name != name || p.value.shape() != t.shape() {
                return Err(NnError::Checkpoint(format!(
                    "tensor `{name}` {:?} does not match parameter `{}` {:?}",
                    t.shape(),
                    p.name,
                    p.value.shape()
                )));
            }
            p.value = t.clone();
        }
        Ok(())
    }
}
