use super::Param;
use crate::error::{NnError, Result};
use crate::tensor::Tensor;

const LN_EPS: f64 = 1e-5;

/// Per-row layer normalization with learned gain and shift.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gamma: Param,
    pub beta: Param,
}

impl LayerNorm {
    pub fn new(name: &str, d: usize) -> Self {
        Self {
            gamma: Param::new(format!("{name}.gamma"), Tensor::filled(&[d], 1.0)),
            beta: Param::new(format!("{name}.beta"), Tensor::zeros(&[d])),
        }
    }

    fn check(&self, x: &Tensor) -> Result<()> {
        if x.cols() != self.gamma.value.len() {
            return Err(NnError::ShapeMismatch {
                op: "layer_norm",
                operand: "x",
                expected: vec![x.rows(), self.gamma.value.len()],
                got: x.shape().to_vec(),
            });
        }
        Ok(())
    }

    /// Returns normalized rows and per-row inverse standard deviations.
    fn normalize(x: &Tensor) -> (Tensor, Vec<f64>) {
        let d = x.cols() as f64;
        let mut xhat = x.clone();
        let mut inv = Vec::with_capacity(x.rows());
        for r in 0..x.rows() {
            let row = xhat.row_mut(r);
            let mean = row.iter().sum::<f64>() / d;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
            let is = 1.0 / (var + LN_EPS).sqrt();
            row.iter_mut().for_each(|v| *v = (*v - mean) * is);
            inv.push(is);
        }
        (xhat, inv)
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.check(x)?;
        let (mut y, _) = Self::normalize(x);
        for r in 0..y.rows() {
            for ((v, g), b) in y.row_mut(r).iter_mut().zip(self.gamma.value.data()).zip(self.beta.value.data()) {
                *v = *v * g + b;
            }
        }
        Ok(y)
    }

    pub fn backward(&mut self, x: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
        self.check(x)?;
        grad_out.expect_shape("layer_norm.backward", "grad_out", x.shape())?;
        let (xhat, inv) = Self::normalize(x);
        let d = x.cols();
        let mut dx = Tensor::zeros(x.shape());
        for r in 0..x.rows() {
            let gy = grad_out.row(r);
            let xh = xhat.row(r);
            let mut dxhat = vec![0.0; d];
            for j in 0..d {
                self.gamma.grad.data_mut()[j] += gy[j] * xh[j];
                self.beta.grad.data_mut()[j] += gy[j];
                dxhat[j] = gy[j] * self.gamma.value.data()[j];
            }
            let mean_d = dxhat.iter().sum::<f64>() / d as f64;
            let mean_dx = dxhat.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / d as f64;
            for (j, out) in dx.row_mut(r).iter_mut().enumerate() {
                *out = inv[r] * (dxhat[j] - mean_d - xh[j] * mean_dx);
            }
        }
        Ok(dx)
    }
}
