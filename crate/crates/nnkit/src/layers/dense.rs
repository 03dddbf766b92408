use rand::SeedableRng;

use super::{Activation, Param};
use crate::error::{NnError, Result};
use crate::init::{glorot_uniform, SeededRng};
use crate::tensor::Tensor;

/// `y_j = act(sum_i W[j,i] x_i + b_j)` for a single input vector.
pub fn dense_forward(x: &Tensor, weight: &Tensor, bias: &Tensor, activation: Activation) -> Result<Tensor> {
    let (n_out, n_in) = (weight.rows(), weight.cols());
    if weight.rank() != 2 {
        return Err(NnError::ShapeMismatch {
            op: "dense",
            operand: "weight",
            expected: vec![n_out, n_in],
            got: weight.shape().to_vec(),
        });
    }
    x.expect_shape("dense", "x", &[n_in])?;
    bias.expect_shape("dense", "bias", &[n_out])?;
    let out = (0..n_out)
        .map(|j| {
            let z: f64 = weight.row(j).iter().zip(x.data()).map(|(w, xi)| w * xi).sum::<f64>() + bias.data()[j];
            activation.apply(z)
        })
        .collect();
    Ok(Tensor::vector(out))
}

/// Fully connected layer applied to the last axis; rank-2 inputs are treated as
/// a stack of rows sharing the same weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Param,
    pub bias: Param,
    pub activation: Activation,
}

impl Dense {
    pub fn new(name: &str, n_in: usize, n_out: usize, activation: Activation, rng: &mut SeededRng) -> Self {
        Self {
            weight: Param::new(format!("{name}.weight"), glorot_uniform(rng, &[n_out, n_in], n_in, n_out)),
            bias: Param::new(format!("{name}.bias"), Tensor::zeros(&[n_out])),
            activation,
        }
    }

    pub fn seeded(name: &str, n_in: usize, n_out: usize, activation: Activation, seed: u64) -> Self {
        Self::new(name, n_in, n_out, activation, &mut SeededRng::seed_from_u64(seed))
    }

    pub fn n_in(&self) -> usize {
        self.weight.value.cols()
    }

    pub fn n_out(&self) -> usize {
        self.weight.value.rows()
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.cols() != self.n_in() || x.rank() > 2 {
            return Err(NnError::ShapeMismatch {
                op: "dense",
                operand: "x",
                expected: vec![self.n_in()],
                got: x.shape().to_vec(),
            });
        }
        Ok(())
    }

    fn pre_activation(&self, x: &Tensor) -> Tensor {
        let (n_out, rows) = (self.n_out(), x.rows());
        let w = &self.weight.value;
        let b = self.bias.value.data();
        let mut z = Vec::with_capacity(rows * n_out);
        for r in 0..rows {
            let xr = x.row(r);
            for j in 0..n_out {
                z.push(w.row(j).iter().zip(xr).map(|(a, c)| a * c).sum::<f64>() + b[j]);
            }
        }
        let shape = if x.rank() == 2 { vec![rows, n_out] } else { vec![n_out] };
        Tensor::new(shape, z).expect("dense output shape")
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let mut y = self.pre_activation(x);
        let act = self.activation;
        y.data_mut().iter_mut().for_each(|v| *v = act.apply(*v));
        Ok(y)
    }

    pub fn backward(&mut self, x: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let z = self.pre_activation(x);
        grad_out.expect_shape("dense.backward", "grad_out", z.shape())?;
        let (n_in, n_out) = (self.n_in(), self.n_out());
        let act = self.activation;
        let mut dx = Tensor::zeros(x.shape());
        for r in 0..x.rows() {
            let xr = x.row(r);
            for j in 0..n_out {
                let zj = z.row(r)[j];
                let dz = grad_out.row(r)[j] * act.derivative(zj, act.apply(zj));
                if dz == 0.0 {
                    continue;
                }
                self.bias.grad.data_mut()[j] += dz;
                let gw = &mut self.weight.grad.data_mut()[j * n_in..(j + 1) * n_in];
                for (g, xi) in gw.iter_mut().zip(xr) {
                    *g += dz * xi;
                }
                let wr = &self.weight.value.data()[j * n_in..(j + 1) * n_in];
                for (d, w) in dx.row_mut(r).iter_mut().zip(wr) {
                    *d += dz * w;
                }
            }
        }
        Ok(dx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: &[Vec<f64>]) -> Tensor {
        Tensor::matrix(rows).unwrap()
    }

    #[test]
    fn hand_arithmetic() {
        let w = t(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let y = dense_forward(&Tensor::vector(vec![1.0, 1.0]), &w, &Tensor::zeros(&[2]), Activation::None).unwrap();
        assert_eq!(y.data(), &[3.0, 7.0]);
    }

    #[test]
    fn zero_weights_relu() {
        let y = dense_forward(
            &Tensor::vector(vec![0.3, -2.0, 5.0]),
            &Tensor::zeros(&[4, 3]),
            &Tensor::zeros(&[4]),
            Activation::Relu,
        )
        .unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sigmoid_of_minus_one() {
        let y = dense_forward(
            &Tensor::vector(vec![0.0]),
            &t(&[vec![5.0]]),
            &Tensor::vector(vec![-1.0]),
            Activation::Sigmoid,
        )
        .unwrap();
        let reference = 1.0 / (1.0 + std::f64::consts::E);
        assert!((y.data()[0] - reference).abs() < 1e-15);
        assert!((y.data()[0] - 0.2689).abs() < 5e-5);
    }

    #[test]
    fn shape_mismatch_names_operand() {
        let err = dense_forward(
            &Tensor::vector(vec![1.0, 2.0, 3.0]),
            &Tensor::zeros(&[2, 2]),
            &Tensor::zeros(&[2]),
            Activation::None,
        )
        .unwrap_err();
        assert!(err.to_string().contains("x"), "{err}");
        let err = dense_forward(
            &Tensor::vector(vec![1.0, 2.0]),
            &Tensor::zeros(&[2, 2]),
            &Tensor::zeros(&[3]),
            Activation::None,
        )
        .unwrap_err();
        assert!(err.to_string().contains("bias"), "{err}");
    }

    #[test]
    fn layer_matches_free_function() {
        let layer = Dense::seeded("d", 3, 2, Activation::Sigmoid, 9);
        let x = Tensor::vector(vec![0.1, -0.4, 0.8]);
        let a = layer.forward(&x).unwrap();
        let b = dense_forward(&x, &layer.weight.value, &layer.bias.value, Activation::Sigmoid).unwrap();
        assert_eq!(a, b);
    }
}
