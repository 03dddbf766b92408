//! Central finite-difference verification of analytic gradients.

use rand::Rng;

use crate::error::Result;
use crate::init;
use crate::layers::{Layer, LayerKind};
use crate::loss::LossKind;
use crate::network::Network;
use crate::tensor::Tensor;
use crate::train::Sample;

pub const FD_STEP: f64 = 1e-5;

/// `|a - n| / max(1e-8, |a| + |n|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Central differences `(f(x + h e_i) - f(x - h e_i)) / 2h` for every coordinate.
pub fn central_difference<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let plus = f(&probe);
            probe[i] = orig - h;
            let minus = f(&probe);
            probe[i] = orig;
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// Largest relative error between two gradient vectors.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamError {
    pub name: String,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub params: Vec<ParamError>,
    /// Error on the input gradient, when the input is differentiable.
    pub input: Option<f64>,
    pub max_rel_error: f64,
    pub tolerance: f64,
}

impl GradCheckReport {
    fn new(params: Vec<ParamError>, input: Option<f64>, tolerance: f64) -> Self {
        let max_rel_error = params
            .iter()
            .map(|p| p.max_rel_error)
            .chain(input)
            .fold(0.0, f64::max);
        Self {
            params,
            input,
            max_rel_error,
            tolerance,
        }
    }

    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

fn sample_loss(net: &Network, sample: &Sample, loss: LossKind) -> f64 {
    let out = net.forward(&sample.input).expect("forward pass during gradient check");
    loss.value(out.data(), &[sample.target]).expect("loss during gradient check")
}

/// Compares a network's backward pass against central differences of the loss
/// on one sample, for every parameter element.
pub fn gradient_check(net: &mut Network, sample: &Sample, loss: LossKind, tolerance: f64) -> Result<GradCheckReport> {
    net.zero_grad();
    let trace = net.forward_trace(&sample.input)?;
    let out = trace.last().expect("trace has output").data().to_vec();
    let g = loss.gradient(&out, &[sample.target])?;
    net.backward(&trace, Tensor::vector(g))?;

    let analytic: Vec<(String, Vec<f64>)> = net
        .params()
        .iter()
        .map(|p| (p.name.clone(), p.grad.data().to_vec()))
        .collect();
    let mut report = Vec::with_capacity(analytic.len());
    for (pi, (name, grad)) in analytic.iter().enumerate() {
        let mut worst: f64 = 0.0;
        for (ei, &a) in grad.iter().enumerate() {
            let orig = net.params()[pi].value.data()[ei];
            net.params_mut()[pi].value.data_mut()[ei] = orig + FD_STEP;
            let plus = sample_loss(net, sample, loss);
            net.params_mut()[pi].value.data_mut()[ei] = orig - FD_STEP;
            let minus = sample_loss(net, sample, loss);
            net.params_mut()[pi].value.data_mut()[ei] = orig;
            worst = worst.max(relative_error(a, (plus - minus) / (2.0 * FD_STEP)));
        }
        report.push(ParamError {
            name: name.clone(),
            max_rel_error: worst,
        });
    }
    net.zero_grad();
    Ok(GradCheckReport::new(report, None, tolerance))
}

/// Checks one layer in isolation under the linear probe loss `sum_i r_i y_i`
/// with seeded random weights `r`, covering parameters and (where defined) the input.
pub fn layer_gradient_check(layer: &mut Layer, x: &Tensor, probe_seed: u64, tolerance: f64) -> Result<GradCheckReport> {
    let y = layer.forward(x)?;
    let mut rng = init::rng(probe_seed);
    let r: Vec<f64> = (0..y.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let probe = Tensor::new(y.shape().to_vec(), r.clone())?;
    let objective = |l: &Layer, input: &Tensor| -> f64 {
        let out = l.forward(input).expect("forward pass during gradient check");
        out.data().iter().zip(&r).map(|(a, b)| a * b).sum()
    };

    for p in layer.params_mut() {
        p.zero_grad();
    }
    let dx = layer.backward(x, &probe)?;

    let input_err = if layer.kind() == LayerKind::Embedding {
        None
    } else {
        let numeric = central_difference(
            |v| objective(layer, &Tensor::new(x.shape().to_vec(), v.to_vec()).expect("same shape")),
            x.data(),
            FD_STEP,
        );
        Some(max_relative_error(dx.data(), &numeric))
    };

    let analytic: Vec<(String, Vec<f64>)> = layer
        .params()
        .iter()
        .map(|p| (p.name.clone(), p.grad.data().to_vec()))
        .collect();
    let mut params = Vec::with_capacity(analytic.len());
    for (pi, (name, grad)) in analytic.iter().enumerate() {
        let mut worst: f64 = 0.0;
        for (ei, &a) in grad.iter().enumerate() {
            let orig = layer.params()[pi].value.data()[ei];
            layer.params_mut()[pi].value.data_mut()[ei] = orig + FD_STEP;
            let plus = objective(layer, x);
            layer.params_mut()[pi].value.data_mut()[ei] = orig - FD_STEP;
            let minus = objective(layer, x);
            layer.params_mut()[pi].value.data_mut()[ei] = orig;
            worst = worst.max(relative_error(a, (plus - minus) / (2.0 * FD_STEP)));
        }
        params.push(ParamError {
            name: name.clone(),
            max_rel_error: worst,
        });
    }
    for p in layer.params_mut() {
        p.zero_grad();
    }
    Ok(GradCheckReport::new(params, input_err, tolerance))
}
