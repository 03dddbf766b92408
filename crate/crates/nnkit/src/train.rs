//! Seeded mini-batch training with per-epoch fit/validation tracking.

use rand::seq::SliceRandom;

use crate::data::holdout_split;
use crate::error::{NnError, Result};
use crate::init;
use crate::loss::LossKind;
use crate::network::Network;
use crate::optim::{AdamConfig, AdamState};
use crate::tensor::Tensor;

/// One featurized example with a binary (or real) target.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Tensor,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub val_fraction: f64,
    pub seed: u64,
    pub loss: LossKind,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            epochs: 20,
            val_fraction: 0.2,
            seed: 7,
            loss: LossKind::Bce,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(NnError::Config("batch_size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(NnError::Config(format!("val_fraction {} outside [0, 1)", self.val_fraction)));
        }
        if !(self.adam.lr > 0.0) {
            return Err(NnError::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_acc: f64,
    pub train_loss: f64,
    pub val_acc: Option<f64>,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpochTrace {
    pub epochs: Vec<EpochStats>,
    pub steps: u64,
}

impl EpochTrace {
    pub fn last(&self) -> Option<&EpochStats> {
        self.epochs.last()
    }
}

/// Scalar probability output of a binary classifier network.
pub fn predict(net: &Network, input: &Tensor) -> Result<f64> {
    let out = net.forward(input)?;
    out.expect_shape("predict", "output", &[1])?;
    Ok(out.data()[0])
}

/// Accuracy (threshold 0.5) and mean loss over `data`.
pub fn evaluate(net: &Network, data: &[Sample], loss: LossKind) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Err(NnError::Empty { op: "evaluate" });
    }
    let mut preds = Vec::with_capacity(data.len());
    let mut correct = 0usize;
    for s in data {
        let p = predict(net, &s.input)?;
        let label = if p >= 0.5 { 1.0 } else { 0.0 };
        if label == s.target {
            correct += 1;
        }
        preds.push(p);
    }
    let targets: Vec<f64> = data.iter().map(|s| s.target).collect();
    Ok((correct as f64 / data.len() as f64, loss.value(&preds, &targets)?))
}

/// Holds out `config.val_fraction` of `data` (seeded) and trains on the rest.
pub fn train(net: &mut Network, data: &[Sample], config: &TrainConfig) -> Result<EpochTrace> {
    config.validate()?;
    let (fit_idx, val_idx) = holdout_split(data.len(), config.val_fraction, config.seed);
    let fit: Vec<Sample> = fit_idx.iter().map(|&i| data[i].clone()).collect();
    let val: Vec<Sample> = val_idx.iter().map(|&i| data[i].clone()).collect();
    train_split(net, &fit, &val, config)
}

/// Trains on `fit` with Adam over shuffled mini-batches, tracking `val` per epoch.
///
/// Performs `epochs * ceil(|fit| / batch_size)` optimizer steps; the last partial
/// batch is kept. Fully deterministic for a given seed.
pub fn train_split(net: &mut Network, fit: &[Sample], val: &[Sample], config: &TrainConfig) -> Result<EpochTrace> {
    config.validate()?;
    if fit.is_empty() {
        return Err(NnError::Empty { op: "train" });
    }
    let mut state = AdamState::new(config.adam, &net.params());
    let mut rng = init::rng(config.seed.wrapping_add(0x9E37_79B9_7F4A_7C15));
    let mut order: Vec<usize> = (0..fit.len()).collect();
    let mut trace = EpochTrace::default();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            net.zero_grad();
            let mut preds = Vec::with_capacity(batch.len());
            let mut targets = Vec::with_capacity(batch.len());
            let mut traces = Vec::with_capacity(batch.len());
            for &i in batch {
                let t = net.forward_trace(&fit[i].input)?;
                preds.push(t.last().expect("trace has output").data()[0]);
                targets.push(fit[i].target);
                traces.push(t);
            }
            let batch_loss = config.loss.value(&preds, &targets)?;
            if !batch_loss.is_finite() {
                return Err(NnError::NonFiniteLoss { epoch, batch: b + 1 });
            }
            let grads = config.loss.gradient(&preds, &targets)?;
            for (t, g) in traces.iter().zip(grads) {
                net.backward(t, Tensor::scalar(g))?;
            }
            state.step(&mut net.params_mut())?;
            trace.steps += 1;
        }
        let (train_acc, train_loss) = evaluate(net, fit, config.loss)?;
        if !train_loss.is_finite() {
            return Err(NnError::NonFiniteLoss { epoch, batch: 0 });
        }
        let (val_acc, val_loss) = if val.is_empty() {
            (None, None)
        } else {
            let (a, l) = evaluate(net, val, config.loss)?;
            (Some(a), Some(l))
        };
        trace.epochs.push(EpochStats {
            epoch,
            train_acc,
            train_loss,
            val_acc,
            val_loss,
        });
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::{Activation, Dense, Layer};

    fn two_dense(seed: u64) -> Network {
        let mut rng = init::rng(seed);
        Network::new(vec![
            Layer::Dense(Dense::new("d0", 2, 8, Activation::Relu, &mut rng)),
            Layer::Dense(Dense::new("d1", 8, 1, Activation::Sigmoid, &mut rng)),
        ])
    }

    fn separable() -> Vec<Sample> {
        [([1.0, 1.0], 1.0), ([0.8, 1.2], 1.0), ([-1.0, -1.0], 0.0), ([-1.2, -0.7], 0.0)]
            .iter()
            .map(|(x, y)| Sample {
                input: Tensor::vector(x.to_vec()),
                target: *y,
            })
            .collect()
    }

    #[test]
    fn zero_epochs_leave_parameters_untouched() {
        let mut net = two_dense(1);
        let before = net.clone();
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let trace = train(&mut net, &separable(), &cfg).unwrap();
        assert!(trace.epochs.is_empty());
        assert_eq!(net, before);
    }

    #[test]
    fn fits_separable_points() {
        let mut net = two_dense(2);
        let cfg = TrainConfig {
            epochs: 200,
            val_fraction: 0.0,
            batch_size: 2,
            ..TrainConfig::default()
        };
        let trace = train(&mut net, &separable(), &cfg).unwrap();
        assert_eq!(trace.last().unwrap().train_acc, 1.0);
        assert_eq!(trace.steps, 400);
        assert!(trace.last().unwrap().val_acc.is_none());
    }

    #[test]
    fn step_count_includes_partial_batch() {
        let data: Vec<Sample> = (0..236)
            .map(|i| Sample {
                input: Tensor::vector(vec![i as f64 / 236.0, 1.0]),
                target: (i % 2) as f64,
            })
            .collect();
        let mut net = two_dense(3);
        let cfg = TrainConfig {
            epochs: 1,
            val_fraction: 0.0,
            ..TrainConfig::default()
        };
        assert_eq!(train(&mut net, &data, &cfg).unwrap().steps, 8);
    }

    #[test]
    fn identical_seeds_identical_parameters() {
        let cfg = TrainConfig {
            epochs: 5,
            val_fraction: 0.25,
            batch_size: 3,
            ..TrainConfig::default()
        };
        let mut a = two_dense(4);
        let mut b = two_dense(4);
        let ta = train(&mut a, &separable(), &cfg).unwrap();
        let tb = train(&mut b, &separable(), &cfg).unwrap();
        assert_eq!(ta, tb);
        for (x, y) in a.params().iter().zip(b.params()) {
            let xb: Vec<u64> = x.value.data().iter().map(|v| v.to_bits()).collect();
            let yb: Vec<u64> = y.value.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(xb, yb);
        }
    }

    #[test]
    fn nan_inputs_abort_with_location() {
        let mut data = separable();
        data[0].input = Tensor::vector(vec![f64::NAN, 0.0]);
        let mut net = two_dense(5);
        let cfg = TrainConfig {
            epochs: 1,
            val_fraction: 0.0,
            ..TrainConfig::default()
        };
        let err = train(&mut net, &data, &cfg).unwrap_err();
        assert!(matches!(err, NnError::NonFiniteLoss { epoch: 1, batch: 1 }), "{err}");
    }
}
