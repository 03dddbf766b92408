use crate::error::{NnError, Result};

/// Probability clamp used by binary cross-entropy.
pub const BCE_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossKind {
    #[default]
    Bce,
    Mse,
}

impl LossKind {
    pub fn value(self, predicted: &[f64], target: &[f64]) -> Result<f64> {
        match self {
            LossKind::Bce => bce_loss(predicted, target),
            LossKind::Mse => mse_loss(predicted, target),
        }
    }

    /// Gradient of the mean loss with respect to each prediction.
    pub fn gradient(self, predicted: &[f64], target: &[f64]) -> Result<Vec<f64>> {
        check("loss gradient", predicted, target)?;
        let n = predicted.len() as f64;
        Ok(match self {
            LossKind::Mse => predicted.iter().zip(target).map(|(o, y)| (o - y) / n).collect(),
            // derivative of the clamped loss inside the clamp band; at the band edges the
            // same expression keeps a non-vanishing signal so saturated units can recover
            LossKind::Bce => predicted
                .iter()
                .zip(target)
                .map(|(&p, &y)| {
                    let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
                    (p - y) / (p * (1.0 - p)) / n
                })
                .collect(),
        })
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LossKind::Bce => "bce",
            LossKind::Mse => "mse",
        })
    }
}

impl std::str::FromStr for LossKind {
    type Err = NnError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bce" => Ok(LossKind::Bce),
            "mse" => Ok(LossKind::Mse),
            other => Err(NnError::Config(format!("unknown loss `{other}` (expected bce or mse)"))),
        }
    }
}

fn check(op: &'static str, a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() {
        return Err(NnError::Empty { op });
    }
    if a.len() != b.len() {
        return Err(NnError::ShapeMismatch {
            op,
            operand: "target",
            expected: vec![a.len()],
            got: vec![b.len()],
        });
    }
    Ok(())
}

/// `(1 / 2N) * sum (o_i - y_i)^2`.
pub fn mse_loss(predicted: &[f64], target: &[f64]) -> Result<f64> {
    check("mse_loss", predicted, target)?;
    let sum: f64 = predicted.iter().zip(target).map(|(o, y)| (o - y) * (o - y)).sum();
    Ok(sum / (2.0 * predicted.len() as f64))
}

/// `-(1/N) * sum [y ln p + (1 - y) ln(1 - p)]` with `p` clamped to `[eps, 1 - eps]`.
pub fn bce_loss(predicted: &[f64], target: &[f64]) -> Result<f64> {
    check("bce_loss", predicted, target)?;
    let sum: f64 = predicted
        .iter()
        .zip(target)
        .map(|(&p, &y)| {
            let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    Ok(sum / predicted.len() as f64)
}
