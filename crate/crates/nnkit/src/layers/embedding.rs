use super::Param;
use crate::error::{NnError, Result};
use crate::init::{glorot_uniform, SeededRng};
use crate::tensor::Tensor;

/// Token embedding plus learned absolute positional embedding.
///
/// Input is a rank-1 tensor of token ids stored as `f64`; output is `(n, d_model)`.
///
/// With a padding id set, trailing padding positions are dropped from the output, so later
/// layers never see them. For a model pooled at the first position this is equivalent to
/// masking padded keys in attention.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub tokens: Param,
    pub positions: Param,
    pub pad_id: Option<usize>,
}

impl Embedding {
    pub fn new(name: &str, vocab: usize, max_len: usize, d_model: usize, rng: &mut SeededRng) -> Self {
        Self {
            tokens: Param::new(format!("{name}.tokens"), glorot_uniform(rng, &[vocab, d_model], vocab, d_model)),
            positions: Param::new(format!("{name}.positions"), glorot_uniform(rng, &[max_len, d_model], max_len, d_model)),
            pad_id: None,
        }
    }

    pub fn with_pad_id(mut self, pad_id: usize) -> Self {
        self.pad_id = Some(pad_id);
        self
    }

    pub fn vocab(&self) -> usize {
        self.tokens.value.rows()
    }

    pub fn max_len(&self) -> usize {
        self.positions.value.rows()
    }

    fn ids(&self, x: &Tensor) -> Result<Vec<usize>> {
        if x.rank() != 1 || x.len() > self.max_len() {
            return Err(NnError::ShapeMismatch {
                op: "embedding",
                operand: "token_ids",
                expected: vec![self.max_len()],
                got: x.shape().to_vec(),
            });
        }
        x.data()
            .iter()
            .map(|&v| {
                let id = v as usize;
                if v < 0.0 || v.fract() != 0.0 || id >= self.vocab() {
                    Err(NnError::TokenOutOfRange { id, vocab: self.vocab() })
                } else {
                    Ok(id)
                }
            })
            .collect::<Result<Vec<usize>>>()
            .map(|mut ids| {
                if let Some(pad) = self.pad_id {
                    let keep = ids.iter().rposition(|&id| id != pad).map_or(1, |p| p + 1);
                    ids.truncate(keep);
                }
                ids
            })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let ids = self.ids(x)?;
        let d = self.tokens.value.cols();
        let mut out = Tensor::zeros(&[ids.len(), d]);
        for (p, &id) in ids.iter().enumerate() {
            let tok = self.tokens.value.row(id);
            let pos = self.positions.value.row(p);
            for ((o, a), b) in out.row_mut(p).iter_mut().zip(tok).zip(pos) {
                *o = a + b;
            }
        }
        Ok(out)
    }

    /// Token ids are not differentiable; the returned input gradient is zero.
    pub fn backward(&mut self, x: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
        let ids = self.ids(x)?;
        let d = self.tokens.value.cols();
        grad_out.expect_shape("embedding.backward", "grad_out", &[ids.len(), d])?;
        for (p, &id) in ids.iter().enumerate() {
            let g = grad_out.row(p);
            for (t, v) in self.tokens.grad.row_mut(id).iter_mut().zip(g) {
                *t += v;
            }
            for (t, v) in self.positions.grad.row_mut(p).iter_mut().zip(g) {
                *t += v;
            }
        }
        Ok(Tensor::zeros(x.shape()))
    }
}

/// Keeps only the first sequence position: `(n, d)` to `(d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClsPool;

impl ClsPool {
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        if x.rank() != 2 {
            return Err(NnError::ShapeMismatch {
                op: "cls_pool",
                operand: "x",
                expected: vec![1, x.cols()],
                got: x.shape().to_vec(),
            });
        }
        Ok(Tensor::vector(x.row(0).to_vec()))
    }

    pub fn backward(&mut self, x: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
        grad_out.expect_shape("cls_pool.backward", "grad_out", &[x.cols()])?;
        let mut dx = Tensor::zeros(x.shape());
        dx.row_mut(0).copy_from_slice(grad_out.data());
        Ok(dx)
    }
}
