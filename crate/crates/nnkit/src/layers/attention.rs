use super::Param;
use crate::error::{NnError, Result};
use crate::init::{glorot_uniform, SeededRng};
use crate::tensor::Tensor;

/// Numerically stable row-wise softmax of a rank-2 tensor.
pub fn softmax_rows(scores: &Tensor) -> Tensor {
    let mut out = scores.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    out
}

fn check_qkv(q: &Tensor, k: &Tensor, v: &Tensor) -> Result<()> {
    if q.rank() != 2 || k.shape() != q.shape() {
        return Err(NnError::ShapeMismatch {
            op: "attention",
            operand: "K",
            expected: q.shape().to_vec(),
            got: k.shape().to_vec(),
        });
    }
    if v.rank() != 2 || v.rows() != q.rows() {
        return Err(NnError::ShapeMismatch {
            op: "attention",
            operand: "V",
            expected: vec![q.rows(), v.cols()],
            got: v.shape().to_vec(),
        });
    }
    Ok(())
}

fn attention_weights(q: &Tensor, k: &Tensor) -> Result<Tensor> {
    let scale = 1.0 / (q.cols() as f64).sqrt();
    let mut scores = q.matmul(&k.transpose())?;
    scores.data_mut().iter_mut().for_each(|s| *s *= scale);
    Ok(softmax_rows(&scores))
}

/// `softmax(Q K^T / sqrt(d_k)) V` with Q, K of shape `(n, d_k)` and V of shape `(n, d_v)`.
pub fn scaled_dot_attention(q: &Tensor, k: &Tensor, v: &Tensor) -> Result<Tensor> {
    check_qkv(q, k, v)?;
    attention_weights(q, k)?.matmul(v)
}

/// Gradients `(dQ, dK, dV)` of scaled dot-product attention for upstream `grad_out`.
pub fn scaled_dot_attention_backward(q: &Tensor, k: &Tensor, v: &Tensor, grad_out: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
    check_qkv(q, k, v)?;
    grad_out.expect_shape("attention.backward", "grad_out", &[q.rows(), v.cols()])?;
    let scale = 1.0 / (q.cols() as f64).sqrt();
    let a = attention_weights(q, k)?;
    let dv = a.transpose().matmul(grad_out)?;
    let da = grad_out.matmul(&v.transpose())?;
    // softmax Jacobian, row by row: dS = A * (dA - rowsum(A * dA))
    let mut ds = da;
    for r in 0..a.rows() {
        let dot: f64 = a.row(r).iter().zip(ds.row(r)).map(|(x, y)| x * y).sum();
        let arow = a.row(r).to_vec();
        for (d, av) in ds.row_mut(r).iter_mut().zip(arow) {
            *d = av * (*d - dot) * scale;
        }
    }
    let dq = ds.matmul(k)?;
    let dk = ds.transpose().matmul(q)?;
    Ok((dq, dk, dv))
}

/// Multi-head self-attention with per-head projections stored column-blocked:
/// head `i` uses columns `i*d_k..(i+1)*d_k` of `W^Q`, `W^K`, `W^V`.
///
/// There is no key bias: it shifts every score in a softmax row by the same
/// amount and so never changes the output.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiHeadAttention {
    pub heads: usize,
    pub wq: Param,
    pub bq: Param,
    pub wk: Param,
    pub wv: Param,
    pub bv: Param,
    pub wo: Param,
    pub bo: Param,
}

/// Concatenated multi-head attention of `x` given explicit projection matrices
/// (`d_model x d_model` each, no biases).
pub fn multi_head_attention(x: &Tensor, heads: usize, wq: &Tensor, wk: &Tensor, wv: &Tensor, wo: &Tensor) -> Result<Tensor> {
    let d = x.cols();
    let zeros = Tensor::zeros(&[d]);
    let mha = MultiHeadAttention::from_parts(heads, [wq.clone(), zeros.clone(), wk.clone(), wv.clone(), zeros.clone(), wo.clone(), zeros])?;
    mha.forward(x)
}

fn project(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let mut y = x.matmul(w)?;
    for r in 0..y.rows() {
        for (v, bi) in y.row_mut(r).iter_mut().zip(b.data()) {
            *v += bi;
        }
    }
    Ok(y)
}

fn column_sums(t: &Tensor) -> Tensor {
    let mut out = vec![0.0; t.cols()];
    for r in 0..t.rows() {
        for (o, v) in out.iter_mut().zip(t.row(r)) {
            *o += v;
        }
    }
    Tensor::vector(out)
}

impl MultiHeadAttention {
    pub fn new(name: &str, d_model: usize, heads: usize, rng: &mut SeededRng) -> Result<Self> {
        if heads == 0 || d_model % heads != 0 {
            return Err(NnError::IndivisibleHeads { d_model, heads });
        }
        let mut mat = |suffix: &str| Param::new(format!("{name}.{suffix}"), glorot_uniform(rng, &[d_model, d_model], d_model, d_model));
        let (wq, wk, wv, wo) = (mat("wq"), mat("wk"), mat("wv"), mat("wo"));
        let vec = |suffix: &str| Param::new(format!("{name}.{suffix}"), Tensor::zeros(&[d_model]));
        Ok(Self {
            heads,
            wq,
            bq: vec("bq"),
            wk,
            wv,
            bv: vec("bv"),
            wo,
            bo: vec("bo"),
        })
    }

    /// Builds from `[wq, bq, wk, wv, bv, wo, bo]`.
    pub fn from_parts(heads: usize, parts: [Tensor; 7]) -> Result<Self> {
        let d_model = parts[0].cols();
        if heads == 0 || d_model % heads != 0 {
            return Err(NnError::IndivisibleHeads { d_model, heads });
        }
        let names = ["wq", "bq", "wk", "wv", "bv", "wo", "bo"];
        for (p, name) in parts.iter().zip(names) {
            let expected: &[usize] = if name.starts_with('w') { &[d_model, d_model] } else { &[d_model] };
            p.expect_shape("multi_head_attention", name, expected)?;
        }
        let [wq, bq, wk, wv, bv, wo, bo] = parts;
        Ok(Self {
            heads,
            wq: Param::new("wq", wq),
            bq: Param::new("bq", bq),
            wk: Param::new("wk", wk),
            wv: Param::new("wv", wv),
            bv: Param::new("bv", bv),
            wo: Param::new("wo", wo),
            bo: Param::new("bo", bo),
        })
    }

    pub fn d_model(&self) -> usize {
        self.wq.value.cols()
    }

    pub fn head_dim(&self) -> usize {
        self.d_model() / self.heads
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.rank() != 2 || x.cols() != self.d_model() {
            return Err(NnError::ShapeMismatch {
                op: "multi_head_attention",
                operand: "x",
                expected: vec![x.rows(), self.d_model()],
                got: x.shape().to_vec(),
            });
        }
        Ok(())
    }

    fn projections(&self, x: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
        Ok((
            project(x, &self.wq.value, &self.bq.value)?,
            x.matmul(&self.wk.value)?,
            project(x, &self.wv.value, &self.bv.value)?,
        ))
    }

    fn concat_heads(&self, q: &Tensor, k: &Tensor, v: &Tensor) -> Result<Tensor> {
        let dk = self.head_dim();
        let mut concat = Tensor::zeros(&[q.rows(), self.d_model()]);
        for h in 0..self.heads {
            let head = scaled_dot_attention(&q.column_block(h * dk, dk), &k.column_block(h * dk, dk), &v.column_block(h * dk, dk))?;
            concat.set_column_block(h * dk, &head);
        }
        Ok(concat)
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let (q, k, v) = self.projections(x)?;
        let concat = self.concat_heads(&q, &k, &v)?;
        project(&concat, &self.wo.value, &self.bo.value)
    }

    pub fn backward(&mut self, x: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        grad_out.expect_shape("multi_head_attention.backward", "grad_out", x.shape())?;
        let (q, k, v) = self.projections(x)?;
        let concat = self.concat_heads(&q, &k, &v)?;
        self.wo.grad.add_assign(&concat.transpose().matmul(grad_out)?);
        self.bo.grad.add_assign(&column_sums(grad_out));
        let dconcat = grad_out.matmul(&self.wo.value.transpose())?;

        let dk = self.head_dim();
        let mut dq = Tensor::zeros(q.shape());
        let mut dkm = Tensor::zeros(k.shape());
        let mut dv = Tensor::zeros(v.shape());
        for h in 0..self.heads {
            let (gq, gk, gv) = scaled_dot_attention_backward(
                &q.column_block(h * dk, dk),
                &k.column_block(h * dk, dk),
                &v.column_block(h * dk, dk),
                &dconcat.column_block(h * dk, dk),
            )?;
            dq.set_column_block(h * dk, &gq);
            dkm.set_column_block(h * dk, &gk);
            dv.set_column_block(h * dk, &gv);
        }
        let xt = x.transpose();
        self.wq.grad.add_assign(&xt.matmul(&dq)?);
        self.wk.grad.add_assign(&xt.matmul(&dkm)?);
        self.wv.grad.add_assign(&xt.matmul(&dv)?);
        self.bq.grad.add_assign(&column_sums(&dq));
        self.bv.grad.add_assign(&column_sums(&dv));

        let mut dx = dq.matmul(&self.wq.value.transpose())?;
        dx.add_assign(&dkm.matmul(&self.wk.value.transpose())?);
        dx.add_assign(&dv.matmul(&self.wv.value.transpose())?);
        Ok(dx)
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.wq, &self.bq, &self.wk, &self.wv, &self.bv, &self.wo, &self.bo]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![
            &mut self.wq,
            &mut self.bq,
            &mut self.wk,
            &mut self.wv,
            &mut self.bv,
            &mut self.wo,
            &mut self.bo,
        ]
    }
}
