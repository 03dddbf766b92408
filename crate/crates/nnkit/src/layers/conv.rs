use super::Param;
use crate::error::{NnError, Result};
use crate::init::{glorot_uniform, SeededRng};
use crate::tensor::Tensor;

/// Views a rank-1 signal as a single channel: `[L]` becomes `(L, 1)`.
fn signal_dims(x: &Tensor) -> (usize, usize) {
    if x.rank() == 1 {
        (x.len(), 1)
    } else {
        (x.rows(), x.cols())
    }
}

/// Valid cross-correlation without activation:
/// `h[i,c] = sum_k sum_d w[c,k,d] * x[i+k, d] + b[c]`.
pub fn conv1d_preactivation(x: &Tensor, kernels: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (len, c_in) = signal_dims(x);
    let ks = kernels.shape();
    if ks.len() != 3 || ks[2] != c_in || x.rank() > 2 {
        return Err(NnError::ShapeMismatch {
            op: "conv1d",
            operand: "kernels",
            expected: vec![ks.first().copied().unwrap_or(0), ks.get(1).copied().unwrap_or(0), c_in],
            got: ks.to_vec(),
        });
    }
    let (c_out, m) = (ks[0], ks[1]);
    bias.expect_shape("conv1d", "bias", &[c_out])?;
    if len < m {
        return Err(NnError::InputTooShort {
            op: "conv1d",
            len,
            window: m,
        });
    }
    let out_len = len - m + 1;
    let xd = x.data();
    let kd = kernels.data();
    let mut out = vec![0.0; out_len * c_out];
    for i in 0..out_len {
        let window = &xd[i * c_in..(i + m) * c_in];
        for c in 0..c_out {
            let kc = &kd[c * m * c_in..(c + 1) * m * c_in];
            out[i * c_out + c] = window.iter().zip(kc).map(|(a, b)| a * b).sum::<f64>() + bias.data()[c];
        }
    }
    Tensor::new(vec![out_len, c_out], out)
}

/// Valid cross-correlation followed by ReLU. Output shape `(L - m + 1, C_out)`.
pub fn conv1d_forward(x: &Tensor, kernels: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let mut h = conv1d_preactivation(x, kernels, bias)?;
    h.data_mut().iter_mut().for_each(|v| *v = super::relu(*v));
    Ok(h)
}

/// Gradients of `conv1d_forward` for upstream gradient `grad_out`:
/// returns `(d_x, d_kernels, d_bias)`; `d_x` has the shape of `x`.
pub fn conv1d_backward(x: &Tensor, kernels: &Tensor, bias: &Tensor, grad_out: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
    let z = conv1d_preactivation(x, kernels, bias)?;
    grad_out.expect_shape("conv1d.backward", "grad_out", z.shape())?;
    let (_, c_in) = signal_dims(x);
    let (c_out, m) = (kernels.shape()[0], kernels.shape()[1]);
    let xd = x.data();
    let kd = kernels.data();
    let mut dx = vec![0.0; x.len()];
    let mut dk = vec![0.0; kernels.len()];
    let mut db = vec![0.0; c_out];
    for i in 0..z.rows() {
        for c in 0..c_out {
            if z.at2(i, c) <= 0.0 {
                continue;
            }
            let dz = grad_out.at2(i, c);
            if dz == 0.0 {
                continue;
            }
            db[c] += dz;
            let span = i * c_in..(i + m) * c_in;
            let kspan = c * m * c_in..(c + 1) * m * c_in;
            for ((g, xv), (dxv, kv)) in dk[kspan.clone()]
                .iter_mut()
                .zip(&xd[span.clone()])
                .zip(dx[span].iter_mut().zip(&kd[kspan]))
            {
                *g += dz * xv;
                *dxv += dz * kv;
            }
        }
    }
    Ok((
        Tensor::new(x.shape().to_vec(), dx)?,
        Tensor::new(kernels.shape().to_vec(), dk)?,
        Tensor::vector(db),
    ))
}

/// Per-channel windowed maximum. Output shape `(floor((L - m) / s) + 1, C)`.
pub fn maxpool1d_forward(x: &Tensor, window: usize, stride: usize) -> Result<Tensor> {
    let (out, _) = maxpool_with_argmax(x, window, stride)?;
    Ok(out)
}

fn maxpool_with_argmax(x: &Tensor, window: usize, stride: usize) -> Result<(Tensor, Vec<usize>)> {
    let (len, ch) = signal_dims(x);
    if window == 0 || stride == 0 {
        return Err(NnError::Config("max pool window and stride must be positive".into()));
    }
    if len < window {
        return Err(NnError::InputTooShort {
            op: "maxpool1d",
            len,
            window,
        });
    }
    let out_len = (len - window) / stride + 1;
    let xd = x.data();
    let mut out = Vec::with_capacity(out_len * ch);
    let mut arg = Vec::with_capacity(out_len * ch);
    for o in 0..out_len {
        for c in 0..ch {
            let start = o * stride;
            let mut best = start;
            for p in start + 1..start + window {
                // strict comparison keeps the first maximal position on ties
                if xd[p * ch + c] > xd[best * ch + c] {
                    best = p;
                }
            }
            out.push(xd[best * ch + c]);
            arg.push(best * ch + c);
        }
    }
    Ok((Tensor::new(vec![out_len, ch], out)?, arg))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    pub kernels: Param,
    pub bias: Param,
}

impl Conv1d {
    pub fn new(name: &str, c_in: usize, c_out: usize, width: usize, rng: &mut SeededRng) -> Self {
        let kernels = glorot_uniform(rng, &[c_out, width, c_in], width * c_in, width * c_out);
        Self {
            kernels: Param::new(format!("{name}.weight"), kernels),
            bias: Param::new(format!("{name}.bias"), Tensor::zeros(&[c_out])),
        }
    }

    pub fn width(&self) -> usize {
        self.kernels.value.shape()[1]
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        conv1d_forward(x, &self.kernels.value, &self.bias.value)
    }

    pub fn backward(&mut self, x: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
        let (dx, dk, db) = conv1d_backward(x, &self.kernels.value, &self.bias.value, grad_out)?;
        self.kernels.grad.add_assign(&dk);
        self.bias.grad.add_assign(&db);
        Ok(dx)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxPool1d {
    pub window: usize,
    pub stride: usize,
}

impl MaxPool1d {
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        maxpool1d_forward(x, self.window, self.stride)
    }

    /// Routes each upstream gradient to the (first) argmax of its window.
    pub fn backward(&mut self, x: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
        let (out, arg) = maxpool_with_argmax(x, self.window, self.stride)?;
        grad_out.expect_shape("maxpool1d.backward", "grad_out", out.shape())?;
        let mut dx = Tensor::zeros(x.shape());
        for (g, &a) in grad_out.data().iter().zip(&arg) {
            dx.data_mut()[a] += g;
        }
        Ok(dx)
    }
}

/// Collapses any input to a rank-1 vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Flatten;

impl Flatten {
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(Tensor::vector(x.data().to_vec()))
    }

    pub fn backward(&mut self, x: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
        grad_out.clone().reshape(x.shape().to_vec())
    }
}
