use super::{Activation, Dense, LayerNorm, MultiHeadAttention, Param};
use crate::error::Result;
use crate::init::SeededRng;
use crate::tensor::Tensor;

/// Post-norm transformer encoder block:
/// `h = LN1(x + MHA(x))`, `out = LN2(h + W2 relu(W1 h))`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderBlock {
    pub attention: MultiHeadAttention,
    pub norm1: LayerNorm,
    pub ff_in: Dense,
    pub ff_out: Dense,
    pub norm2: LayerNorm,
}

impl EncoderBlock {
    pub fn new(name: &str, d_model: usize, heads: usize, ff_width: usize, rng: &mut SeededRng) -> Result<Self> {
        Ok(Self {
            attention: MultiHeadAttention::new(&format!("{name}.attn"), d_model, heads, rng)?,
            norm1: LayerNorm::new(&format!("{name}.ln1"), d_model),
            ff_in: Dense::new(&format!("{name}.ff1"), d_model, ff_width, Activation::Relu, rng),
            ff_out: Dense::new(&format!("{name}.ff2"), ff_width, d_model, Activation::None, rng),
            norm2: LayerNorm::new(&format!("{name}.ln2"), d_model),
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let r1 = x.add(&self.attention.forward(x)?);
        let h = self.norm1.forward(&r1)?;
        let f = self.ff_out.forward(&self.ff_in.forward(&h)?)?;
        self.norm2.forward(&h.add(&f))
    }

    pub fn backward(&mut self, x: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
        let r1 = x.add(&self.attention.forward(x)?);
        let h = self.norm1.forward(&r1)?;
        let inner = self.ff_in.forward(&h)?;
        let r2 = h.add(&self.ff_out.forward(&inner)?);

        let dr2 = self.norm2.backward(&r2, grad_out)?;
        let dinner = self.ff_out.backward(&inner, &dr2)?;
        let mut dh = self.ff_in.backward(&h, &dinner)?;
        dh.add_assign(&dr2);
        let dr1 = self.norm1.backward(&r1, &dh)?;
        let mut dx = self.attention.backward(x, &dr1)?;
        dx.add_assign(&dr1);
        Ok(dx)
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut p = self.attention.params();
        p.extend([
            &self.norm1.gamma,
            &self.norm1.beta,
            &self.ff_in.weight,
            &self.ff_in.bias,
            &self.ff_out.weight,
            &self.ff_out.bias,
            &self.norm2.gamma,
            &self.norm2.beta,
        ]);
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.attention.params_mut();
        p.extend([
            &mut self.norm1.gamma,
            &mut self.norm1.beta,
            &mut self.ff_in.weight,
            &mut self.ff_in.bias,
            &mut self.ff_out.weight,
            &mut self.ff_out.bias,
            &mut self.norm2.gamma,
            &mut self.norm2.beta,
        ]);
        p
    }
}
