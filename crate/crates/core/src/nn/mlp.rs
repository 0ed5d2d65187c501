use serde::{Deserialize, Serialize};

use super::{matvec_acc, matvec_t_acc, outer_acc, Layout};
use crate::error::{Error, Result};

/// A linear hidden layer of half the input width followed by a linear
/// output layer: a rank-limited linear map trained end to end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
}

impl MlpConfig {
    pub fn new(input_dim: usize, output_dim: usize) -> Self {
        MlpConfig {
            input_dim,
            hidden_dim: (input_dim / 2).max(1),
            output_dim,
        }
    }

    /// Tensors `w1` (H x D), `b1`, `w2` (O x H), `b2`.
    pub fn layout(&self) -> Layout {
        let (d, h, o) = (self.input_dim, self.hidden_dim, self.output_dim);
        let mut l = Layout::default();
        l.push("w1", vec![h, d], d);
        l.push("b1", vec![h], d);
        l.push("w2", vec![o, h], h);
        l.push("b2", vec![o], h);
        l
    }

    pub fn n_params(&self) -> usize {
        let (d, h, o) = (self.input_dim, self.hidden_dim, self.output_dim);
        h * d + h + o * h + o
    }

    fn split<'a>(&self, p: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64], &'a [f64]) {
        let (d, h, o) = (self.input_dim, self.hidden_dim, self.output_dim);
        let (w1, rest) = p.split_at(h * d);
        let (b1, rest) = rest.split_at(h);
        let (w2, b2) = rest.split_at(o * h);
        (w1, b1, w2, b2)
    }

    fn check(&self, params: &[f64], x: &[f64]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::shape(format!("{} MLP parameters", self.n_params()), params.len()));
        }
        if x.len() != self.input_dim {
            return Err(Error::shape(format!("input of width {}", self.input_dim), x.len()));
        }
        Ok(())
    }
}

/// `W2 (W1 x + b1) + b2`.
pub fn mlp_forward(cfg: &MlpConfig, params: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    cfg.check(params, x)?;
    let (w1, b1, w2, b2) = cfg.split(params);
    let mut hidden = b1.to_vec();
    matvec_acc(&mut hidden, w1, x);
    let mut out = b2.to_vec();
    matvec_acc(&mut out, w2, &hidden);
    Ok(out)
}

/// Adds `scale * dL/dparams` to `grad` and returns L, the mean squared error
/// over the outputs.
pub fn mlp_loss_grad(cfg: &MlpConfig, params: &[f64], x: &[f64], y: &[f64], scale: f64, grad: &mut [f64]) -> Result<f64> {
    cfg.check(params, x)?;
    if y.len() != cfg.output_dim {
        return Err(Error::shape(format!("{} targets", cfg.output_dim), y.len()));
    }
    let (w1, b1, w2, b2) = cfg.split(params);
    let mut hidden = b1.to_vec();
    matvec_acc(&mut hidden, w1, x);
    let mut out = b2.to_vec();
    matvec_acc(&mut out, w2, &hidden);

    let o = cfg.output_dim as f64;
    let mut loss = 0.0;
    let dout: Vec<f64> = out
        .iter()
        .zip(y)
        .map(|(p, t)| {
            let e = p - t;
            loss += e * e / o;
            scale * 2.0 * e / o
        })
        .collect();

    let (d, h) = (cfg.input_dim, cfg.hidden_dim);
    let (g_w1, rest) = grad.split_at_mut(h * d);
    let (g_b1, rest) = rest.split_at_mut(h);
    let (g_w2, g_b2) = rest.split_at_mut(cfg.output_dim * h);
    outer_acc(g_w2, &dout, &hidden);
    g_b2.iter_mut().zip(&dout).for_each(|(g, v)| *g += v);
    let mut dh = vec![0.0; h];
    matvec_t_acc(&mut dh, w2, &dout);
    outer_acc(g_w1, &dh, x);
    g_b1.iter_mut().zip(&dh).for_each(|(g, v)| *g += v);
    Ok(loss)
}
