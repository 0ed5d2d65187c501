//! Small regressors written from scratch: an MLP for static targets and a
//! stacked GRU for time-continuous targets, trained with Adam on MSE.
//!
//! Parameters live in one flat `Vec<f64>` per model. A [`Layout`] names the
//! tensors and fixes their order inside that vector.

pub mod adam;
pub mod checkpoint;
pub mod gru;
pub mod mlp;
pub mod train;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use adam::Adam;
pub use checkpoint::{Architecture, ModelCheckpoint, NamedTensor, Standardizer, CHECKPOINT_FORMAT};
pub use gru::{gru_forward, gru_loss_grad, GruConfig};
pub use mlp::{mlp_forward, mlp_loss_grad, MlpConfig};
pub use train::{
    predict_continuous, predict_static, train_continuous, train_static, ContinuousSample, EpochLog,
    StaticSample, TrainConfig,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    /// Initial values are drawn from uniform(-bound, bound).
    pub init_bound: f64,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Layout {
    pub tensors: Vec<TensorSpec>,
}

impl Layout {
    pub fn push(&mut self, name: impl Into<String>, shape: Vec<usize>, fan_in: usize) {
        self.tensors.push(TensorSpec {
            name: name.into(),
            shape,
            init_bound: (1.0 / fan_in.max(1) as f64).sqrt(),
        });
    }

    pub fn n_params(&self) -> usize {
        self.tensors.iter().map(TensorSpec::len).sum()
    }

    pub fn init(&self, rng: &mut impl Rng) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for t in &self.tensors {
            for _ in 0..t.len() {
                out.push(if t.init_bound > 0.0 {
                    rng.random_range(-t.init_bound..t.init_bound)
                } else {
                    0.0
                });
            }
        }
        out
    }

    /// Offset of the named tensor in the flat vector.
    pub fn offset(&self, name: &str) -> Option<usize> {
        let mut off = 0;
        for t in &self.tensors {
            if t.name == name {
                return Some(off);
            }
            off += t.len();
        }
        None
    }
}

/// `out += M x` for a row-major `rows x cols` matrix.
#[inline]
pub(crate) fn matvec_acc(out: &mut [f64], m: &[f64], x: &[f64]) {
    let cols = x.len();
    for (o, row) in out.iter_mut().zip(m.chunks_exact(cols)) {
        let mut s = 0.0;
        for (a, b) in row.iter().zip(x) {
            s += a * b;
        }
        *o += s;
    }
}

/// `out += Mᵀ v` for a row-major `rows x cols` matrix.
#[inline]
pub(crate) fn matvec_t_acc(out: &mut [f64], m: &[f64], v: &[f64]) {
    let cols = out.len();
    for (vi, row) in v.iter().zip(m.chunks_exact(cols)) {
        if *vi != 0.0 {
            for (o, a) in out.iter_mut().zip(row) {
                *o += vi * a;
            }
        }
    }
}

/// `G += v xᵀ` for a row-major `rows x cols` gradient.
#[inline]
pub(crate) fn outer_acc(g: &mut [f64], v: &[f64], x: &[f64]) {
    let cols = x.len();
    for (vi, row) in v.iter().zip(g.chunks_exact_mut(cols)) {
        if *vi != 0.0 {
            for (gj, xj) in row.iter_mut().zip(x) {
                *gj += vi * xj;
            }
        }
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
