use serde::{Deserialize, Serialize};

use super::{matvec_acc, matvec_t_acc, outer_acc, sigmoid, Layout};
use crate::corpus::FeatureKind;
use crate::error::{Error, Result};

/// Hidden width used for expert features.
pub const EXPERT_HIDDEN: usize = 256;

/// Stacked GRU with a per-frame linear head producing one value per frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GruConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub layers: usize,
    /// Adds a linear map from the raw inputs to the output.
    #[serde(default)]
    pub input_skip: bool,
}

impl GruConfig {
    /// Three layers; hidden width D for deep features, 256 for expert ones.
    pub fn for_features(input_dim: usize, kind: FeatureKind) -> Self {
        GruConfig {
            input_dim,
            hidden_dim: match kind {
                FeatureKind::Deep => input_dim,
                FeatureKind::Expert => EXPERT_HIDDEN,
            },
            layers: 3,
            input_skip: false,
        }
    }

    fn layer_in(&self, l: usize) -> usize {
        if l == 0 {
            self.input_dim
        } else {
            self.hidden_dim
        }
    }

    /// Per layer `l`: `l{l}.w` (3H x in), `l{l}.u` (3H x H), `l{l}.b` (3H),
    /// gate rows ordered update, reset, candidate. Then `head.w` (H),
    /// `head.b` (1) and, with `input_skip`, `skip.w` (D).
    pub fn layout(&self) -> Layout {
        let h = self.hidden_dim;
        let mut l = Layout::default();
        for layer in 0..self.layers {
            let inp = self.layer_in(layer);
            l.push(format!("l{layer}.w"), vec![3 * h, inp], h);
            l.push(format!("l{layer}.u"), vec![3 * h, h], h);
            l.push(format!("l{layer}.b"), vec![3 * h], h);
        }
        l.push("head.w", vec![h], h);
        l.push("head.b", vec![1], h);
        if self.input_skip {
            l.push("skip.w", vec![self.input_dim], self.input_dim);
        }
        l
    }

    pub fn n_params(&self) -> usize {
        let h = self.hidden_dim;
        let mut n = 0;
        for layer in 0..self.layers {
            n += 3 * h * (self.layer_in(layer) + h + 1);
        }
        n + h + 1 + if self.input_skip { self.input_dim } else { 0 }
    }

    fn layer_offsets(&self) -> Vec<(usize, usize, usize)> {
        let h = self.hidden_dim;
        let mut off = 0;
        (0..self.layers)
            .map(|layer| {
                let inp = self.layer_in(layer);
                let w = off;
                let u = w + 3 * h * inp;
                let b = u + 3 * h * h;
                off = b + 3 * h;
                (w, u, b)
            })
            .collect()
    }

    fn head_offset(&self) -> usize {
        self.layer_offsets().last().map_or(0, |(_, _, b)| b + 3 * self.hidden_dim)
    }

    fn check(&self, params: &[f64], frames: &[f64], t: usize) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::shape(format!("{} GRU parameters", self.n_params()), params.len()));
        }
        if t == 0 || frames.len() != t * self.input_dim {
            return Err(Error::shape(format!("{t} frames of width {}", self.input_dim), frames.len()));
        }
        if self.layers == 0 || self.hidden_dim == 0 {
            return Err(Error::ConfigInvalid("GRU needs at least one layer and one hidden unit".into()));
        }
        Ok(())
    }
}

/// Activations of one layer over time, kept for backpropagation.
struct LayerTrace {
    /// (T + 1) x H, row 0 is the zero initial state.
    h: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    n: Vec<f64>,
}

fn run_layer(params: &[f64], (w, u, b): (usize, usize, usize), h: usize, inp: usize, xs: &[f64], t_len: usize) -> LayerTrace {
    let wm = &params[w..w + 3 * h * inp];
    let um = &params[u..u + 3 * h * h];
    let bv = &params[b..b + 3 * h];
    let mut tr = LayerTrace {
        h: vec![0.0; (t_len + 1) * h],
        z: vec![0.0; t_len * h],
        r: vec![0.0; t_len * h],
        n: vec![0.0; t_len * h],
    };
    let mut ax = vec![0.0; 3 * h];
    let mut ah = vec![0.0; 2 * h];
    let mut rh = vec![0.0; h];
    let mut an = vec![0.0; h];
    for t in 0..t_len {
        let x = &xs[t * inp..(t + 1) * inp];
        let (before, after) = tr.h.split_at_mut((t + 1) * h);
        let hp = &before[t * h..];
        let hn = &mut after[..h];
        ax.copy_from_slice(bv);
        matvec_acc(&mut ax, wm, x);
        ah.iter_mut().for_each(|v| *v = 0.0);
        matvec_acc(&mut ah, &um[..2 * h * h], hp);
        for j in 0..h {
            let z = sigmoid(ax[j] + ah[j]);
            let r = sigmoid(ax[h + j] + ah[h + j]);
            tr.z[t * h + j] = z;
            tr.r[t * h + j] = r;
            rh[j] = r * hp[j];
        }
        an.copy_from_slice(&ax[2 * h..]);
        matvec_acc(&mut an, &um[2 * h * h..], &rh);
        for j in 0..h {
            let n = an[j].tanh();
            let z = tr.z[t * h + j];
            tr.n[t * h + j] = n;
            hn[j] = (1.0 - z) * hp[j] + z * n;
        }
    }
    tr
}

fn run_all(cfg: &GruConfig, params: &[f64], frames: &[f64], t_len: usize) -> (Vec<LayerTrace>, Vec<f64>) {
    let h = cfg.hidden_dim;
    let mut traces: Vec<LayerTrace> = Vec::with_capacity(cfg.layers);
    for (l, offs) in cfg.layer_offsets().into_iter().enumerate() {
        let tr = {
            let xs: &[f64] = if l == 0 { frames } else { &traces[l - 1].h[h..] };
            run_layer(params, offs, h, cfg.layer_in(l), xs, t_len)
        };
        traces.push(tr);
    }
    let ho = cfg.head_offset();
    let hw = &params[ho..ho + h];
    let hb = params[ho + h];
    let top = &traces.last().expect("layers > 0").h;
    let out = (0..t_len)
        .map(|t| {
            let mut y = hb + hw.iter().zip(&top[(t + 1) * h..(t + 2) * h]).map(|(a, b)| a * b).sum::<f64>();
            if cfg.input_skip {
                let sw = &params[ho + h + 1..ho + h + 1 + cfg.input_dim];
                y += sw.iter().zip(&frames[t * cfg.input_dim..(t + 1) * cfg.input_dim]).map(|(a, b)| a * b).sum::<f64>();
            }
            y
        })
        .collect();
    (traces, out)
}

/// One output per frame for a row-major `t x input_dim` frame matrix.
pub fn gru_forward(cfg: &GruConfig, params: &[f64], frames: &[f64], t: usize) -> Result<Vec<f64>> {
    cfg.check(params, frames, t)?;
    Ok(run_all(cfg, params, frames, t).1)
}

/// Final hidden states of every layer over time, `layers x (T x H)`.
pub fn gru_hidden_states(cfg: &GruConfig, params: &[f64], frames: &[f64], t: usize) -> Result<Vec<Vec<f64>>> {
    cfg.check(params, frames, t)?;
    let h = cfg.hidden_dim;
    Ok(run_all(cfg, params, frames, t).0.into_iter().map(|tr| tr.h[h..].to_vec()).collect())
}

/// Adds `scale * dL/dparams` to `grad` by backpropagation through time and
/// returns L, the mean squared error over frames.
pub fn gru_loss_grad(
    cfg: &GruConfig,
    params: &[f64],
    frames: &[f64],
    t_len: usize,
    y: &[f64],
    scale: f64,
    grad: &mut [f64],
) -> Result<f64> {
    cfg.check(params, frames, t_len)?;
    if y.len() != t_len {
        return Err(Error::shape(format!("{t_len} targets"), y.len()));
    }
    let h = cfg.hidden_dim;
    let (traces, out) = run_all(cfg, params, frames, t_len);
    let tf = t_len as f64;
    let mut loss = 0.0;
    let dout: Vec<f64> = out
        .iter()
        .zip(y)
        .map(|(p, t)| {
            let e = p - t;
            loss += e * e / tf;
            scale * 2.0 * e / tf
        })
        .collect();

    // Head and skip.
    let ho = cfg.head_offset();
    let top = &traces.last().expect("layers > 0").h;
    let mut dh_layer = vec![0.0; t_len * h];
    for t in 0..t_len {
        let d = dout[t];
        grad[ho + h] += d;
        for j in 0..h {
            grad[ho + j] += d * top[(t + 1) * h + j];
            dh_layer[t * h + j] = d * params[ho + j];
        }
        if cfg.input_skip {
            let dd = cfg.input_dim;
            for j in 0..dd {
                grad[ho + h + 1 + j] += d * frames[t * dd + j];
            }
        }
    }

    let offsets = cfg.layer_offsets();
    let mut dh_next = vec![0.0; h];
    let mut dh = vec![0.0; h];
    let mut da = vec![0.0; 3 * h];
    let mut drh = vec![0.0; h];
    let mut rh = vec![0.0; h];
    for l in (0..cfg.layers).rev() {
        let (w, u, b) = offsets[l];
        let inp = cfg.layer_in(l);
        let tr = &traces[l];
        let xs: &[f64] = if l == 0 { frames } else { &traces[l - 1].h[h..] };
        let mut dx = if l > 0 { vec![0.0; t_len * inp] } else { Vec::new() };
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        for t in (0..t_len).rev() {
            let hp = &tr.h[t * h..(t + 1) * h];
            let x = &xs[t * inp..(t + 1) * inp];
            for j in 0..h {
                dh[j] = dh_layer[t * h + j] + dh_next[j];
            }
            // Candidate and update gate pre-activations.
            for j in 0..h {
                let (z, r, n) = (tr.z[t * h + j], tr.r[t * h + j], tr.n[t * h + j]);
                da[2 * h + j] = dh[j] * z * (1.0 - n * n);
                da[j] = dh[j] * (n - hp[j]) * z * (1.0 - z);
                dh_next[j] = dh[j] * (1.0 - z);
                rh[j] = r * hp[j];
            }
            let un = &params[u + 2 * h * h..u + 3 * h * h];
            drh.iter_mut().for_each(|v| *v = 0.0);
            matvec_t_acc(&mut drh, un, &da[2 * h..]);
            outer_acc(&mut grad[u + 2 * h * h..u + 3 * h * h], &da[2 * h..], &rh);
            for j in 0..h {
                let r = tr.r[t * h + j];
                da[h + j] = drh[j] * hp[j] * r * (1.0 - r);
                dh_next[j] += drh[j] * r;
            }
            matvec_t_acc(&mut dh_next, &params[u..u + 2 * h * h], &da[..2 * h]);
            outer_acc(&mut grad[u..u + 2 * h * h], &da[..2 * h], hp);
            outer_acc(&mut grad[w..w + 3 * h * inp], &da, x);
            for (g, v) in grad[b..b + 3 * h].iter_mut().zip(&da) {
                *g += v;
            }
            if l > 0 {
                matvec_t_acc(&mut dx[t * inp..(t + 1) * inp], &params[w..w + 3 * h * inp], &da);
            }
        }
        if l > 0 {
            dh_layer = dx;
        }
    }
    Ok(loss)
}
