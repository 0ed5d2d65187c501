use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    gru_forward, gru_loss_grad, mlp_forward, mlp_loss_grad, Adam, Architecture, GruConfig, MlpConfig,
    ModelCheckpoint, Standardizer,
};
use crate::error::{Error, Result};
use crate::stats::ccc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Samples whose gradients are averaged into one optimizer step.
    pub samples_per_step: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl TrainConfig {
    /// Labels and dimension summaries.
    pub fn static_task(seed: u64) -> Self {
        TrainConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            samples_per_step: 10,
            max_epochs: 50,
            patience: 5,
            seed,
        }
    }

    /// Time-continuous dimensions.
    pub fn continuous_task(seed: u64) -> Self {
        TrainConfig {
            lr: 1e-4,
            samples_per_step: 1,
            ..Self::static_task(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || self.samples_per_step == 0 || self.max_epochs == 0 || self.patience >= self.max_epochs {
            return Err(Error::ConfigInvalid(format!("invalid training configuration {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    /// None when the validation CCC is undefined.
    pub val_ccc: Option<f64>,
}

/// Pooled input, one target per annotator, and the fused gold value used
/// for validation.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticSample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub gold: f64,
}

/// Row-major `n_frames x D` inputs aligned with a gold trace of `n_frames` values.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousSample {
    pub frames: Vec<f64>,
    pub n_frames: usize,
    pub gold: Vec<f64>,
}

trait Task {
    type Sample;
    fn n_params(&self) -> usize;
    fn loss_grad(&self, params: &[f64], s: &Self::Sample, scale: f64, grad: &mut [f64]) -> Result<f64>;
    /// Appends (prediction, gold) pairs used for validation CCC.
    fn eval(&self, params: &[f64], s: &Self::Sample, pred: &mut Vec<f64>, gold: &mut Vec<f64>) -> Result<()>;
}

impl Task for MlpConfig {
    type Sample = StaticSample;

    fn n_params(&self) -> usize {
        MlpConfig::n_params(self)
    }

    fn loss_grad(&self, params: &[f64], s: &StaticSample, scale: f64, grad: &mut [f64]) -> Result<f64> {
        mlp_loss_grad(self, params, &s.x, &s.y, scale, grad)
    }

    fn eval(&self, params: &[f64], s: &StaticSample, pred: &mut Vec<f64>, gold: &mut Vec<f64>) -> Result<()> {
        let out = mlp_forward(self, params, &s.x)?;
        pred.push(out.iter().sum::<f64>() / out.len() as f64);
        gold.push(s.gold);
        Ok(())
    }
}

impl Task for GruConfig {
    type Sample = ContinuousSample;

    fn n_params(&self) -> usize {
        GruConfig::n_params(self)
    }

    fn loss_grad(&self, params: &[f64], s: &ContinuousSample, scale: f64, grad: &mut [f64]) -> Result<f64> {
        gru_loss_grad(self, params, &s.frames, s.n_frames, &s.gold, scale, grad)
    }

    fn eval(&self, params: &[f64], s: &ContinuousSample, pred: &mut Vec<f64>, gold: &mut Vec<f64>) -> Result<()> {
        pred.extend(gru_forward(self, params, &s.frames, s.n_frames)?);
        gold.extend_from_slice(&s.gold);
        Ok(())
    }
}

struct Fitted {
    params: Vec<f64>,
    log: Vec<EpochLog>,
    best_epoch: usize,
}

fn validation_ccc<T: Task>(task: &T, params: &[f64], val: &[T::Sample]) -> Result<Option<f64>> {
    let (mut pred, mut gold) = (Vec::new(), Vec::new());
    for s in val {
        task.eval(params, s, &mut pred, &mut gold)?;
    }
    if pred.iter().any(|v| !v.is_finite()) {
        return Ok(None);
    }
    Ok(ccc(&pred, &gold).ok().filter(|v| v.is_finite()))
}

/// Adam on shuffled samples; keeps the parameters of the epoch with the best
/// validation CCC and stops after `patience` epochs without improvement.
fn fit<T: Task>(task: &T, mut params: Vec<f64>, train: &[T::Sample], val: &[T::Sample], tcfg: &TrainConfig, rng: &mut ChaCha8Rng) -> Result<Fitted> {
    tcfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::DegenerateInput("training and validation splits must be non-empty"));
    }
    let n = task.n_params();
    let mut adam = Adam::new(n, tcfg.lr, tcfg.beta1, tcfg.beta2, tcfg.eps);
    let mut grad = vec![0.0; n];
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best = (validation_ccc(task, &params, val)?.unwrap_or(f64::NEG_INFINITY), 0usize);
    let mut best_params = params.clone();
    let mut log = Vec::new();
    for epoch in 1..=tcfg.max_epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        for chunk in order.chunks(tcfg.samples_per_step) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / chunk.len() as f64;
            for &i in chunk {
                total += task.loss_grad(&params, &train[i], scale, &mut grad)?;
            }
            if !total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence { epoch });
            }
            adam.step(&mut params, &grad);
        }
        let val_ccc = validation_ccc(task, &params, val)?;
        log.push(EpochLog {
            epoch,
            train_loss: total / train.len() as f64,
            val_ccc,
        });
        if let Some(v) = val_ccc {
            if v > best.0 {
                best = (v, epoch);
                best_params.copy_from_slice(&params);
            }
        }
        if epoch - best.1 >= tcfg.patience {
            break;
        }
    }
    Ok(Fitted {
        params: best_params,
        log,
        best_epoch: best.1,
    })
}

fn standardized_static(samples: &[StaticSample], s: &Standardizer) -> Vec<StaticSample> {
    samples
        .iter()
        .map(|x| {
            let mut c = x.clone();
            s.apply(&mut c.x);
            c
        })
        .collect()
}

fn standardized_continuous(samples: &[ContinuousSample], s: &Standardizer) -> Vec<ContinuousSample> {
    samples
        .iter()
        .map(|x| {
            let mut c = x.clone();
            s.apply(&mut c.frames);
            c
        })
        .collect()
}

/// Trains an MLP on standardized inputs from seeded initial parameters.
pub fn train_static(cfg: MlpConfig, train: &[StaticSample], val: &[StaticSample], tcfg: &TrainConfig) -> Result<ModelCheckpoint> {
    let std = Standardizer::fit(cfg.input_dim, train.iter().map(|s| s.x.as_slice()));
    let mut rng = ChaCha8Rng::seed_from_u64(tcfg.seed);
    let init = cfg.layout().init(&mut rng);
    let (tr, va) = (standardized_static(train, &std), standardized_static(val, &std));
    let f = fit(&cfg, init, &tr, &va, tcfg, &mut rng)?;
    Ok(ModelCheckpoint::from_flat(Architecture::Mlp(cfg), *tcfg, std, &f.params, f.log, f.best_epoch))
}

/// Trains a GRU. Inputs are standardized with `standardizer` when given,
/// otherwise with one fitted on the training frames; `init` overrides the
/// seeded initial parameters.
pub fn train_continuous(
    cfg: GruConfig,
    train: &[ContinuousSample],
    val: &[ContinuousSample],
    tcfg: &TrainConfig,
    standardizer: Option<Standardizer>,
    init: Option<Vec<f64>>,
) -> Result<ModelCheckpoint> {
    let d = cfg.input_dim;
    let std = standardizer.unwrap_or_else(|| Standardizer::fit(d, train.iter().flat_map(|s| s.frames.chunks_exact(d))));
    let mut rng = ChaCha8Rng::seed_from_u64(tcfg.seed);
    let seeded = cfg.layout().init(&mut rng);
    let init = match init {
        Some(p) if p.len() != cfg.n_params() => return Err(Error::shape(format!("{} initial parameters", cfg.n_params()), p.len())),
        Some(p) => p,
        None => seeded,
    };
    let (tr, va) = (standardized_continuous(train, &std), standardized_continuous(val, &std));
    let f = fit(&cfg, init, &tr, &va, tcfg, &mut rng)?;
    Ok(ModelCheckpoint::from_flat(Architecture::Gru(cfg), *tcfg, std, &f.params, f.log, f.best_epoch))
}

/// Per-annotator outputs for one raw (unstandardized) pooled input.
pub fn predict_static(ckpt: &ModelCheckpoint, x: &[f64]) -> Result<Vec<f64>> {
    let Architecture::Mlp(cfg) = ckpt.architecture else {
        return Err(Error::shape("an MLP checkpoint", "a GRU checkpoint"));
    };
    let mut x = x.to_vec();
    if x.len() != cfg.input_dim {
        return Err(Error::shape(format!("input of width {}", cfg.input_dim), x.len()));
    }
    ckpt.standardizer.apply(&mut x);
    mlp_forward(&cfg, &ckpt.flat_params(), &x)
}

/// One output per frame for raw row-major frames.
pub fn predict_continuous(ckpt: &ModelCheckpoint, frames: &[f64], n_frames: usize) -> Result<Vec<f64>> {
    let Architecture::Gru(cfg) = ckpt.architecture else {
        return Err(Error::shape("a GRU checkpoint", "an MLP checkpoint"));
    };
    let mut f = frames.to_vec();
    if f.len() != n_frames * cfg.input_dim {
        return Err(Error::shape(format!("{n_frames} frames of width {}", cfg.input_dim), f.len()));
    }
    ckpt.standardizer.apply(&mut f);
    gru_forward(&cfg, &ckpt.flat_params(), &f, n_frames)
}
