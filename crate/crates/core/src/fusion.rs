//! Decision-level fusion of unimodal predictions: OLS for static targets and
//! a small GRU with a linear skip for time-continuous targets.
//!
//! Every prediction block carries the split it came from. Fitting refuses
//! blocks tagged [`Split::Test`], so test targets cannot reach fusion weights.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{predict_continuous, train_continuous, ContinuousSample, GruConfig, ModelCheckpoint, Standardizer, TrainConfig};
use crate::stats::{ols_fit, OlsFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    /// Out-of-fold predictions on training subjects.
    Validation,
    Test,
}

/// Data tagged with the split it was computed on.
#[derive(Debug, Clone, PartialEq)]
pub struct Tagged<T> {
    pub split: Split,
    pub data: T,
}

impl<T> Tagged<T> {
    pub fn new(split: Split, data: T) -> Self {
        Tagged { split, data }
    }
}

fn require_fit_split(split: Split, what: &str) -> Result<()> {
    if split == Split::Test {
        return Err(Error::ProvenanceViolation(format!("fusion fit received test-split {what}")));
    }
    Ok(())
}

/// Hidden width of the continuous fusion GRU.
pub const FUSION_HIDDEN: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FusionModel {
    Static { ols: OlsFit },
    Continuous { checkpoint: Box<ModelCheckpoint> },
}

impl FusionModel {
    pub fn arity(&self) -> usize {
        match self {
            FusionModel::Static { ols } => ols.weights.len(),
            FusionModel::Continuous { checkpoint } => checkpoint.architecture.input_dim(),
        }
    }
}

/// OLS with intercept from per-sequence unimodal predictions (rows) to the
/// gold value.
pub fn fit_static_fusion(preds: &Tagged<Vec<Vec<f64>>>, targets: &Tagged<Vec<f64>>) -> Result<FusionModel> {
    require_fit_split(preds.split, "predictions")?;
    require_fit_split(targets.split, "targets")?;
    let ols = ols_fit(&preds.data, &targets.data, true)?;
    if ols.ill_conditioned {
        log::warn!("static fusion fell back to ridge: unimodal predictions are collinear");
    }
    Ok(FusionModel::Static { ols })
}

/// Frame-level OLS initialization followed by GRU training. The GRU head
/// starts at zero, so the initial model is exactly the OLS combination.
pub fn fit_continuous_fusion(
    train: &Tagged<Vec<ContinuousSample>>,
    val: &Tagged<Vec<ContinuousSample>>,
    tcfg: &TrainConfig,
) -> Result<FusionModel> {
    require_fit_split(train.split, "training traces")?;
    require_fit_split(val.split, "validation traces")?;
    let m = train
        .data
        .first()
        .map(|s| s.frames.len() / s.n_frames.max(1))
        .ok_or(Error::DegenerateInput("continuous fusion needs training sequences"))?;
    let cfg = GruConfig {
        input_dim: m,
        hidden_dim: FUSION_HIDDEN,
        layers: 1,
        input_skip: true,
    };
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for s in &train.data {
        if s.frames.len() != s.n_frames * m || s.gold.len() != s.n_frames {
            return Err(Error::shape(format!("aligned traces of {m} streams"), "misaligned traces"));
        }
        rows.extend(s.frames.chunks_exact(m).map(|r| r.to_vec()));
        y.extend_from_slice(&s.gold);
    }
    let ols = ols_fit(&rows, &y, true)?;
    let layout = cfg.layout();
    let mut init = layout.init(&mut ChaCha8Rng::seed_from_u64(tcfg.seed));
    let head = layout.offset("head.w").expect("head present");
    init[head..head + FUSION_HIDDEN].iter_mut().for_each(|v| *v = 0.0);
    init[head + FUSION_HIDDEN] = ols.intercept.unwrap_or(0.0);
    let skip = layout.offset("skip.w").expect("skip present");
    init[skip..skip + m].copy_from_slice(&ols.weights);
    let ck = train_continuous(cfg, &train.data, &val.data, tcfg, Some(Standardizer::identity(m)), Some(init))?;
    Ok(FusionModel::Continuous { checkpoint: Box::new(ck) })
}

/// Fused value for one row of static unimodal predictions.
pub fn apply_static_fusion(model: &FusionModel, row: &[f64]) -> Result<f64> {
    match model {
        FusionModel::Static { ols } if ols.weights.len() == row.len() => Ok(ols.predict(row)),
        FusionModel::Static { ols } => Err(Error::shape(format!("{} predictions", ols.weights.len()), row.len())),
        FusionModel::Continuous { .. } => Err(Error::shape("a static fusion model", "a continuous one")),
    }
}

/// Fused trace for row-major `n_frames x M` unimodal prediction traces.
pub fn apply_continuous_fusion(model: &FusionModel, frames: &[f64], n_frames: usize) -> Result<Vec<f64>> {
    match model {
        FusionModel::Continuous { checkpoint } => predict_continuous(checkpoint, frames, n_frames),
        FusionModel::Static { .. } => Err(Error::shape("a continuous fusion model", "a static one")),
    }
}
