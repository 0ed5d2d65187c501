use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EpochLog, GruConfig, Layout, MlpConfig, TrainConfig};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "affect-eval-checkpoint/v1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Architecture {
    Mlp(MlpConfig),
    Gru(GruConfig),
}

impl Architecture {
    pub fn layout(&self) -> Layout {
        match self {
            Architecture::Mlp(c) => c.layout(),
            Architecture::Gru(c) => c.layout(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Architecture::Mlp(c) => c.input_dim,
            Architecture::Gru(c) => c.input_dim,
        }
    }
}

/// Per-feature affine standardization fitted on training inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Divisor per feature; 1 where the training sd was 0.
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Standardizer {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    /// Population mean and sd over the given rows.
    pub fn fit<'a>(dim: usize, rows: impl Iterator<Item = &'a [f64]>) -> Self {
        let mut n = 0usize;
        let mut sum = vec![0.0; dim];
        let mut sq = vec![0.0; dim];
        for r in rows {
            n += 1;
            for j in 0..dim {
                sum[j] += r[j];
                sq[j] += r[j] * r[j];
            }
        }
        if n == 0 {
            return Standardizer::identity(dim);
        }
        let nf = n as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / nf).collect();
        let scale = (0..dim)
            .map(|j| {
                let var = (sq[j] / nf - mean[j] * mean[j]).max(0.0);
                if var > 1e-24 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    /// Standardizes a row-major block of rows of width `mean.len()`.
    pub fn apply(&self, data: &mut [f64]) {
        let d = self.mean.len();
        for row in data.chunks_exact_mut(d) {
            for j in 0..d {
                row[j] = (row[j] - self.mean[j]) / self.scale[j];
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub format: String,
    pub architecture: Architecture,
    pub train_config: TrainConfig,
    pub standardizer: Standardizer,
    pub tensors: Vec<NamedTensor>,
    pub log: Vec<EpochLog>,
    /// Epoch whose parameters are stored; 0 means the initial parameters.
    pub best_epoch: usize,
    /// Free-form description such as task, modality and feature kind.
    #[serde(default)]
    pub tags: BTreeMap<String, String>,
}

impl ModelCheckpoint {
    pub fn from_flat(
        architecture: Architecture,
        train_config: TrainConfig,
        standardizer: Standardizer,
        params: &[f64],
        log: Vec<EpochLog>,
        best_epoch: usize,
    ) -> Self {
        let mut off = 0;
        let tensors = architecture
            .layout()
            .tensors
            .into_iter()
            .map(|t| {
                let n = t.len();
                let values = params[off..off + n].to_vec();
                off += n;
                NamedTensor {
                    name: t.name,
                    shape: t.shape,
                    values,
                }
            })
            .collect();
        ModelCheckpoint {
            format: CHECKPOINT_FORMAT.into(),
            architecture,
            train_config,
            standardizer,
            tensors,
            log,
            best_epoch,
            tags: BTreeMap::new(),
        }
    }

    /// A checkpoint whose parameters are all zero.
    pub fn zeroed(architecture: Architecture, train_config: TrainConfig) -> Self {
        let n = architecture.layout().n_params();
        let d = architecture.input_dim();
        Self::from_flat(architecture, train_config, Standardizer::identity(d), &vec![0.0; n], Vec::new(), 0)
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.tensors.iter().flat_map(|t| t.values.iter().copied()).collect()
    }

    pub fn tensor(&self, name: &str) -> Option<&NamedTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses and checks the format tag, tensor names, shapes and finiteness.
    pub fn from_json(text: &str) -> Result<Self> {
        let c: ModelCheckpoint = serde_json::from_str(text)?;
        if c.format != CHECKPOINT_FORMAT {
            return Err(Error::schema("checkpoint", None, "format", format!("unsupported `{}`", c.format)));
        }
        let layout = c.architecture.layout();
        if layout.tensors.len() != c.tensors.len() {
            return Err(Error::schema("checkpoint", None, "tensors", "tensor count does not match the architecture"));
        }
        for (spec, t) in layout.tensors.iter().zip(&c.tensors) {
            if spec.name != t.name || spec.shape != t.shape || t.values.len() != spec.len() {
                return Err(Error::schema("checkpoint", None, t.name.clone(), "name or shape does not match the architecture"));
            }
            if t.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::schema("checkpoint", None, t.name.clone(), "non-finite parameter"));
            }
        }
        Ok(c)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardizer_centres_and_scales() {
        let rows = [vec![1.0, 5.0], vec![3.0, 5.0]];
        let s = Standardizer::fit(2, rows.iter().map(|r| r.as_slice()));
        assert_eq!(s.mean, vec![2.0, 5.0]);
        assert_eq!(s.scale, vec![1.0, 1.0]);
        let mut x = vec![3.0, 7.0];
        s.apply(&mut x);
        assert_eq!(x, vec![1.0, 2.0]);
    }

    #[test]
    fn json_round_trip_and_format_check() {
        let arch = Architecture::Mlp(MlpConfig::new(4, 6));
        let mut c = ModelCheckpoint::zeroed(arch, TrainConfig::static_task(1));
        c.tensors[0].values[0] = 0.125;
        let back = ModelCheckpoint::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
        let bad = c.to_json().unwrap().replace(CHECKPOINT_FORMAT, "other/v9");
        assert!(matches!(ModelCheckpoint::from_json(&bad), Err(Error::SchemaViolation { .. })));
    }
}
