//! Shared training plumbing: optimizers, the epoch log, divergence checks and
//! label tensors.

use std::fmt::Write as _;

use candle_core::{backprop::GradStore, DType, Device, Tensor, Var};
use candle_nn::{AdamW, Optimizer, ParamsAdamW};
use glyphtag_core::DatasetManifest;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

/// Adam (no weight decay) over a fixed set of variables.
pub struct Adam {
    inner: AdamW,
}

impl Adam {
    pub fn new(vars: Vec<Var>, lr: f64) -> Result<Self> {
        Self::with_betas(vars, lr, 0.9, 0.999)
    }

    pub fn with_betas(vars: Vec<Var>, lr: f64, beta1: f64, beta2: f64) -> Result<Self> {
        let params = ParamsAdamW {
            lr,
            beta1,
            beta2,
            eps: 1e-8,
            weight_decay: 0.0,
        };
        Ok(Adam {
            inner: AdamW::new(vars, params)?,
        })
    }

    pub fn step(&mut self, grads: &GradStore) -> Result<()> {
        Ok(self.inner.step(grads)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub stage: String,
    pub epoch: usize,
    pub split: String,
    pub loss: f64,
    pub metric: Option<f64>,
}

/// Per-epoch losses; written as CSV `stage,epoch,split,loss,metric`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub rows: Vec<LogRow>,
}

impl TrainLog {
    pub fn push(&mut self, stage: &str, epoch: usize, split: &str, loss: f64, metric: Option<f64>) {
        log::info!("{stage} epoch {epoch} {split} loss {loss:.5}");
        self.rows.push(LogRow {
            stage: stage.to_string(),
            epoch,
            split: split.to_string(),
            loss,
            metric,
        });
    }

    pub fn extend(&mut self, other: TrainLog) {
        self.rows.extend(other.rows);
    }

    pub fn losses(&self, stage: &str, split: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.stage == stage && r.split == split)
            .map(|r| r.loss)
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage,epoch,split,loss,metric\n");
        for r in &self.rows {
            let metric = r.metric.map(|m| format!("{m:.6}")).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{:.6},{}", r.stage, r.epoch, r.split, r.loss, metric);
        }
        out
    }
}

pub fn scalar(t: &Tensor) -> Result<f64> {
    Ok(t.to_dtype(DType::F64)?.to_scalar::<f64>()?)
}

/// Scalar value of a loss, or a divergence error when it is not finite.
pub fn checked(stage: &'static str, step: usize, what: &str, loss: &Tensor) -> Result<f64> {
    let v = scalar(loss)?;
    if !v.is_finite() {
        return Err(ModelError::Divergence {
            stage,
            step,
            what: format!("{what} is {v}"),
        });
    }
    Ok(v)
}

/// `(fonts, N)` 0/1 label matrix in the given font order.
pub fn label_matrix(manifest: &DatasetManifest, fonts: &[String], dtype: DType) -> Result<Tensor> {
    let n = manifest.vocabulary.len();
    let mut data = Vec::with_capacity(fonts.len() * n);
    for id in fonts {
        data.extend(manifest.labels(id)?.bits.iter().map(|&b| b as f32));
    }
    Ok(Tensor::from_vec(data, (fonts.len(), n), &Device::Cpu)?.to_dtype(dtype)?)
}

/// Rows of `matrix` for the given indices.
pub fn gather_rows(matrix: &Tensor, rows: &[usize]) -> Result<Tensor> {
    let idx: Vec<u32> = rows.iter().map(|&r| r as u32).collect();
    let idx = Tensor::from_vec(idx, rows.len(), matrix.device())?;
    Ok(matrix.index_select(&idx, 0)?)
}
