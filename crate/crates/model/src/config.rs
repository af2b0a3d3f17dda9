//! Architecture and training hyperparameters. Defaults are the published
//! values where they exist.

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackboneConfig {
    pub image_size: usize,
    /// Channel width per resolution stage; each stage halves the resolution.
    pub widths: Vec<usize>,
    pub feature_dim: usize,
    /// Multiplier on the residual branch.
    pub residual_scale: f64,
}

impl Default for BackboneConfig {
    fn default() -> Self {
        BackboneConfig {
            image_size: 128,
            widths: vec![32, 64, 128],
            feature_dim: 256,
            residual_scale: 0.2,
        }
    }
}

impl BackboneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 {
            return Err(ModelError::Config("feature_dim must be positive".into()));
        }
        if self.widths.is_empty() || self.widths.contains(&0) {
            return Err(ModelError::Config("backbone widths must be nonempty and positive".into()));
        }
        let down = 1usize << self.widths.len();
        if self.image_size < down || !self.image_size.is_multiple_of(down) {
            return Err(ModelError::Config(format!(
                "image_size {} is not divisible by 2^{} backbone stages",
                self.image_size,
                self.widths.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GanConfig {
    pub lambda_l1: f64,
    pub beta: f64,
    pub patch_grid: usize,
    pub dropout_rate: f64,
    /// Generator encoder width at full resolution; doubles per level.
    pub gen_base: usize,
    pub gen_max: usize,
    pub disc_base: usize,
    pub disc_max: usize,
}

impl Default for GanConfig {
    fn default() -> Self {
        GanConfig {
            lambda_l1: 10.0,
            beta: 0.04,
            patch_grid: 14,
            dropout_rate: 0.5,
            gen_base: 16,
            gen_max: 128,
            disc_base: 32,
            disc_max: 128,
        }
    }
}

impl GanConfig {
    pub fn validate(&self, image_size: usize) -> Result<()> {
        if self.lambda_l1 < 0.0 || self.beta < 0.0 {
            return Err(ModelError::Config("lambda_l1 and beta must be non-negative".into()));
        }
        if self.patch_grid == 0 {
            return Err(ModelError::Config("patch_grid must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(ModelError::Config("dropout_rate must be in [0, 1)".into()));
        }
        let ratio = image_size / (self.patch_grid + 2);
        if ratio == 0 || !image_size.is_multiple_of(self.patch_grid + 2) || !ratio.is_power_of_two() {
            return Err(ModelError::Config(format!(
                "image_size {image_size} / (patch_grid {} + 2) must be a power of two",
                self.patch_grid
            )));
        }
        if image_size < 8 || !image_size.is_power_of_two() {
            return Err(ModelError::Config(format!(
                "generator needs a power-of-two image size of at least 8, got {image_size}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttentionConfig {
    pub j: usize,
    pub init_mu: f64,
    pub init_sigma: f64,
}

impl Default for AttentionConfig {
    fn default() -> Self {
        AttentionConfig {
            j: 4,
            init_mu: 0.0,
            init_sigma: 5.0,
        }
    }
}

impl AttentionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.j == 0 {
            return Err(ModelError::Config("J must be at least 1".into()));
        }
        if self.init_sigma < 0.0 {
            return Err(ModelError::Config("init_sigma must be non-negative".into()));
        }
        Ok(())
    }
}

/// Learning rates, batch size and epoch budgets for every stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr_cnn: f64,
    pub lr_gan: f64,
    pub lr_fc: f64,
    pub lr_head: f64,
    /// Global multiplier applied to every learning rate.
    pub lr_scale: f64,
    /// Glyph samples drawn per training font in one epoch.
    pub glyphs_per_font: usize,
    pub stage1_epochs: usize,
    pub classifier_epochs: usize,
    pub classifier_patience: usize,
    pub phase_a_max_epochs: usize,
    /// Phase A stops once the smoothed L1 improves by less than this
    /// fraction for `phase_a_patience` consecutive epochs.
    pub phase_a_min_improvement: f64,
    pub phase_a_patience: usize,
    pub phase_b_epochs: usize,
    pub stage3_epochs: usize,
    pub stage4_steps: usize,
    /// Triplets per stage-4 step.
    pub stage4_batch: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 20,
            lr_cnn: 5e-4,
            lr_gan: 2e-3,
            lr_fc: 5e-3,
            lr_head: 5e-3,
            lr_scale: 1.0,
            glyphs_per_font: 8,
            stage1_epochs: 30,
            classifier_epochs: 30,
            classifier_patience: 5,
            phase_a_max_epochs: 30,
            phase_a_min_improvement: 0.01,
            phase_a_patience: 3,
            phase_b_epochs: 5,
            stage3_epochs: 30,
            stage4_steps: 2000,
            stage4_batch: 20,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.glyphs_per_font == 0 || self.stage4_batch == 0 {
            return Err(ModelError::Config("batch sizes and glyphs_per_font must be positive".into()));
        }
        for (name, lr) in [
            ("lr_cnn", self.lr_cnn),
            ("lr_gan", self.lr_gan),
            ("lr_fc", self.lr_fc),
            ("lr_head", self.lr_head),
            ("lr_scale", self.lr_scale),
        ] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(ModelError::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    pub fn cnn(&self) -> f64 {
        self.lr_cnn * self.lr_scale
    }

    pub fn gan(&self) -> f64 {
        self.lr_gan * self.lr_scale
    }

    pub fn fc(&self) -> f64 {
        self.lr_fc * self.lr_scale
    }

    pub fn head(&self) -> f64 {
        self.lr_head * self.lr_scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        BackboneConfig::default().validate().unwrap();
        GanConfig::default().validate(128).unwrap();
        AttentionConfig::default().validate().unwrap();
        TrainConfig::default().validate().unwrap();
    }

    #[test]
    fn patch_grid_must_tile_the_image() {
        let g = GanConfig::default();
        assert!(g.validate(32).is_ok());
        assert!(g.validate(64).is_ok());
        assert!(g.validate(48).is_err());
        let toy = GanConfig {
            patch_grid: 2,
            ..GanConfig::default()
        };
        assert!(toy.validate(8).is_ok());
    }
}
