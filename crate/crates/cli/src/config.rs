//! Pipeline configuration: built-in defaults, then a user TOML file, then
//! `--seed`/`--out`, then `--override key=value`, each layer only allowed to
//! set keys the defaults already have.

use std::path::{Path, PathBuf};

use glyphtag_core::affinity::RetrievalConfig;
use glyphtag_core::synth::SynthConfig;
use glyphtag_core::Split;
use glyphtag_model::{AttentionConfig, BackboneConfig, GanConfig, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusKind {
    Standard,
    Imbalanced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    pub n_fonts: usize,
    pub kind: CorpusKind,
    pub min_count: usize,
    pub amt_groups: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub split: Split,
    pub amt_random_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServeConfig {
    pub addr: String,
    pub preview_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub corpus: CorpusConfig,
    pub backbone: BackboneConfig,
    pub gan: GanConfig,
    pub attention: AttentionConfig,
    pub retrieval: RetrievalConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub serve: ServeConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            out: PathBuf::from("runs/default"),
            corpus: CorpusConfig {
                n_fonts: 200,
                kind: CorpusKind::Standard,
                min_count: 10,
                amt_groups: 200,
            },
            backbone: BackboneConfig::default(),
            gan: GanConfig::default(),
            attention: AttentionConfig::default(),
            retrieval: RetrievalConfig::default(),
            train: TrainConfig::default(),
            eval: EvalConfig {
                split: Split::Test,
                amt_random_trials: 10_000,
            },
            serve: ServeConfig {
                addr: "127.0.0.1:8080".into(),
                preview_size: 64,
            },
        }
    }
}

impl PipelineConfig {
    pub fn synth_config(&self) -> SynthConfig {
        let base = match self.corpus.kind {
            CorpusKind::Standard => SynthConfig::standard(self.corpus.n_fonts, self.seed),
            CorpusKind::Imbalanced => SynthConfig::imbalanced(self.corpus.n_fonts, self.seed),
        };
        base.with_min_count(self.corpus.min_count)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |e: glyphtag_model::ModelError| CliError::Config(e.to_string());
        self.backbone.validate().map_err(cfg)?;
        self.gan.validate(self.backbone.image_size).map_err(cfg)?;
        self.attention.validate().map_err(cfg)?;
        self.train.validate().map_err(cfg)?;
        self.retrieval.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.corpus.n_fonts < 10 {
            return Err(CliError::Config("corpus.n_fonts must be at least 10".into()));
        }
        if self.serve.preview_size < glyphtag_core::render::MIN_IMAGE_SIZE
            || self.serve.preview_size > glyphtag_core::render::MAX_IMAGE_SIZE
        {
            return Err(CliError::Config("serve.preview_size is out of range".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// sha256 of the canonical TOML rendering.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_toml()?.as_bytes())))
    }
}

/// Command-line layers on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Layers {
    pub file: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub overrides: Vec<String>,
}

fn merge(base: &mut Table, layer: Table, path: &str) -> Result<()> {
    for (k, v) in layer {
        let key = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
        let Some(slot) = base.get_mut(&k) else {
            return Err(CliError::Config(format!("unknown config key `{key}`")));
        };
        match (slot, v) {
            (Value::Table(b), Value::Table(l)) => merge(b, l, &key)?,
            (Value::Table(_), _) => return Err(CliError::Config(format!("`{key}` must be a table"))),
            (slot, v) => *slot = v,
        }
    }
    Ok(())
}

/// Parses the right-hand side of an override as a TOML value, falling back
/// to a bare string.
fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn apply_override(base: &mut Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{spec}` is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    let mut layer = Table::new();
    let mut cur = &mut layer;
    for p in &parts[..parts.len() - 1] {
        cur = cur
            .entry(p.to_string())
            .or_insert_with(|| Value::Table(Table::new()))
            .as_table_mut()
            .expect("fresh table");
    }
    cur.insert(parts[parts.len() - 1].to_string(), parse_value(raw.trim()));
    merge(base, layer, "")
}

pub fn resolve(layers: &Layers) -> Result<PipelineConfig> {
    let defaults = toml::to_string(&PipelineConfig::default()).expect("defaults serialize");
    let mut table: Table = defaults.parse().expect("defaults parse");
    if let Some(path) = &layers.file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let user: Table = text
            .parse()
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        merge(&mut table, user, "")?;
    }
    if let Some(seed) = layers.seed {
        table.insert("seed".into(), Value::Integer(seed as i64));
    }
    if let Some(out) = &layers.out {
        table.insert("out".into(), Value::String(out.display().to_string()));
    }
    for o in &layers.overrides {
        apply_override(&mut table, o)?;
    }
    let cfg: PipelineConfig = Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_resolved(path: &Path) -> Result<PipelineConfig> {
    resolve(&Layers {
        file: Some(path.to_path_buf()),
        ..Default::default()
    })
}
