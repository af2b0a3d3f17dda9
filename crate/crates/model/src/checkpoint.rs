//! Cumulative checkpoints. Every stage writes the whole parameter store plus
//! a metadata record; later stages only add parameter groups.

use std::path::Path;

use candle_core::DType;
use glyphtag_core::affinity::RetrievalConfig;
use glyphtag_core::DatasetManifest;
use serde::{Deserialize, Serialize};

use crate::attention::AttentionModule;
use crate::config::{AttentionConfig, BackboneConfig, GanConfig};
use crate::error::{ModelError, Result};
use crate::gan::{Discriminator, Generator};
use crate::params::ParamStore;
use crate::recognizer::{FontClassifier, Recognizer};
use crate::retrieval::RetrievalHead;

pub const FORMAT: &str = "glyphtag-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format: String,
    pub version: u32,
    /// Last completed training stage, 1 to 4.
    pub stage: u8,
    pub vocab_hash: String,
    pub n_tags: usize,
    /// Font-classifier class order.
    pub train_fonts: Vec<String>,
    pub seed: u64,
    pub backbone: BackboneConfig,
    pub gan: Option<GanConfig>,
    pub attention: Option<AttentionConfig>,
    pub retrieval: Option<RetrievalConfig>,
}

impl CheckpointMeta {
    pub fn new(manifest: &DatasetManifest, backbone: &BackboneConfig, seed: u64) -> Self {
        CheckpointMeta {
            format: FORMAT.into(),
            version: VERSION,
            stage: 1,
            vocab_hash: manifest.vocabulary.hash(),
            n_tags: manifest.vocabulary.len(),
            train_fonts: manifest.split(glyphtag_core::Split::Train).to_vec(),
            seed,
            backbone: backbone.clone(),
            gan: None,
            attention: None,
            retrieval: None,
        }
    }
}

pub fn save(path: &Path, store: &ParamStore, meta: &CheckpointMeta) -> Result<()> {
    store.save(path, meta)
}

/// Loads a checkpoint and refuses it when it was trained on another
/// vocabulary.
pub fn load(path: &Path, manifest: &DatasetManifest, dtype: DType) -> Result<(ParamStore, CheckpointMeta)> {
    let (store, meta): (ParamStore, CheckpointMeta) = ParamStore::load(path, dtype, 0)?;
    if meta.format != FORMAT || meta.version != VERSION {
        return Err(ModelError::Checkpoint {
            path: path.to_path_buf(),
            message: format!(
                "unsupported checkpoint {} v{} (expected {FORMAT} v{VERSION})",
                meta.format, meta.version
            ),
        });
    }
    let expected = manifest.vocabulary.hash();
    if meta.vocab_hash != expected {
        return Err(ModelError::VocabularyMismatch {
            expected,
            found: meta.vocab_hash,
        });
    }
    Ok((store, meta))
}

/// Models rebuilt over a loaded store, as far as the checkpoint's stage
/// provides them.
pub struct Models {
    pub meta: CheckpointMeta,
    pub recognizer: Recognizer,
    pub generator: Option<Generator>,
    pub discriminator: Option<Discriminator>,
    pub classifier: Option<FontClassifier>,
    pub attention: Option<AttentionModule>,
    pub retrieval: Option<RetrievalHead>,
}

fn require(store: &ParamStore, prefix: &str, stage: u8) -> Result<()> {
    if store.vars_with_prefix(&format!("{prefix}.")).is_empty() {
        return Err(ModelError::MissingParam(format!(
            "stage {stage} checkpoint has no `{prefix}` parameters"
        )));
    }
    Ok(())
}

impl Models {
    /// Rebuilds every model present in `store`. Parameters are reused, never
    /// re-initialized: missing groups are an error.
    pub fn from_store(store: &mut ParamStore, meta: CheckpointMeta) -> Result<Self> {
        use crate::{attention::ATTENTION, gan, recognizer, retrieval};
        require(store, recognizer::BACKBONE, meta.stage)?;
        require(store, recognizer::TAG_HEAD, meta.stage)?;
        let before = store.len();
        let recognizer = Recognizer::new(store, &meta.backbone, meta.n_tags)?;
        let (generator, discriminator) = match (&meta.gan, meta.stage >= 2) {
            (Some(g), true) => {
                require(store, gan::GEN, meta.stage)?;
                require(store, gan::DISC, meta.stage)?;
                (
                    Some(Generator::new(store, g, meta.backbone.image_size, meta.backbone.feature_dim)?),
                    Some(Discriminator::new(store, g, meta.backbone.image_size)?),
                )
            }
            _ => (None, None),
        };
        let (classifier, attention) = match (&meta.attention, meta.stage >= 3) {
            (Some(a), true) => {
                require(store, recognizer::FONT_CLS, meta.stage)?;
                require(store, ATTENTION, meta.stage)?;
                let m = meta.train_fonts.len();
                (
                    Some(FontClassifier::new(store, &meta.backbone, m)?),
                    Some(AttentionModule::new(store, m, meta.backbone.feature_dim, a)?),
                )
            }
            _ => (None, None),
        };
        let retrieval = match (&meta.retrieval, meta.stage >= 4) {
            (Some(r), true) => {
                require(store, retrieval::RETRIEVAL, meta.stage)?;
                Some(RetrievalHead::new(store, meta.n_tags, r, meta.seed)?)
            }
            _ => None,
        };
        if store.len() != before {
            return Err(ModelError::MissingParam(format!(
                "checkpoint lacks {} parameters its configuration needs",
                store.len() - before
            )));
        }
        Ok(Models {
            meta,
            recognizer,
            generator,
            discriminator,
            classifier,
            attention,
            retrieval,
        })
    }
}
