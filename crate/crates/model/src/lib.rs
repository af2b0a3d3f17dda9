//! Trainable parts of the font retrieval system: tag recognizer, glyph GAN,
//! attention module and retrieval head, with a cumulative checkpoint format.

pub mod attention;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod gan;
pub mod layers;
pub mod params;
pub mod recognizer;
pub mod retrieval;
pub mod tables;
pub mod train;

pub use config::{AttentionConfig, BackboneConfig, GanConfig, TrainConfig};
pub use error::{ModelError, Result};
pub use params::ParamStore;
