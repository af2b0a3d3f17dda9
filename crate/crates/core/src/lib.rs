//! Font corpus synthesis, rendering, tag normalization, query construction
//! and retrieval metrics.

pub mod affinity;
pub mod amt;
pub mod error;
pub mod glyphs;
pub mod manifest;
pub mod metrics;
pub mod pngio;
pub mod queries;
pub mod render;
pub mod scoring;
pub mod style;
pub mod synth;
pub mod tags;

pub use error::{Error, Result};
pub use glyphs::{GLYPH_COUNT, GLYPH_SET};
pub use manifest::{DatasetManifest, FontRecord, Split, Splits, STANDARD_FONT_ID};
pub use render::{GlyphImage, GlyphSpec};
pub use style::FontParams;
pub use tags::{TagLabelVector, TagVocabulary};
