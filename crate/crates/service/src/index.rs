//! Persisted font index: per-glyph tag probabilities of every font for the
//! basic and full models, the retrieval head, and the vocabulary they were
//! computed against.
//!
//! Layout: `GTIX`, u32 version, u32 header length, JSON header, then
//! little-endian f64 blocks (basic probabilities, optional full
//! probabilities, optional head weights), each optional block preceded by a
//! presence byte.

use std::path::Path;

use candle_core::DType;
use glyphtag_core::affinity::AffinityHead;
use glyphtag_core::scoring::ScoreTable;
use glyphtag_core::{DatasetManifest, GLYPH_COUNT};
use glyphtag_model::checkpoint::{self, Models};
use glyphtag_model::tables::{score_table, Variant};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{io, Result, ServiceError};

pub const MAGIC: &[u8; 4] = b"GTIX";
pub const INDEX_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexHeader {
    pub vocab_hash: String,
    pub tags: Vec<String>,
    pub frequencies: Vec<usize>,
    /// Ascending font ids; row order of every block.
    pub fonts: Vec<String>,
    pub glyphs: usize,
    /// Hash of the checkpoints the index was computed from.
    pub model_version: String,
    pub image_size: usize,
    pub alpha: Option<f64>,
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FontIndex {
    pub header: IndexHeader,
    pub basic: ScoreTable,
    pub full: Option<ScoreTable>,
}

fn put(out: &mut Vec<u8>, values: impl IntoIterator<Item = f64>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn put_probs(out: &mut Vec<u8>, t: &ScoreTable) {
    for font in &t.glyph_probs {
        for glyph in font {
            put(out, glyph.iter().copied());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| ServiceError::Index("truncated file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let b = self.take(n.checked_mul(8).ok_or_else(|| ServiceError::Index("block too large".into()))?)?;
        Ok(b.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn probs(&mut self, fonts: usize, glyphs: usize, tags: usize) -> Result<Vec<Vec<Vec<f64>>>> {
        (0..fonts)
            .map(|_| (0..glyphs).map(|_| self.f64s(tags)).collect())
            .collect()
    }
}

impl FontIndex {
    pub fn new(manifest: &DatasetManifest, basic: ScoreTable, full: Option<ScoreTable>, model_version: String, image_size: usize) -> Result<Self> {
        let mut fonts: Vec<String> = manifest.fonts.iter().map(|f| f.font_id.clone()).collect();
        fonts.sort();
        for t in std::iter::once(&basic).chain(full.as_ref()) {
            if t.fonts != fonts {
                return Err(ServiceError::Index("score table does not cover the manifest fonts".into()));
            }
            if t.n_tags() != manifest.vocabulary.len() {
                return Err(ServiceError::Index("score table has the wrong number of tags".into()));
            }
            if t.glyph_probs.iter().any(|g| g.len() != GLYPH_COUNT) {
                return Err(ServiceError::Index(format!("every font needs {GLYPH_COUNT} glyph rows")));
            }
        }
        let head = full.as_ref().and_then(|f| f.head.as_ref());
        Ok(FontIndex {
            header: IndexHeader {
                vocab_hash: manifest.vocabulary.hash(),
                tags: manifest.vocabulary.tags().to_vec(),
                frequencies: manifest.vocabulary.frequencies().to_vec(),
                fonts,
                glyphs: GLYPH_COUNT,
                model_version,
                image_size,
                alpha: head.map(|h| h.alpha),
                epsilon: head.map(|h| h.epsilon),
            },
            basic,
            full,
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header).map_err(|e| ServiceError::Index(e.to_string()))?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&INDEX_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        put_probs(&mut out, &self.basic);
        match &self.full {
            None => out.push(0),
            Some(f) => {
                out.push(1);
                put_probs(&mut out, f);
                match &f.head {
                    None => out.push(0),
                    Some(h) => {
                        out.push(1);
                        put(&mut out, h.w1.iter().chain(&h.b1).chain(&h.w2).copied());
                        put(&mut out, [h.b2]);
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(ServiceError::Index("not a font index (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != INDEX_VERSION {
            return Err(ServiceError::IndexVersion {
                expected: INDEX_VERSION,
                found: version,
            });
        }
        let len = r.u32()? as usize;
        let header: IndexHeader =
            serde_json::from_slice(r.take(len)?).map_err(|e| ServiceError::Index(e.to_string()))?;
        let (nf, ng, nt) = (header.fonts.len(), header.glyphs, header.tags.len());
        let basic = ScoreTable::new(header.fonts.clone(), r.probs(nf, ng, nt)?, None)?;
        let full = if r.u8()? == 1 {
            let probs = r.probs(nf, ng, nt)?;
            let head = if r.u8()? == 1 {
                let w1 = r.f64s(nt * nt)?;
                let b1 = r.f64s(nt)?;
                let w2 = r.f64s(nt)?;
                let b2 = r.f64s(1)?[0];
                let (alpha, epsilon) = header
                    .alpha
                    .zip(header.epsilon)
                    .ok_or_else(|| ServiceError::Index("head weights without alpha/epsilon".into()))?;
                Some(AffinityHead {
                    n: nt,
                    w1,
                    b1,
                    w2,
                    b2,
                    alpha,
                    epsilon,
                })
            } else {
                None
            };
            Some(ScoreTable::new(header.fonts.clone(), probs, head)?)
        } else {
            None
        };
        if r.pos != bytes.len() {
            return Err(ServiceError::Index("trailing bytes after the last block".into()));
        }
        Ok(FontIndex { header, basic, full })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(io(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path).map_err(io(path))?)
    }

    /// Refuses an index computed against another vocabulary or font set.
    pub fn check_manifest(&self, manifest: &DatasetManifest) -> Result<()> {
        let hash = manifest.vocabulary.hash();
        if hash != self.header.vocab_hash {
            return Err(ServiceError::VocabularyMismatch {
                index: self.header.vocab_hash.clone(),
                manifest: hash,
            });
        }
        let mut fonts: Vec<&str> = manifest.fonts.iter().map(|f| f.font_id.as_str()).collect();
        fonts.sort_unstable();
        if fonts != self.header.fonts.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(ServiceError::Index("index does not cover the manifest's fonts".into()));
        }
        Ok(())
    }

    pub fn table(&self, full: bool) -> Option<&ScoreTable> {
        if full {
            self.full.as_ref()
        } else {
            Some(&self.basic)
        }
    }
}

fn file_hash(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(io(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Index over every manifest font. `basic` is a stage-1 (or later)
/// checkpoint; `full`, when given, supplies the attended probabilities and
/// the retrieval head.
pub fn build_index(manifest: &DatasetManifest, basic: &Path, full: Option<&Path>, dtype: DType) -> Result<FontIndex> {
    let fonts: Vec<String> = manifest.fonts.iter().map(|f| f.font_id.clone()).collect();
    let (mut store, meta) = checkpoint::load(basic, manifest, dtype)?;
    let image_size = meta.backbone.image_size;
    let basic_models = Models::from_store(&mut store, meta)?;
    let basic_table = score_table(&basic_models, manifest, &fonts, dtype, Variant::Basic)?;
    let mut version = Sha256::new();
    version.update(file_hash(basic)?);
    let full_table = match full {
        None => None,
        Some(path) => {
            let (mut store, meta) = checkpoint::load(path, manifest, dtype)?;
            let models = Models::from_store(&mut store, meta)?;
            version.update(file_hash(path)?);
            Some(score_table(&models, manifest, &fonts, dtype, Variant::Full)?)
        }
    };
    FontIndex::new(
        manifest,
        basic_table,
        full_table,
        hex::encode(version.finalize()),
        image_size,
    )
}
