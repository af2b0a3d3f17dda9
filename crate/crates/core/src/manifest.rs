//! Dataset manifest: fonts, their tags, the split assignment and the vocabulary.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::render::{rasterize, GlyphImage, GlyphSpec};
use crate::style::FontParams;
use crate::tags::{TagLabelVector, TagVocabulary};

/// Reserved id of the neutral template font used to condition the generator.
pub const STANDARD_FONT_ID: &str = "standard";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FontRecord {
    pub font_id: String,
    pub family_params: FontParams,
    /// Tags as emitted by the synthesizer, before normalization.
    pub raw_tags: Vec<String>,
    /// Normalized tags, sorted, all in the vocabulary.
    pub tags: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Malformed {
                what: "split name",
                message: other.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl Splits {
    pub fn get(&self, split: Split) -> &[String] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub seed: u64,
    pub fonts: Vec<FontRecord>,
    pub splits: Splits,
    pub vocabulary: TagVocabulary,
    /// Fonts removed because normalization left them without tags.
    #[serde(default)]
    pub dropped_fonts: Vec<String>,
    #[serde(skip)]
    lookup: OnceLock<HashMap<String, usize>>,
}

impl PartialEq for DatasetManifest {
    fn eq(&self, other: &Self) -> bool {
        self.seed == other.seed
            && self.fonts == other.fonts
            && self.splits == other.splits
            && self.vocabulary == other.vocabulary
            && self.dropped_fonts == other.dropped_fonts
    }
}

impl DatasetManifest {
    pub fn new(
        seed: u64,
        fonts: Vec<FontRecord>,
        splits: Splits,
        vocabulary: TagVocabulary,
        dropped_fonts: Vec<String>,
    ) -> Result<Self> {
        let m = DatasetManifest {
            seed,
            fonts,
            splits,
            vocabulary,
            dropped_fonts,
            lookup: OnceLock::new(),
        };
        m.validate()?;
        Ok(m)
    }

    fn lookup(&self) -> &HashMap<String, usize> {
        self.lookup.get_or_init(|| {
            self.fonts
                .iter()
                .enumerate()
                .map(|(i, f)| (f.font_id.clone(), i))
                .collect()
        })
    }

    pub fn font(&self, font_id: &str) -> Result<&FontRecord> {
        self.lookup()
            .get(font_id)
            .map(|&i| &self.fonts[i])
            .ok_or_else(|| Error::UnknownFont(font_id.to_string()))
    }

    /// Style parameters of a manifest font or of the standard font.
    pub fn params(&self, font_id: &str) -> Result<FontParams> {
        if font_id == STANDARD_FONT_ID {
            return Ok(FontParams::standard());
        }
        self.font(font_id).map(|f| f.family_params)
    }

    pub fn split(&self, split: Split) -> &[String] {
        self.splits.get(split)
    }

    pub fn split_of(&self, font_id: &str) -> Option<Split> {
        Split::ALL
            .into_iter()
            .find(|&s| self.split(s).iter().any(|f| f == font_id))
    }

    pub fn labels(&self, font_id: &str) -> Result<TagLabelVector> {
        let font = self.font(font_id)?;
        let idx = self.vocabulary.encode(&font.tags)?;
        Ok(TagLabelVector::from_indices(self.vocabulary.len(), &idx))
    }

    pub fn render_glyph(&self, spec: &GlyphSpec, size: usize) -> Result<GlyphImage> {
        let params = self.params(&spec.font_id)?;
        Ok(GlyphImage {
            spec: spec.clone(),
            size,
            pixels: rasterize(&params, spec.character, size)?,
        })
    }

    /// Checks id uniqueness, the split partition and tag membership.
    pub fn validate(&self) -> Result<()> {
        let malformed = |message: String| Error::Malformed {
            what: "manifest",
            message,
        };
        let mut ids = BTreeSet::new();
        for f in &self.fonts {
            if f.font_id == STANDARD_FONT_ID {
                return Err(malformed(format!("font id `{STANDARD_FONT_ID}` is reserved")));
            }
            if !ids.insert(f.font_id.as_str()) {
                return Err(malformed(format!("duplicate font id `{}`", f.font_id)));
            }
            if f.tags.is_empty() {
                return Err(malformed(format!("font `{}` has no tags", f.font_id)));
            }
            self.vocabulary.encode(&f.tags)?;
        }
        let mut seen = BTreeSet::new();
        for split in Split::ALL {
            for id in self.split(split) {
                if !ids.contains(id.as_str()) {
                    return Err(Error::UnknownFont(id.clone()));
                }
                if !seen.insert(id.as_str()) {
                    return Err(malformed(format!("font `{id}` is in more than one split")));
                }
            }
        }
        if seen.len() != ids.len() {
            return Err(malformed(format!(
                "splits cover {} of {} fonts",
                seen.len(),
                ids.len()
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: DatasetManifest = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
