//! Font style parameters and the rule table mapping them to ground-truth tags.
//!
//! | tag          | rule                                                        |
//! |--------------|-------------------------------------------------------------|
//! | `bold`       | `stroke_width > 0.110`                                      |
//! | `heavy`      | `stroke_width > 0.135`                                      |
//! | `light`      | `stroke_width < 0.070`                                      |
//! | `thin`       | `stroke_width < 0.055`                                      |
//! | `italic`     | `slant_degrees != 0`                                        |
//! | `serif`      | `serif`                                                     |
//! | `sans-serif` | `!serif`                                                    |
//! | `round`      | `rounded`                                                   |
//! | `outline`    | `outline`                                                   |
//! | `shadow`     | `shadow`                                                    |
//! | `wide`       | `width_ratio > 1.15`                                        |
//! | `narrow`     | `width_ratio < 0.85`                                        |
//! | `kid`        | `rounded && stroke_width > 0.10`                            |
//! | `elegant`    | `serif && italic && stroke_width < 0.09`                    |
//! | `decorative` | `outline \|\| shadow`                                        |
//! | `display`    | `outline \|\| shadow \|\| heavy`                              |
//! | `clean`      | sans-serif, upright, no outline, no shadow, not rounded     |
//! | `formal`     | `serif && !rounded && !outline && !shadow`                  |
//! | `playful`    | `rounded && (italic \|\| shadow)`                            |

use serde::{Deserialize, Serialize};

pub const BOLD_THRESHOLD: f64 = 0.110;
pub const HEAVY_THRESHOLD: f64 = 0.135;
pub const LIGHT_THRESHOLD: f64 = 0.070;
pub const THIN_THRESHOLD: f64 = 0.055;
pub const WIDE_THRESHOLD: f64 = 1.15;
pub const NARROW_THRESHOLD: f64 = 0.85;

/// Generating parameters of one synthetic font.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FontParams {
    /// Stroke width in em units.
    pub stroke_width: f64,
    /// Forward slant; zero means upright.
    pub slant_degrees: f64,
    pub serif: bool,
    pub rounded: bool,
    pub outline: bool,
    pub shadow: bool,
    /// Horizontal scale applied to every glyph.
    pub width_ratio: f64,
}

impl FontParams {
    /// The neutral font used as the generator's character template.
    pub const fn standard() -> Self {
        FontParams {
            stroke_width: 0.08,
            slant_degrees: 0.0,
            serif: false,
            rounded: false,
            outline: false,
            shadow: false,
            width_ratio: 1.0,
        }
    }

    pub fn italic(&self) -> bool {
        self.slant_degrees != 0.0
    }
}

impl Default for FontParams {
    fn default() -> Self {
        Self::standard()
    }
}

/// Every tag the rule table can emit, in a fixed order.
pub const RULE_TAGS: [&str; 19] = [
    "bold",
    "heavy",
    "light",
    "thin",
    "italic",
    "serif",
    "sans-serif",
    "round",
    "outline",
    "shadow",
    "wide",
    "narrow",
    "kid",
    "elegant",
    "decorative",
    "display",
    "clean",
    "formal",
    "playful",
];

/// Canonical tags implied by `p`, in [`RULE_TAGS`] order.
pub fn derive_tags(p: &FontParams) -> Vec<&'static str> {
    RULE_TAGS
        .iter()
        .copied()
        .filter(|tag| tag_applies(tag, p))
        .collect()
}

pub fn tag_applies(tag: &str, p: &FontParams) -> bool {
    let heavy = p.stroke_width > HEAVY_THRESHOLD;
    match tag {
        "bold" => p.stroke_width > BOLD_THRESHOLD,
        "heavy" => heavy,
        "light" => p.stroke_width < LIGHT_THRESHOLD,
        "thin" => p.stroke_width < THIN_THRESHOLD,
        "italic" => p.italic(),
        "serif" => p.serif,
        "sans-serif" => !p.serif,
        "round" => p.rounded,
        "outline" => p.outline,
        "shadow" => p.shadow,
        "wide" => p.width_ratio > WIDE_THRESHOLD,
        "narrow" => p.width_ratio < NARROW_THRESHOLD,
        "kid" => p.rounded && p.stroke_width > 0.10,
        "elegant" => p.serif && p.italic() && p.stroke_width < 0.09,
        "decorative" => p.outline || p.shadow,
        "display" => p.outline || p.shadow || heavy,
        "clean" => !p.serif && !p.italic() && !p.outline && !p.shadow && !p.rounded,
        "formal" => p.serif && !p.rounded && !p.outline && !p.shadow,
        "playful" => p.rounded && (p.italic() || p.shadow),
        _ => false,
    }
}

/// How strongly `p` expresses `tag`, for tags with a continuous underlying
/// parameter. `None` for purely boolean tags, where fonts labeled with the tag
/// cannot be ordered.
pub fn tag_strength(tag: &str, p: &FontParams) -> Option<f64> {
    match tag {
        "bold" | "heavy" => Some(p.stroke_width),
        "light" | "thin" => Some(-p.stroke_width),
        "italic" => Some(p.slant_degrees.abs()),
        "wide" => Some(p.width_ratio),
        "narrow" => Some(-p.width_ratio),
        _ => None,
    }
}

/// Surface spellings a crawler might see for each canonical tag. Every entry
/// normalizes back to its canonical tag.
pub fn raw_variants(tag: &str) -> &'static [&'static str] {
    match tag {
        "bold" => &["bold", "Bold", "BOLD"],
        "heavy" => &["heavy", "Heavy"],
        "light" => &["light", "Light", "lite"],
        "thin" => &["thin", "Thin"],
        "italic" => &["italic", "Italic", "italics", "itallic"],
        "serif" => &["serif", "Serif", "serifs"],
        "sans-serif" => &["sans serif", "Sans Serif", "sans-serif", "Sans  Serifs", "sans_serif"],
        "round" => &["round", "Rounded", "rounded"],
        "outline" => &["outline", "Outlined", "outlines"],
        "shadow" => &["shadow", "Shadows", "shadowed"],
        "wide" => &["wide", "Wide"],
        "narrow" => &["narrow", "Narrow"],
        "kid" => &["kid", "kids", "Kids"],
        "elegant" => &["elegant", "Elegant", "elegent"],
        "decorative" => &["decorative", "Decorative", "decroative"],
        "display" => &["display", "Display", "displays"],
        "clean" => &["clean", "Clean"],
        "formal" => &["formal", "Formal"],
        "playful" => &["playful", "Playful"],
        _ => &[],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(stroke: f64) -> FontParams {
        FontParams {
            stroke_width: stroke,
            ..FontParams::standard()
        }
    }

    #[test]
    fn stroke_width_thresholds() {
        assert!(derive_tags(&params(0.12)).contains(&"bold"));
        assert!(!derive_tags(&params(0.12)).contains(&"heavy"));
        assert!(derive_tags(&params(0.14)).contains(&"heavy"));
        assert!(derive_tags(&params(0.05)).contains(&"thin"));
        assert!(derive_tags(&params(0.05)).contains(&"light"));
        assert!(!derive_tags(&params(0.08)).contains(&"light"));
    }

    #[test]
    fn serif_flag_is_exclusive() {
        let sans = derive_tags(&FontParams::standard());
        assert!(sans.contains(&"sans-serif") && !sans.contains(&"serif"));
        let serif = derive_tags(&FontParams {
            serif: true,
            ..FontParams::standard()
        });
        assert!(serif.contains(&"serif") && !serif.contains(&"sans-serif"));
    }

    #[test]
    fn standard_font_is_clean_sans() {
        assert_eq!(derive_tags(&FontParams::standard()), vec!["sans-serif", "clean"]);
    }

    #[test]
    fn every_rule_tag_has_variants() {
        for tag in RULE_TAGS {
            assert!(!raw_variants(tag).is_empty(), "{tag}");
        }
    }

    #[test]
    fn strength_orders_bold_by_stroke() {
        let s = |w| tag_strength("bold", &params(w)).unwrap();
        assert!(s(0.15) > s(0.12));
        assert_eq!(tag_strength("serif", &params(0.1)), None);
    }
}
