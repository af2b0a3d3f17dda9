//! Deterministic anti-aliased rasterizer for the stroke skeletons.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glyphs::{glyph_index, skeleton};
use crate::style::FontParams;

/// Vertical extent of the view window in em units (`-0.25..0.85`).
const VIEW_EM: f64 = 1.1;
const VIEW_TOP: f64 = 0.85;
/// Shadow offset in em units (down and to the right).
const SHADOW_OFFSET: f64 = 0.045;
const SHADOW_INK: f64 = 0.45;

pub const MIN_IMAGE_SIZE: usize = 8;
pub const MAX_IMAGE_SIZE: usize = 1024;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GlyphSpec {
    pub font_id: String,
    pub character: char,
}

impl GlyphSpec {
    pub fn new(font_id: impl Into<String>, character: char) -> Self {
        GlyphSpec {
            font_id: font_id.into(),
            character,
        }
    }

    /// `<font_id>_<char_codepoint>.png`
    pub fn file_name(&self) -> String {
        format!("{}_{}.png", self.font_id, self.character as u32)
    }
}

/// Square grayscale raster, row-major, white background (1.0) and black ink (0.0).
#[derive(Debug, Clone, PartialEq)]
pub struct GlyphImage {
    pub spec: GlyphSpec,
    pub size: usize,
    pub pixels: Vec<f32>,
}

impl GlyphImage {
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.pixels[row * self.size + col]
    }

    /// 8-bit quantization used for PNG export.
    pub fn to_u8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: (f64, f64),
    b: (f64, f64),
    half_width: f64,
}

impl Segment {
    fn distance(&self, p: (f64, f64), round_caps: bool) -> f64 {
        let (dx, dy) = (self.b.0 - self.a.0, self.b.1 - self.a.1);
        let len = dx.hypot(dy);
        let (px, py) = (p.0 - self.a.0, p.1 - self.a.1);
        if len < 1e-12 {
            return if round_caps {
                px.hypot(py)
            } else {
                px.abs().max(py.abs())
            };
        }
        let (ux, uy) = (dx / len, dy / len);
        let t = px * ux + py * uy;
        let perp = (ux * py - uy * px).abs();
        let along = (-t).max(t - len).max(0.0);
        if round_caps {
            perp.hypot(along)
        } else {
            perp.max(along)
        }
    }
}

/// Maps em coordinates to the pixel grid of a `size` x `size` image.
#[derive(Debug, Clone, Copy)]
pub(crate) struct View {
    size: usize,
    pixel: f64,
}

impl View {
    pub(crate) fn new(size: usize) -> Self {
        View {
            size,
            pixel: VIEW_EM / size as f64,
        }
    }

    fn to_em(self, row: usize, col: usize) -> (f64, f64) {
        let x = (col as f64 + 0.5) * self.pixel - VIEW_EM / 2.0;
        let y = VIEW_TOP - (row as f64 + 0.5) * self.pixel;
        (x, y)
    }

    /// Continuous pixel coordinates `(row, col)` of an em point.
    pub(crate) fn to_pixel(self, p: (f64, f64)) -> (f64, f64) {
        let col = (p.0 + VIEW_EM / 2.0) / self.pixel - 0.5;
        let row = (VIEW_TOP - p.1) / self.pixel - 0.5;
        (row, col)
    }

    fn pixel_range(self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let start = lo.floor().max(0.0) as usize;
        let end = ((hi.ceil() + 1.0).max(0.0) as usize).min(self.size);
        start.min(end)..end
    }
}

/// Skeleton of `c` after the font's width, slant and serif treatment, in em
/// coordinates centred on the view window. Returned as polylines with the
/// half stroke width each one is drawn with.
pub(crate) fn styled_strokes(params: &FontParams, c: char) -> Result<Vec<(Vec<(f64, f64)>, f64)>> {
    let skel = skeleton(c)?;
    let shear = params.slant_degrees.to_radians().tan();
    let half = params.stroke_width / 2.0;
    let transform = |(x, y): (f64, f64)| {
        (
            (x - skel.advance / 2.0) * params.width_ratio + (y - 0.3) * shear,
            y,
        )
    };

    let mut out = Vec::new();
    for stroke in &skel.strokes {
        let pts: Vec<(f64, f64)> = stroke.points.iter().copied().map(transform).collect();
        if params.serif && !stroke.curved {
            let length: f64 = pts
                .windows(2)
                .map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1))
                .sum();
            if length > 0.05 {
                let n = pts.len();
                for (end, next) in [(pts[0], pts[1]), (pts[n - 1], pts[n - 2])] {
                    let (dx, dy) = (next.0 - end.0, next.1 - end.1);
                    if dy.abs() >= 0.5 * dx.abs() {
                        let reach = 0.045 + 0.6 * params.stroke_width;
                        out.push((
                            vec![(end.0 - reach, end.1), (end.0 + reach, end.1)],
                            0.55 * half,
                        ));
                    }
                }
            }
        }
        out.push((pts, half));
    }
    Ok(out)
}

/// Coverage buffer (0 = empty, 1 = fully inked) of the union of strokes
/// grown by `grow` em, shifted by `offset`.
fn coverage(
    view: View,
    strokes: &[(Vec<(f64, f64)>, f64)],
    round_caps: bool,
    grow: f64,
    offset: (f64, f64),
) -> Vec<f64> {
    let mut buf = vec![0.0f64; view.size * view.size];
    for (pts, half) in strokes {
        let hw = half + grow;
        if hw <= 0.0 {
            continue;
        }
        for w in pts.windows(2) {
            let seg = Segment {
                a: (w[0].0 + offset.0, w[0].1 + offset.1),
                b: (w[1].0 + offset.0, w[1].1 + offset.1),
                half_width: hw,
            };
            // Square caps reach sqrt(2) * hw at the corners.
            let reach = seg.half_width * std::f64::consts::SQRT_2 + view.pixel;
            let (r0, c0) = view.to_pixel((seg.a.0.min(seg.b.0) - reach, seg.a.1.max(seg.b.1) + reach));
            let (r1, c1) = view.to_pixel((seg.a.0.max(seg.b.0) + reach, seg.a.1.min(seg.b.1) - reach));
            for row in view.pixel_range(r0, r1) {
                for col in view.pixel_range(c0, c1) {
                    let d = seg.distance(view.to_em(row, col), round_caps);
                    let cov = ((seg.half_width - d) / view.pixel + 0.5).clamp(0.0, 1.0);
                    let slot = &mut buf[row * view.size + col];
                    if cov > *slot {
                        *slot = cov;
                    }
                }
            }
        }
    }
    buf
}

/// Outline ring thickness in em units for a given stroke width.
pub fn outline_thickness(stroke_width: f64, size: usize) -> f64 {
    (0.3 * stroke_width).max(VIEW_EM / size as f64)
}

/// Rasterize `c` in the style `params` at `size` x `size` pixels.
pub fn rasterize(params: &FontParams, c: char, size: usize) -> Result<Vec<f32>> {
    if !(MIN_IMAGE_SIZE..=MAX_IMAGE_SIZE).contains(&size) {
        return Err(Error::BadImageSize(size));
    }
    if glyph_index(c).is_none() {
        return Err(Error::UnsupportedCharacter(c));
    }
    let view = View::new(size);
    let strokes = styled_strokes(params, c)?;
    let round = params.rounded;

    let solid = coverage(view, &strokes, round, 0.0, (0.0, 0.0));
    let ink: Vec<f64> = if params.outline {
        let ring = outline_thickness(params.stroke_width, size);
        let inner = coverage(view, &strokes, round, -ring, (0.0, 0.0));
        solid
            .iter()
            .zip(&inner)
            .map(|(o, i)| (o - i).clamp(0.0, 1.0))
            .collect()
    } else {
        solid.clone()
    };

    let shadow = if params.shadow {
        Some(coverage(
            view,
            &strokes,
            round,
            0.0,
            (SHADOW_OFFSET, -SHADOW_OFFSET),
        ))
    } else {
        None
    };

    Ok(ink
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let mut v = 1.0 - k;
            if let Some(sh) = &shadow {
                v = v.min(1.0 - SHADOW_INK * sh[i]);
            }
            v.clamp(0.0, 1.0) as f32
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glyphs::GLYPH_SET;

    #[test]
    fn neutral_a_has_ink_and_valid_range() {
        let px = rasterize(&FontParams::standard(), 'A', 128).unwrap();
        assert_eq!(px.len(), 128 * 128);
        assert!(px.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(px.iter().any(|&v| v < 0.05), "no ink");
        // corners are background
        assert_eq!(px[0], 1.0);
        assert_eq!(px[128 * 128 - 1], 1.0);
    }

    #[test]
    fn deterministic() {
        let p = FontParams {
            slant_degrees: 12.0,
            serif: true,
            shadow: true,
            ..FontParams::standard()
        };
        assert_eq!(rasterize(&p, 'g', 64).unwrap(), rasterize(&p, 'g', 64).unwrap());
    }

    #[test]
    fn heavier_strokes_use_more_ink() {
        let ink = |w: f64| {
            let p = FontParams {
                stroke_width: w,
                ..FontParams::standard()
            };
            rasterize(&p, 'H', 64)
                .unwrap()
                .iter()
                .map(|v| 1.0 - *v as f64)
                .sum::<f64>()
        };
        assert!(ink(0.14) > 1.5 * ink(0.06));
    }

    #[test]
    fn all_letters_render_small() {
        for &c in &GLYPH_SET {
            let px = rasterize(&FontParams::standard(), c, 16).unwrap();
            assert!(px.iter().any(|&v| v < 0.9), "{c} invisible at 16px");
        }
    }

    #[test]
    fn size_and_character_errors() {
        assert!(matches!(
            rasterize(&FontParams::standard(), 'A', 4),
            Err(Error::BadImageSize(4))
        ));
        assert!(matches!(
            rasterize(&FontParams::standard(), '7', 32),
            Err(Error::UnsupportedCharacter('7'))
        ));
    }

    #[test]
    fn outline_interior_is_lighter_than_ring() {
        let m = crate::synth::synthesize(&crate::synth::SynthConfig::standard(200, 4)).unwrap();
        let font = m
            .fonts
            .iter()
            .find(|f| f.family_params.outline && !f.family_params.shadow)
            .expect("an outline font");
        let p = font.family_params;
        let size = 128;
        let px = rasterize(&p, 'O', size).unwrap();
        let view = View::new(size);
        let strokes = styled_strokes(&p, 'O').unwrap();
        let half = p.stroke_width / 2.0;
        let ring = outline_thickness(p.stroke_width, size);
        let (mut interior, mut boundary) = (Vec::new(), Vec::new());
        for row in 0..size {
            for col in 0..size {
                let e = view.to_em(row, col);
                let d = strokes
                    .iter()
                    .flat_map(|(pts, _)| pts.windows(2))
                    .map(|w| {
                        Segment { a: w[0], b: w[1], half_width: half }.distance(e, p.rounded)
                    })
                    .fold(f64::INFINITY, f64::min);
                let v = px[row * size + col] as f64;
                if d < half - ring - view.pixel {
                    interior.push(v);
                } else if d > half - ring + view.pixel && d < half - view.pixel {
                    boundary.push(v);
                }
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(!interior.is_empty() && !boundary.is_empty());
        assert!(mean(&interior) > 0.9, "interior {}", mean(&interior));
        assert!(mean(&boundary) < 0.1, "boundary {}", mean(&boundary));
    }

    #[test]
    fn file_name_uses_codepoint() {
        assert_eq!(GlyphSpec::new("font-0001", 'A').file_name(), "font-0001_65.png");
    }
}
