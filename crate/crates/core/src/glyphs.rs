//! The 52-letter glyph set and the centre-line skeleton of every letter.
//!
//! Skeletons live in em units with the baseline at `y = 0`, cap height at
//! `0.70`, x-height at `0.48`, ascenders at `0.74` and descenders at `-0.20`.
//! Curves are pre-sampled into short polyline segments.

use crate::error::{Error, Result};

/// Lowercase `a..=z` followed by uppercase `A..=Z`.
pub const GLYPH_SET: [char; 52] = {
    let mut set = ['\0'; 52];
    let mut i = 0;
    while i < 26 {
        set[i] = (b'a' + i as u8) as char;
        set[i + 26] = (b'A' + i as u8) as char;
        i += 1;
    }
    set
};

pub const GLYPH_COUNT: usize = GLYPH_SET.len();

pub const CAP_HEIGHT: f64 = 0.70;
pub const X_HEIGHT: f64 = 0.48;
pub const ASCENDER: f64 = 0.74;
pub const DESCENDER: f64 = -0.20;

/// Position of `c` in [`GLYPH_SET`].
pub fn glyph_index(c: char) -> Option<usize> {
    match c {
        'a'..='z' => Some(c as usize - 'a' as usize),
        'A'..='Z' => Some(c as usize - 'A' as usize + 26),
        _ => None,
    }
}

pub fn glyph_char(index: usize) -> Option<char> {
    GLYPH_SET.get(index).copied()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stroke {
    pub points: Vec<(f64, f64)>,
    /// Sampled from an arc; curved strokes never receive serifs.
    pub curved: bool,
}

impl Stroke {
    pub fn segments(&self) -> impl Iterator<Item = ((f64, f64), (f64, f64))> + '_ {
        self.points.windows(2).map(|w| (w[0], w[1]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    pub advance: f64,
    pub strokes: Vec<Stroke>,
}

struct Builder {
    advance: f64,
    strokes: Vec<Stroke>,
}

impl Builder {
    fn new(advance: f64) -> Self {
        Builder {
            advance,
            strokes: Vec::new(),
        }
    }

    fn line(mut self, pts: &[(f64, f64)]) -> Self {
        self.strokes.push(Stroke {
            points: pts.to_vec(),
            curved: false,
        });
        self
    }

    /// Elliptical arc from `a0` to `a1` degrees (either direction).
    fn arc(mut self, center: (f64, f64), radii: (f64, f64), a0: f64, a1: f64) -> Self {
        let sweep = (a1 - a0).abs();
        let steps = ((sweep / 7.5).ceil() as usize).max(2);
        let points = (0..=steps)
            .map(|i| {
                let a = (a0 + (a1 - a0) * i as f64 / steps as f64).to_radians();
                (center.0 + radii.0 * a.cos(), center.1 + radii.1 * a.sin())
            })
            .collect();
        self.strokes.push(Stroke {
            points,
            curved: true,
        });
        self
    }

    fn ellipse(self, center: (f64, f64), radii: (f64, f64)) -> Self {
        self.arc(center, radii, 0.0, 360.0)
    }

    fn dot(self, at: (f64, f64)) -> Self {
        self.line(&[at, (at.0, at.1 + 0.02)])
    }

    fn build(self) -> Skeleton {
        Skeleton {
            advance: self.advance,
            strokes: self.strokes,
        }
    }
}

/// Centre-line skeleton for one of the 52 letters.
pub fn skeleton(c: char) -> Result<Skeleton> {
    let b = match c {
        // uppercase
        'A' => Builder::new(0.60)
            .line(&[(0.05, 0.0), (0.30, 0.70), (0.55, 0.0)])
            .line(&[(0.14, 0.25), (0.46, 0.25)]),
        'B' => Builder::new(0.60)
            .line(&[(0.08, 0.0), (0.08, 0.70)])
            .line(&[(0.08, 0.70), (0.32, 0.70)])
            .arc((0.32, 0.53), (0.16, 0.17), 90.0, -90.0)
            .line(&[(0.32, 0.36), (0.08, 0.36)])
            .line(&[(0.08, 0.36), (0.35, 0.36)])
            .arc((0.35, 0.18), (0.18, 0.18), 90.0, -90.0)
            .line(&[(0.35, 0.0), (0.08, 0.0)]),
        'C' => Builder::new(0.60).arc((0.32, 0.35), (0.26, 0.35), 45.0, 315.0),
        'D' => Builder::new(0.60)
            .line(&[(0.08, 0.0), (0.08, 0.70)])
            .line(&[(0.08, 0.70), (0.25, 0.70)])
            .arc((0.25, 0.35), (0.27, 0.35), 90.0, -90.0)
            .line(&[(0.25, 0.0), (0.08, 0.0)]),
        'E' => Builder::new(0.55)
            .line(&[(0.48, 0.70), (0.08, 0.70), (0.08, 0.0), (0.48, 0.0)])
            .line(&[(0.08, 0.36), (0.42, 0.36)]),
        'F' => Builder::new(0.50)
            .line(&[(0.46, 0.70), (0.08, 0.70), (0.08, 0.0)])
            .line(&[(0.08, 0.36), (0.40, 0.36)]),
        'G' => Builder::new(0.62)
            .arc((0.32, 0.35), (0.26, 0.35), 45.0, 360.0)
            .line(&[(0.58, 0.35), (0.38, 0.35)]),
        'H' => Builder::new(0.60)
            .line(&[(0.08, 0.0), (0.08, 0.70)])
            .line(&[(0.52, 0.0), (0.52, 0.70)])
            .line(&[(0.08, 0.36), (0.52, 0.36)]),
        'I' => Builder::new(0.30).line(&[(0.15, 0.0), (0.15, 0.70)]),
        'J' => Builder::new(0.50)
            .line(&[(0.40, 0.70), (0.40, 0.18)])
            .arc((0.24, 0.18), (0.16, 0.18), 0.0, -160.0),
        'K' => Builder::new(0.58)
            .line(&[(0.08, 0.0), (0.08, 0.70)])
            .line(&[(0.50, 0.70), (0.08, 0.28)])
            .line(&[(0.20, 0.40), (0.52, 0.0)]),
        'L' => Builder::new(0.50).line(&[(0.08, 0.70), (0.08, 0.0), (0.46, 0.0)]),
        'M' => Builder::new(0.70).line(&[
            (0.07, 0.0),
            (0.07, 0.70),
            (0.35, 0.15),
            (0.63, 0.70),
            (0.63, 0.0),
        ]),
        'N' => Builder::new(0.60).line(&[(0.08, 0.0), (0.08, 0.70), (0.52, 0.0), (0.52, 0.70)]),
        'O' => Builder::new(0.64).ellipse((0.32, 0.35), (0.27, 0.35)),
        'P' => Builder::new(0.56)
            .line(&[(0.08, 0.0), (0.08, 0.70)])
            .line(&[(0.08, 0.70), (0.30, 0.70)])
            .arc((0.30, 0.52), (0.18, 0.18), 90.0, -90.0)
            .line(&[(0.30, 0.34), (0.08, 0.34)]),
        'Q' => Builder::new(0.64)
            .ellipse((0.32, 0.35), (0.27, 0.35))
            .line(&[(0.38, 0.15), (0.60, -0.05)]),
        'R' => Builder::new(0.58)
            .line(&[(0.08, 0.0), (0.08, 0.70)])
            .line(&[(0.08, 0.70), (0.30, 0.70)])
            .arc((0.30, 0.52), (0.18, 0.18), 90.0, -90.0)
            .line(&[(0.30, 0.34), (0.08, 0.34)])
            .line(&[(0.28, 0.34), (0.52, 0.0)]),
        'S' => Builder::new(0.60)
            .arc((0.30, 0.53), (0.20, 0.17), 10.0, 270.0)
            .arc((0.30, 0.18), (0.22, 0.18), 90.0, -150.0),
        'T' => Builder::new(0.56)
            .line(&[(0.03, 0.70), (0.53, 0.70)])
            .line(&[(0.28, 0.70), (0.28, 0.0)]),
        'U' => Builder::new(0.60)
            .line(&[(0.08, 0.70), (0.08, 0.22)])
            .arc((0.30, 0.22), (0.22, 0.22), 180.0, 360.0)
            .line(&[(0.52, 0.22), (0.52, 0.70)]),
        'V' => Builder::new(0.60).line(&[(0.04, 0.70), (0.30, 0.0), (0.56, 0.70)]),
        'W' => Builder::new(0.76).line(&[
            (0.03, 0.70),
            (0.20, 0.0),
            (0.38, 0.55),
            (0.56, 0.0),
            (0.73, 0.70),
        ]),
        'X' => Builder::new(0.58)
            .line(&[(0.05, 0.70), (0.53, 0.0)])
            .line(&[(0.05, 0.0), (0.53, 0.70)]),
        'Y' => Builder::new(0.58)
            .line(&[(0.04, 0.70), (0.29, 0.36), (0.54, 0.70)])
            .line(&[(0.29, 0.36), (0.29, 0.0)]),
        'Z' => Builder::new(0.58).line(&[(0.06, 0.70), (0.50, 0.70), (0.06, 0.0), (0.52, 0.0)]),
        // lowercase
        'a' => Builder::new(0.50)
            .ellipse((0.24, 0.17), (0.17, 0.17))
            .line(&[(0.41, 0.0), (0.41, 0.34)])
            .arc((0.24, 0.34), (0.17, 0.14), 0.0, 150.0),
        'b' => Builder::new(0.50)
            .line(&[(0.08, 0.0), (0.08, 0.74)])
            .ellipse((0.26, 0.24), (0.18, 0.24)),
        'c' => Builder::new(0.48).arc((0.25, 0.24), (0.20, 0.24), 45.0, 315.0),
        'd' => Builder::new(0.50)
            .ellipse((0.24, 0.24), (0.18, 0.24))
            .line(&[(0.42, 0.0), (0.42, 0.74)]),
        'e' => Builder::new(0.50)
            .line(&[(0.06, 0.25), (0.44, 0.25)])
            .arc((0.25, 0.24), (0.19, 0.24), 0.0, 320.0),
        'f' => Builder::new(0.38)
            .line(&[(0.18, 0.0), (0.18, 0.60)])
            .arc((0.30, 0.60), (0.12, 0.14), 180.0, 45.0)
            .line(&[(0.06, 0.46), (0.34, 0.46)]),
        'g' => Builder::new(0.50)
            .ellipse((0.24, 0.26), (0.17, 0.20))
            .line(&[(0.41, 0.48), (0.41, -0.05)])
            .arc((0.24, -0.05), (0.17, 0.15), 0.0, -160.0),
        'h' => Builder::new(0.50)
            .line(&[(0.08, 0.0), (0.08, 0.74)])
            .arc((0.24, 0.30), (0.16, 0.18), 180.0, 0.0)
            .line(&[(0.40, 0.30), (0.40, 0.0)]),
        'i' => Builder::new(0.24)
            .line(&[(0.12, 0.0), (0.12, 0.48)])
            .dot((0.12, 0.62)),
        'j' => Builder::new(0.28)
            .line(&[(0.16, 0.48), (0.16, -0.08)])
            .arc((0.05, -0.08), (0.11, 0.12), 0.0, -150.0)
            .dot((0.16, 0.62)),
        'k' => Builder::new(0.44)
            .line(&[(0.08, 0.0), (0.08, 0.74)])
            .line(&[(0.38, 0.48), (0.08, 0.20)])
            .line(&[(0.18, 0.29), (0.40, 0.0)]),
        'l' => Builder::new(0.24).line(&[(0.12, 0.0), (0.12, 0.74)]),
        'm' => Builder::new(0.62)
            .line(&[(0.07, 0.0), (0.07, 0.48)])
            .arc((0.19, 0.32), (0.12, 0.16), 180.0, 0.0)
            .line(&[(0.31, 0.32), (0.31, 0.0)])
            .arc((0.43, 0.32), (0.12, 0.16), 180.0, 0.0)
            .line(&[(0.55, 0.32), (0.55, 0.0)]),
        'n' => Builder::new(0.48)
            .line(&[(0.08, 0.0), (0.08, 0.48)])
            .arc((0.24, 0.30), (0.16, 0.18), 180.0, 0.0)
            .line(&[(0.40, 0.30), (0.40, 0.0)]),
        'o' => Builder::new(0.50).ellipse((0.25, 0.24), (0.19, 0.24)),
        'p' => Builder::new(0.50)
            .line(&[(0.08, 0.48), (0.08, -0.20)])
            .ellipse((0.26, 0.24), (0.18, 0.24)),
        'q' => Builder::new(0.50)
            .ellipse((0.24, 0.24), (0.18, 0.24))
            .line(&[(0.42, 0.48), (0.42, -0.20)]),
        'r' => Builder::new(0.36)
            .line(&[(0.08, 0.0), (0.08, 0.48)])
            .arc((0.26, 0.30), (0.18, 0.16), 180.0, 60.0),
        's' => Builder::new(0.44)
            .arc((0.22, 0.36), (0.15, 0.12), 10.0, 270.0)
            .arc((0.22, 0.12), (0.16, 0.12), 90.0, -150.0),
        't' => Builder::new(0.36)
            .line(&[(0.16, 0.66), (0.16, 0.10)])
            .arc((0.26, 0.10), (0.10, 0.10), 180.0, 300.0)
            .line(&[(0.04, 0.46), (0.32, 0.46)]),
        'u' => Builder::new(0.48)
            .line(&[(0.08, 0.48), (0.08, 0.18)])
            .arc((0.24, 0.18), (0.16, 0.18), 180.0, 360.0)
            .line(&[(0.40, 0.48), (0.40, 0.0)]),
        'v' => Builder::new(0.46).line(&[(0.04, 0.48), (0.23, 0.0), (0.42, 0.48)]),
        'w' => Builder::new(0.60).line(&[
            (0.03, 0.48),
            (0.16, 0.0),
            (0.30, 0.38),
            (0.44, 0.0),
            (0.57, 0.48),
        ]),
        'x' => Builder::new(0.45)
            .line(&[(0.05, 0.48), (0.40, 0.0)])
            .line(&[(0.05, 0.0), (0.40, 0.48)]),
        'y' => Builder::new(0.46)
            .line(&[(0.04, 0.48), (0.23, 0.02)])
            .line(&[(0.42, 0.48), (0.16, -0.20)]),
        'z' => Builder::new(0.46).line(&[(0.06, 0.48), (0.40, 0.48), (0.06, 0.0), (0.42, 0.0)]),
        other => return Err(Error::UnsupportedCharacter(other)),
    };
    Ok(b.build())
}
