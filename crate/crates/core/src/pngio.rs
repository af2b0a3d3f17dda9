//! 8-bit grayscale PNG encoding of glyph rasters.

use std::path::Path;

use crate::error::{Error, Result};
use crate::render::GlyphImage;

pub fn encode_gray(pixels: &[u8], width: usize, height: usize) -> Result<Vec<u8>> {
    if pixels.len() != width * height {
        return Err(Error::Malformed {
            what: "raster",
            message: format!("{} pixels for {width}x{height}", pixels.len()),
        });
    }
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header()?;
        w.write_image_data(pixels)?;
        w.finish()?;
    }
    Ok(out)
}

/// Decodes an 8-bit grayscale PNG into `(width, height, pixels)`.
pub fn decode_gray(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let dec = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut reader = dec.read_info()?;
    let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
    let info = reader.next_frame(&mut buf)?;
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Malformed {
            what: "png",
            message: format!("expected 8-bit grayscale, got {:?} {:?}", info.color_type, info.bit_depth),
        });
    }
    buf.truncate(info.buffer_size());
    Ok((info.width as usize, info.height as usize, buf))
}

impl GlyphImage {
    pub fn to_png(&self) -> Result<Vec<u8>> {
        encode_gray(&self.to_u8(), self.size, self.size)
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_png()?).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let px: Vec<u8> = (0..=255).collect();
        let bytes = encode_gray(&px, 16, 16).unwrap();
        assert_eq!(decode_gray(&bytes).unwrap(), (16, 16, px));
    }

    #[test]
    fn size_mismatch() {
        assert!(encode_gray(&[0; 10], 4, 4).is_err());
    }
}
