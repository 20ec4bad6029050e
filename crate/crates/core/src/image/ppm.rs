//! Binary PPM (P6, maxval 255).

use std::fs;
use std::path::Path;

use super::ImageBuffer;
use crate::error::{format_err, Result};

/// Serializes as `"P6\n<w> <h>\n255\n"` followed by the RGB bytes.
pub fn encode_ppm(img: &ImageBuffer) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.to_u8());
    out
}

pub fn decode_ppm(bytes: &[u8]) -> Result<ImageBuffer> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.token()?;
    if magic != b"P6" {
        return Err(format_err!(
            "expected magic P6, found {:?}",
            String::from_utf8_lossy(magic)
        ));
    }
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if maxval != 255 {
        return Err(format_err!("only maxval 255 is supported, found {maxval}"));
    }
    if width == 0 || height == 0 {
        return Err(format_err!("zero image extent {width}x{height}"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(format_err!("missing whitespace after header")),
    }
    let need = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| format_err!("image extents overflow"))?;
    let payload = &bytes[cur.pos..];
    if payload.len() < need {
        return Err(format_err!(
            "truncated payload: need {need} bytes, found {}",
            payload.len()
        ));
    }
    ImageBuffer::from_u8(height, width, &payload[..need])
}

pub fn load_ppm(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    decode_ppm(&fs::read(path)?)
}

pub fn save_ppm(path: impl AsRef<Path>, img: &ImageBuffer) -> Result<()> {
    fs::write(path, encode_ppm(img))?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&b| b != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&'a [u8]> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(|b| !b.is_ascii_whitespace()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(format_err!("unexpected end of header"));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format_err!("bad {what} field {:?}", String::from_utf8_lossy(tok)))
    }
}
