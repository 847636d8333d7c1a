//! Binary portable pixmap (P6, maxval 255) encode/decode.

use std::path::Path;

use crate::error::{Error, Result};
use crate::ingest::markers::MarkerFrameImage;

/// Refuse headers describing more pixels than this.
const MAX_PIXELS: usize = 1 << 28;

pub fn encode_ppm(image: &MarkerFrameImage) -> Vec<u8> {
    let header = format!("P6\n{} {}\n255\n", image.width(), image.height());
    let mut out = Vec::with_capacity(header.len() + image.data().len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(image.data());
    out
}

pub fn decode_ppm(bytes: &[u8]) -> Result<MarkerFrameImage> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(2) != Some(b"P6".as_slice()) {
        return Err(Error::Parse("ppm: missing P6 magic".into()));
    }
    let width = cur.header_number("width")?;
    let height = cur.header_number("height")?;
    let maxval = cur.header_number("maxval")?;
    if maxval != 255 {
        return Err(Error::Parse(format!(
            "ppm: maxval must be 255, got {maxval}"
        )));
    }
    // exactly one whitespace byte separates the header from the raster
    match cur.next() {
        Some(b) if b.is_ascii_whitespace() => {}
        _ => return Err(Error::Parse("ppm: missing raster separator".into())),
    }
    if width == 0 || height == 0 {
        return Err(Error::Parse("ppm: zero dimension".into()));
    }
    let pixels = (width as usize)
        .checked_mul(height as usize)
        .filter(|&n| n <= MAX_PIXELS)
        .ok_or_else(|| Error::Parse(format!("ppm: image too large ({width}x{height})")))?;
    let raster = &bytes[cur.pos..];
    if raster.len() < pixels * 3 {
        return Err(Error::Parse(format!(
            "ppm: truncated raster, need {} bytes, have {}",
            pixels * 3,
            raster.len()
        )));
    }
    MarkerFrameImage::from_raw(width, height, raster[..pixels * 3].to_vec())
}

pub fn write_ppm(image: &MarkerFrameImage, path: &Path) -> Result<()> {
    std::fs::write(path, encode_ppm(image)).map_err(|e| Error::io(path, e))
}

pub fn read_ppm(path: &Path) -> Result<MarkerFrameImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_ppm(&bytes)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let s = self.bytes.get(self.pos..self.pos + n)?;
        self.pos += n;
        Some(s)
    }

    fn next(&mut self) -> Option<u8> {
        let b = *self.bytes.get(self.pos)?;
        self.pos += 1;
        Some(b)
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn skip_space_and_comments(&mut self) {
        while let Some(b) = self.peek() {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(c) = self.next() {
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn header_number(&mut self, what: &str) -> Result<u32> {
        let start = self.pos;
        self.skip_space_and_comments();
        if self.pos == start {
            return Err(Error::Parse(format!(
                "ppm: expected whitespace before {what}"
            )));
        }
        let digits_start = self.pos;
        while matches!(self.peek(), Some(b'0'..=b'9')) {
            self.pos += 1;
        }
        let digits = &self.bytes[digits_start..self.pos];
        if digits.is_empty() || digits.len() > 9 {
            return Err(Error::Parse(format!("ppm: bad {what}")));
        }
        // ascii digits only, so utf8 and parse cannot fail
        Ok(std::str::from_utf8(digits).unwrap().parse().unwrap())
    }
}
