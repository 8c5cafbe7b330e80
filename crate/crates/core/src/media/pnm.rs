//! Binary PGM (`P5`) and PPM (`P6`) with maxval 255.

use std::fs;
use std::path::Path;

use super::Image;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PnmFormat {
    Pgm,
    Ppm,
}

impl PnmFormat {
    pub fn channels(self) -> usize {
        match self {
            PnmFormat::Pgm => 1,
            PnmFormat::Ppm => 3,
        }
    }

    pub fn for_channels(channels: usize) -> Option<Self> {
        match channels {
            1 => Some(PnmFormat::Pgm),
            3 => Some(PnmFormat::Ppm),
            _ => None,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            PnmFormat::Pgm => "pgm",
            PnmFormat::Ppm => "ppm",
        }
    }

    fn magic(self) -> &'static [u8; 2] {
        match self {
            PnmFormat::Pgm => b"P5",
            PnmFormat::Ppm => b"P6",
        }
    }

    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "pgm" => Some(PnmFormat::Pgm),
            "ppm" => Some(PnmFormat::Ppm),
            _ => None,
        }
    }
}

struct HeaderReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl HeaderReader<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.buf.len() {
            match self.buf[self.pos] {
                b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c => self.pos += 1,
                b'#' => {
                    while self.pos < self.buf.len() && self.buf[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.buf.len() && self.buf[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Format(format!("missing {what} in header")));
        }
        std::str::from_utf8(&self.buf[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format(format!("{what} out of range")))
    }
}

/// Parse an in-memory PGM/PPM file.
pub fn decode_pnm(bytes: &[u8]) -> Result<Image> {
    if bytes.len() < 2 {
        return Err(Error::Format("file too short for a magic number".into()));
    }
    let format = match &bytes[..2] {
        b"P5" => PnmFormat::Pgm,
        b"P6" => PnmFormat::Ppm,
        other => {
            return Err(Error::Format(format!(
                "unsupported magic {:?}, expected P5 or P6",
                String::from_utf8_lossy(other)
            )))
        }
    };
    let mut rd = HeaderReader { buf: bytes, pos: 2 };
    let width = rd.number("width")?;
    let height = rd.number("height")?;
    let maxval = rd.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::Format(format!("zero dimension {width}x{height}")));
    }
    if maxval != 255 {
        return Err(Error::Format(format!("maxval {maxval} unsupported, expected 255")));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(rd.pos) {
        Some(b) if b.is_ascii_whitespace() => rd.pos += 1,
        _ => return Err(Error::Format("missing whitespace after maxval".into())),
    }
    let channels = format.channels();
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| Error::Format("dimensions overflow".into()))?;
    let payload = &bytes[rd.pos..];
    if payload.len() < expected {
        return Err(Error::Size {
            expected,
            found: payload.len(),
        });
    }
    Image::new(width, height, channels, payload[..expected].to_vec())
}

/// Serialize an image; the format's channel count must match the image.
pub fn encode_pnm(img: &Image, format: PnmFormat) -> Result<Vec<u8>> {
    if img.channels() != format.channels() {
        return Err(Error::ChannelMismatch(format!(
            "{} image cannot be stored as {}",
            if img.channels() == 1 { "luma" } else { "RGB" },
            format.extension()
        )));
    }
    let header = format!("{} {} 255\n", img.width(), img.height());
    let mut out = Vec::with_capacity(2 + header.len() + 1 + img.samples().len());
    out.extend_from_slice(format.magic());
    out.push(b'\n');
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(img.samples());
    Ok(out)
}

pub fn load_frame(path: &Path, format: PnmFormat) -> Result<Image> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let img = decode_pnm(&bytes)?;
    if img.channels() != format.channels() {
        return Err(Error::Format(format!(
            "{} is not a {} file",
            path.display(),
            format.extension()
        )));
    }
    Ok(img)
}

pub fn save_frame(img: &Image, path: &Path, format: PnmFormat) -> Result<()> {
    let bytes = encode_pnm(img, format)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
