//! Binary portable pixmap decoding: P5 grayscale and P6 color, maxval 255.

use std::path::Path;

use crate::error::{Error, Result};
use crate::scorer::ImageTensor;

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
    file: &'a Path,
}

impl<'a> Cursor<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            file: self.file.to_path_buf(),
            location: format!("byte {}", self.pos),
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.data.get(self.pos).copied()
    }

    /// Skip whitespace and `#` comment lines between header tokens.
    fn skip_separators(&mut self) {
        while let Some(b) = self.peek() {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(c) = self.peek() {
                    self.pos += 1;
                    if c == b'\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn read_number(&mut self, what: &str) -> Result<usize> {
        self.skip_separators();
        let start = self.pos;
        while self.peek().is_some_and(|b| b.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err(format!("expected {what}, found no digits")));
        }
        std::str::from_utf8(&self.data[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| self.err(format!("{what} out of range")))
    }
}

/// Decode one binary pixmap. Pixel bytes map to `[0, 1]` as `b / 255`.
pub fn decode(file: &Path, data: &[u8]) -> Result<ImageTensor> {
    let mut cur = Cursor { data, pos: 0, file };

    let channels = match data.get(0..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => {
            return Err(cur.err("not a binary portable pixmap (expected magic P5 or P6)"));
        }
    };
    cur.pos = 2;

    let width = cur.read_number("width")?;
    let height = cur.read_number("height")?;
    let maxval = cur.read_number("maxval")?;
    if maxval != 255 {
        return Err(cur.err(format!("unsupported maxval {maxval} (only 255)")));
    }
    if width == 0 || height == 0 {
        return Err(cur.err(format!("degenerate dimensions {width}x{height}")));
    }

    // Exactly one whitespace byte separates the header from the payload.
    match cur.peek() {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(cur.err("missing whitespace before pixel payload")),
    }

    let expected = width * height * channels;
    let payload = &data[cur.pos..];
    if payload.len() < expected {
        cur.pos = data.len();
        return Err(cur.err(format!(
            "truncated payload: expected {expected} pixel bytes, found {}",
            payload.len()
        )));
    }

    let pixels: Vec<f64> = payload[..expected].iter().map(|&b| b as f64 / 255.0).collect();
    ImageTensor::new(height, width, channels, pixels)
}
