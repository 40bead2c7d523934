//! 8-bit PGM (portable graymap) reading and writing.
//!
//! Reads `P2` (ASCII) and `P5` (binary) with maxval 255; header comments are
//! accepted. Writes `P5` with a `P5\n<cols> <rows>\n255\n` header.

use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{Image, LevelSetMask};

const MAXVAL: u32 = 255;

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.data.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.data.get(self.pos) {
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    /// Next decimal token and the byte offset where it starts.
    fn read_uint(&mut self, what: &str) -> Result<(u32, usize)> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.data.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(match self.data.get(self.pos) {
                None => self.err(format!("unexpected end of file while reading {what}")),
                Some(b) => self.err(format!("expected {what}, found byte {b:#04x}")),
            });
        }
        std::str::from_utf8(&self.data[start..self.pos])
            .unwrap()
            .parse()
            .map(|v| (v, start))
            .map_err(|_| Error::Parse {
                offset: start,
                message: format!("{what} out of range"),
            })
    }
}

/// Decode a PGM byte stream.
pub fn decode(data: &[u8]) -> Result<Image> {
    let binary = match data.get(..2) {
        Some(b"P5") => true,
        Some(b"P2") => false,
        _ => {
            return Err(Error::Parse {
                offset: 0,
                message: "missing P2/P5 magic".into(),
            })
        }
    };
    let mut cur = Cursor { data, pos: 2 };
    let cols = cur.read_uint("width")?.0 as usize;
    let rows = cur.read_uint("height")?.0 as usize;
    if rows == 0 || cols == 0 {
        return Err(cur.err(format!("empty image {cols}x{rows}")));
    }
    let (maxval, maxval_offset) = cur.read_uint("maxval")?;
    if maxval != MAXVAL {
        return Err(Error::Parse {
            offset: maxval_offset,
            message: format!("unsupported maxval {maxval} (only 255 is supported)"),
        });
    }

    let count = rows * cols;
    let pixels: Vec<f64> = if binary {
        match cur.data.get(cur.pos) {
            Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
            _ => return Err(cur.err("expected a single whitespace byte before binary payload")),
        }
        let payload = &data[cur.pos..];
        if payload.len() < count {
            return Err(Error::Parse {
                offset: data.len(),
                message: format!("truncated payload: expected {count} bytes, found {}", payload.len()),
            });
        }
        payload[..count].iter().map(|&b| b as f64).collect()
    } else {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let (v, start) = cur.read_uint("pixel value")?;
            if v > MAXVAL {
                return Err(Error::Parse {
                    offset: start,
                    message: format!("pixel value {v} exceeds maxval"),
                });
            }
            out.push(v as f64);
        }
        out
    };
    Image::new(rows, cols, pixels)
}

/// Round half-up and clamp to `[0, 255]`.
pub fn quantize(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

pub fn encode_p5(img: &Image) -> Vec<u8> {
    let header = format!("P5\n{} {}\n{}\n", img.cols(), img.rows(), MAXVAL);
    let mut out = Vec::with_capacity(header.len() + img.len());
    out.extend_from_slice(header.as_bytes());
    out.extend(img.pixels().iter().map(|&v| quantize(v)));
    out
}

pub fn encode_p2(img: &Image) -> Vec<u8> {
    let mut out = format!("P2\n{} {}\n{}\n", img.cols(), img.rows(), MAXVAL);
    for i in 0..img.rows() {
        let row: Vec<String> = (0..img.cols()).map(|j| quantize(img.get(i, j)).to_string()).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out.into_bytes()
}

pub fn load_image(path: &Path) -> Result<Image> {
    let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&data)
}

pub fn save_image(img: &Image, path: &Path) -> Result<()> {
    std::fs::write(path, encode_p5(img)).map_err(|e| Error::io(path, e))
}

/// Members are written as 255, everything else as 0.
pub fn save_mask(mask: &LevelSetMask, path: &Path) -> Result<()> {
    let pixels = mask.members().iter().map(|&m| if m { 255.0 } else { 0.0 }).collect();
    save_image(&Image::new(mask.rows(), mask.cols(), pixels)?, path)
}

/// Read a mask image; pixels at or above 128 are members.
pub fn load_mask(path: &Path) -> Result<LevelSetMask> {
    let img = load_image(path)?;
    LevelSetMask::new(img.rows(), img.cols(), img.pixels().iter().map(|&v| v >= 128.0).collect())
}
