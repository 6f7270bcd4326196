//! IDX container reader and writer (the MNIST file format).
//!
//! Header fields are big-endian `u32`s: magic, item count, and for images the
//! row and column counts. Pixels follow as unsigned bytes, row-major.

use std::path::Path;

use thiserror::Error;

use crate::linalg::Matrix;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Error)]
pub enum IdxError {
    #[error("bad IDX magic: expected {expected:#010x}, found {found:#010x}")]
    BadMagic { expected: u32, found: u32 },
    #[error("truncated IDX header: {len} bytes, need {need}")]
    TruncatedHeader { len: usize, need: usize },
    #[error("IDX payload length {found} does not match header ({expected} bytes)")]
    TruncatedData { expected: usize, found: usize },
    #[error("IDX dimensions overflow: {count} x {rows} x {cols}")]
    DimensionOverflow { count: u32, rows: u32, cols: u32 },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxLabels {
    pub labels: Vec<u8>,
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

fn header(bytes: &[u8], need: usize, magic: u32) -> Result<(), IdxError> {
    if bytes.len() < 4 {
        return Err(IdxError::TruncatedHeader {
            len: bytes.len(),
            need,
        });
    }
    let found = be_u32(bytes, 0);
    if found != magic {
        return Err(IdxError::BadMagic {
            expected: magic,
            found,
        });
    }
    if bytes.len() < need {
        return Err(IdxError::TruncatedHeader {
            len: bytes.len(),
            need,
        });
    }
    Ok(())
}

impl IdxImages {
    pub fn parse(bytes: &[u8]) -> Result<Self, IdxError> {
        header(bytes, 16, IMAGES_MAGIC)?;
        let (count, rows, cols) = (be_u32(bytes, 4), be_u32(bytes, 8), be_u32(bytes, 12));
        let overflow = IdxError::DimensionOverflow { count, rows, cols };
        let payload = (count as usize)
            .checked_mul(rows as usize)
            .and_then(|v| v.checked_mul(cols as usize))
            .ok_or(overflow)?;
        let expected =
            payload
                .checked_add(16)
                .ok_or(IdxError::DimensionOverflow { count, rows, cols })?;
        if bytes.len() != expected {
            return Err(IdxError::TruncatedData {
                expected,
                found: bytes.len(),
            });
        }
        Ok(Self {
            count: count as usize,
            rows: rows as usize,
            cols: cols as usize,
            pixels: bytes[16..].to_vec(),
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, IdxError> {
        Self::parse(&read_file(path.as_ref())?)
    }

    /// Wraps 8-bit images given as rows of `rows·cols` pixels.
    pub fn from_pixels(rows: usize, cols: usize, pixels: Vec<u8>) -> Self {
        let per = (rows * cols).max(1);
        Self {
            count: pixels.len() / per,
            rows,
            cols,
            pixels,
        }
    }

    /// Quantizes `[0, 1]` values (clamped) to bytes: `round(255·v)`.
    pub fn from_normalized(rows: usize, cols: usize, images: &Matrix) -> Self {
        let pixels = images.as_slice().iter().map(|&v| to_byte(v)).collect();
        Self {
            count: images.rows(),
            rows,
            cols,
            pixels,
        }
    }

    pub fn image_len(&self) -> usize {
        self.rows * self.cols
    }

    /// Keeps the first `n` images.
    pub fn truncate(&mut self, n: usize) {
        if n < self.count {
            self.count = n;
            self.pixels.truncate(n * self.image_len());
        }
    }

    /// One row per image, pixels divided by 255.
    pub fn normalized(&self) -> Matrix {
        let data = self.pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
        Matrix::from_vec(self.count, self.image_len(), data).expect("sized by header")
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.pixels.len());
        for v in [
            IMAGES_MAGIC,
            self.count as u32,
            self.rows as u32,
            self.cols as u32,
        ] {
            out.extend_from_slice(&v.to_be_bytes());
        }
        out.extend_from_slice(&self.pixels);
        out
    }
}

impl IdxLabels {
    pub fn parse(bytes: &[u8]) -> Result<Self, IdxError> {
        header(bytes, 8, LABELS_MAGIC)?;
        let count = be_u32(bytes, 4) as usize;
        let expected = count + 8;
        if bytes.len() != expected {
            return Err(IdxError::TruncatedData {
                expected,
                found: bytes.len(),
            });
        }
        Ok(Self {
            labels: bytes[8..].to_vec(),
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, IdxError> {
        Self::parse(&read_file(path.as_ref())?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.labels.len());
        out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
        out.extend_from_slice(&(self.labels.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.labels);
        out
    }
}

/// Reads an image file and returns `count × (rows·cols)` values in `[0, 1]`,
/// keeping at most `limit` images.
pub fn load_idx_images(path: impl AsRef<Path>, limit: Option<usize>) -> Result<Matrix, IdxError> {
    let mut images = IdxImages::read(path)?;
    if let Some(n) = limit {
        images.truncate(n);
    }
    Ok(images.normalized())
}

pub fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn read_file(path: &Path) -> Result<Vec<u8>, IdxError> {
    std::fs::read(path).map_err(|source| IdxError::Io {
        path: path.display().to_string(),
        source,
    })
}
