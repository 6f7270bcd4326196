//! Binary PGM (P5, maxval 255) output.

use crate::datasets::idx::to_byte;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Encodes one grayscale image of `[0, 1]` values.
pub fn encode_pgm(width: usize, height: usize, pixels: &[f64]) -> Result<Vec<u8>> {
    if pixels.len() != width * height {
        return Err(Error::SizeMismatch {
            left: width * height,
            right: pixels.len(),
        });
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(pixels.iter().map(|&v| to_byte(v)));
    Ok(out)
}

/// Tiles up to `grid × grid` images (one per row of `images`) into a single
/// picture; unused tiles stay black.
pub fn montage(images: &Matrix, width: usize, height: usize, grid: usize) -> Result<Vec<u8>> {
    if images.cols() != width * height {
        return Err(Error::DimensionMismatch {
            expected: width * height,
            found: images.cols(),
        });
    }
    let (w, h) = (width * grid, height * grid);
    let mut canvas = vec![0.0; w * h];
    for (k, img) in images.iter_rows().take(grid * grid).enumerate() {
        let (ty, tx) = (k / grid, k % grid);
        for y in 0..height {
            let dst = (ty * height + y) * w + tx * width;
            canvas[dst..dst + width].copy_from_slice(&img[y * width..(y + 1) * width]);
        }
    }
    encode_pgm(w, h, &canvas)
}
