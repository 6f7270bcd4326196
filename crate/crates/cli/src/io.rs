//! File helpers shared by the subcommands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use aeot::checkpoint::{write_atomic, Checkpoint, Role};
use aeot::datasets::idx::{load_idx_images, IdxImages};
use aeot::datasets::{DATA_DIR_ENV, MNIST_IMAGES};
use aeot::image::{encode_pgm, montage};
use aeot::nn::Mlp;
use aeot::Matrix;
use anyhow::{anyhow, bail, Context, Result};

pub const ENCODER_FILE: &str = "encoder.json";
pub const DECODER_FILE: &str = "decoder.json";
pub const POTENTIAL_FILE: &str = "potential.json";
pub const LATENTS_FILE: &str = "latents.csv";

pub fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(path, text.as_bytes())
}

pub fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// The MNIST image file: `--data` if given, else the config file's `data`,
/// else `$AEOT_DATA_DIR/train-images-idx3-ubyte`.
pub fn resolve_data(flag: Option<PathBuf>, file: Option<PathBuf>) -> Result<PathBuf> {
    if let Some(p) = flag.or(file) {
        return Ok(p);
    }
    let dir = std::env::var_os(DATA_DIR_ENV)
        .ok_or_else(|| anyhow!("no --data given and {DATA_DIR_ENV} is not set"))?;
    Ok(PathBuf::from(dir).join(MNIST_IMAGES))
}

pub fn load_net(path: &Path, role: Role) -> Result<Mlp> {
    let ck = Checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
    ck.expect_role(role)?;
    Ok(ck.to_net()?)
}

/// Comma-separated rows with an optional non-numeric header line.
pub fn matrix_to_csv(m: &Matrix, prefix: &str) -> String {
    let header: Vec<String> = (0..m.cols()).map(|k| format!("{prefix}{k}")).collect();
    let mut out = header.join(",");
    out.push('\n');
    for row in m.iter_rows() {
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            write!(out, "{v}").expect("string write");
        }
        out.push('\n');
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Matrix> {
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parsed: Result<Vec<f64>, _> =
            line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        match parsed {
            Ok(r) => rows.push(r),
            Err(_) if n == 0 => continue,
            Err(e) => bail!("line {}: {e}", n + 1),
        }
    }
    if rows.is_empty() {
        bail!("no data rows");
    }
    Matrix::from_rows(&rows).map_err(|e| anyhow!("ragged rows: {e}"))
}

/// Reads point sets from CSV, or images from an IDX file (by magic number).
pub fn read_points(path: &Path) -> Result<Matrix> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if bytes.starts_with(&[0, 0, 8, 3]) {
        return load_idx_images(path, None).with_context(|| format!("parsing {}", path.display()));
    }
    let text =
        String::from_utf8(bytes).with_context(|| format!("{} is not text", path.display()))?;
    parse_csv(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Side length of square images with `pixels` pixels.
pub fn image_side(pixels: usize) -> Result<usize> {
    let side = (pixels as f64).sqrt().round() as usize;
    if side * side != pixels {
        bail!("decoder output of {pixels} pixels is not a square image");
    }
    Ok(side)
}

/// Writes `prefix_0000.pgm`, …, an 8×8 `montage.pgm` and `images.idx`.
pub fn write_images(dir: &Path, prefix: &str, images: &Matrix) -> Result<()> {
    let side = image_side(images.cols())?;
    for (k, img) in images.iter_rows().enumerate() {
        write(
            &dir.join(format!("{prefix}_{k:04}.pgm")),
            &encode_pgm(side, side, img)?,
        )?;
    }
    write(&dir.join("montage.pgm"), &montage(images, side, side, 8)?)?;
    write(
        &dir.join("images.idx"),
        &IdxImages::from_normalized(side, side, images).to_bytes(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_with_header() {
        let m = Matrix::from_rows(&[[0.1, -2.5], [1e-300, 3.0]]).unwrap();
        let text = matrix_to_csv(&m, "z");
        assert!(text.starts_with("z0,z1\n"));
        assert_eq!(parse_csv(&text).unwrap(), m);
        assert!(parse_csv("1,2\n3\n").is_err());
        assert!(parse_csv("a,b\n").is_err());
        assert!(parse_csv("1,2\nx,y\n").is_err());
    }

    #[test]
    fn square_sides() {
        assert_eq!(image_side(784).unwrap(), 28);
        assert!(image_side(10).is_err());
    }
}
