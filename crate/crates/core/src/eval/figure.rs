use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::checkpoint::write_atomic;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::nn::Mlp;

pub const GRID_HALF_WIDTH: f64 = 15.0;
pub const GRID_SPACING: f64 = 0.25;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FigureFiles {
    pub points: PathBuf,
    pub grid: PathBuf,
    pub svg: PathBuf,
}

/// Evaluates `D` on the square `[−15, 15]²` with spacing 0.25 and returns
/// the axis values and row-major values (`y` outer, `x` inner).
pub fn potential_grid(net: &Mlp) -> Result<(Vec<f64>, Matrix)> {
    if net.input_dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: net.input_dim(),
        });
    }
    let n = (2.0 * GRID_HALF_WIDTH / GRID_SPACING).round() as usize + 1;
    let axis: Vec<f64> = (0..n)
        .map(|k| -GRID_HALF_WIDTH + k as f64 * GRID_SPACING)
        .collect();
    let mut coords = Matrix::zeros(n * n, 2);
    for (iy, &y) in axis.iter().enumerate() {
        for (ix, &x) in axis.iter().enumerate() {
            coords.row_mut(iy * n + ix).copy_from_slice(&[x, y]);
        }
    }
    let values = Matrix::from_vec(n, n, net.forward_scalar(&coords)?)?;
    Ok((axis, values))
}

/// Writes `points.csv` (`set,x,y` with sets `source`, `target`,
/// `transported`), `potential_grid.csv` (`x,y,d`) and `figure.svg` into `dir`.
pub fn emit_toy_figure(
    dir: &Path,
    source: &Matrix,
    target: &Matrix,
    transported: &Matrix,
    net: &Mlp,
) -> Result<FigureFiles> {
    for m in [source, target, transported] {
        if m.cols() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: m.cols(),
            });
        }
    }
    std::fs::create_dir_all(dir)?;

    let mut points = String::from("set,x,y\n");
    for (name, m) in [
        ("source", source),
        ("target", target),
        ("transported", transported),
    ] {
        for p in m.iter_rows() {
            writeln!(points, "{name},{},{}", p[0], p[1]).expect("string write");
        }
    }

    let (axis, values) = potential_grid(net)?;
    let mut grid = String::from("x,y,d\n");
    for (iy, y) in axis.iter().enumerate() {
        for (ix, x) in axis.iter().enumerate() {
            writeln!(grid, "{x},{y},{}", values.get(iy, ix)).expect("string write");
        }
    }

    let files = FigureFiles {
        points: dir.join("points.csv"),
        grid: dir.join("potential_grid.csv"),
        svg: dir.join("figure.svg"),
    };
    write_atomic(&files.points, points.as_bytes())?;
    write_atomic(&files.grid, grid.as_bytes())?;
    write_atomic(
        &files.svg,
        scatter_svg(source, target, transported).as_bytes(),
    )?;
    Ok(files)
}

fn scatter_svg(source: &Matrix, target: &Matrix, transported: &Matrix) -> String {
    const SIZE: f64 = 600.0;
    let scale = SIZE / (2.0 * GRID_HALF_WIDTH);
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    for (color, m) in [("green", target), ("blue", source), ("red", transported)] {
        writeln!(svg, "<g fill=\"{color}\" fill-opacity=\"0.7\">").expect("string write");
        for p in m.iter_rows() {
            let cx = (p[0] + GRID_HALF_WIDTH) * scale;
            let cy = (GRID_HALF_WIDTH - p[1]) * scale;
            writeln!(svg, "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"2.5\"/>")
                .expect("string write");
        }
        svg.push_str("</g>\n");
    }
    svg.push_str("</svg>\n");
    svg
}
