use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{distance, Matrix};
use crate::par;

/// Energy distance between two point clouds (rows), as a V-statistic over all
/// ordered pairs: `2·E‖a−b‖ − E‖a−a′‖ − E‖b−b′‖`.
pub fn energy_distance(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.rows() == 0 || b.rows() == 0 {
        return Err(Error::Empty("point set"));
    }
    ensure_dim(a.cols(), b.cols())?;
    let cross = mean_pairwise(a, b);
    let within_a = mean_pairwise(a, a);
    let within_b = mean_pairwise(b, b);
    // Exact in real arithmetic; clamp the rounding residue for identical sets.
    Ok((2.0 * cross - within_a - within_b).max(0.0))
}

fn mean_pairwise(a: &Matrix, b: &Matrix) -> f64 {
    let total = par::ordered_sum(a.rows(), |i| {
        let x = a.row(i);
        b.iter_rows().map(|y| distance(x, y)).sum::<f64>()
    });
    total / (a.rows() * b.rows()) as f64
}
