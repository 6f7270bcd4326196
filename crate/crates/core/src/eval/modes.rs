use serde::{Deserialize, Serialize};

use crate::datasets::toy::ToySpec;
use crate::error::{ensure_dim, Result};
use crate::linalg::{squared_distance, Matrix};

/// About three standard deviations of a unit-variance mode.
pub const DEFAULT_RADIUS: f64 = 3.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    /// Points assigned to each center, in `ToySpec` center order.
    pub counts: Vec<usize>,
    /// Points farther than `radius` from their nearest center.
    pub outside: usize,
    pub total: usize,
    /// Number of centers with at least one point.
    pub covered: usize,
    /// `covered / centers`.
    pub coverage: f64,
    pub radius: f64,
}

impl ModeReport {
    /// Smallest per-mode share of all points.
    pub fn min_fraction(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let min = self.counts.iter().copied().min().unwrap_or(0);
        min as f64 / self.total as f64
    }
}

/// Assigns each 2-D point to its nearest center (lowest index on ties) and
/// counts it only if it lies within `radius`.
///
/// # Panics
///
/// Panics if `radius` is not positive.
pub fn mode_coverage(points: &Matrix, spec: &ToySpec, radius: f64) -> Result<ModeReport> {
    assert!(radius > 0.0, "radius must be positive");
    ensure_dim(2, points.cols())?;
    let mut counts = vec![0; spec.centers.len()];
    let mut outside = 0;
    for p in points.iter_rows() {
        let nearest = spec
            .centers
            .iter()
            .map(|c| squared_distance(p, &c[..]))
            .enumerate()
            .fold(None, |best: Option<(usize, f64)>, (k, d)| match best {
                Some((_, bd)) if bd <= d => best,
                _ => Some((k, d)),
            });
        match nearest {
            Some((k, d)) if d <= radius * radius => counts[k] += 1,
            _ => outside += 1,
        }
    }
    let covered = counts.iter().filter(|&&c| c > 0).count();
    let coverage = if counts.is_empty() {
        0.0
    } else {
        covered as f64 / counts.len() as f64
    };
    Ok(ModeReport {
        counts,
        outside,
        total: points.rows(),
        covered,
        coverage,
        radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::toy::sample_toy;
    use crate::rng::SeededRng;

    #[test]
    fn centers_and_origin() {
        let spec = ToySpec::default();
        let at_centers = Matrix::from_rows(&spec.centers).unwrap();
        let r = mode_coverage(&at_centers, &spec, DEFAULT_RADIUS).unwrap();
        assert_eq!(r.counts, vec![1; 8]);
        assert_eq!(r.coverage, 1.0);

        let origin = Matrix::zeros(10, 2);
        let r = mode_coverage(&origin, &spec, DEFAULT_RADIUS).unwrap();
        assert_eq!(r.covered, 0);
        assert_eq!(r.outside, 10);
    }

    #[test]
    fn real_sample_is_well_covered() {
        let spec = ToySpec::default();
        for seed in 0..5 {
            let pts = sample_toy(&spec, &mut SeededRng::new(seed, 1)).into_points();
            let r = mode_coverage(&pts, &spec, DEFAULT_RADIUS).unwrap();
            assert_eq!(r.covered, 8);
            assert!(r.counts.iter().all(|&c| c >= 30), "{:?}", r.counts);
        }
    }

    #[test]
    fn rejects_wrong_dimension() {
        assert!(mode_coverage(&Matrix::zeros(1, 3), &ToySpec::default(), 1.0).is_err());
    }
}
