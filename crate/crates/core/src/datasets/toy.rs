use std::f64::consts::FRAC_1_SQRT_2;

use crate::linalg::Matrix;
use crate::ot::DiscreteMeasure;
use crate::rng::SeededRng;

/// Eight isotropic Gaussians on a circle.
#[derive(Clone, Debug, PartialEq)]
pub struct ToySpec {
    pub centers: Vec<[f64; 2]>,
    pub std_dev: f64,
    pub points_per_mode: usize,
}

impl Default for ToySpec {
    /// Radius 10, unit variance, 32 points per mode (256 in total).
    fn default() -> Self {
        let r = 10.0;
        let s = r * FRAC_1_SQRT_2;
        Self {
            centers: vec![
                [r, 0.0],
                [-r, 0.0],
                [0.0, r],
                [0.0, -r],
                [s, s],
                [s, -s],
                [-s, s],
                [-s, -s],
            ],
            std_dev: 1.0,
            points_per_mode: 32,
        }
    }
}

impl ToySpec {
    pub fn total_points(&self) -> usize {
        self.centers.len() * self.points_per_mode
    }
}

/// `points_per_mode` draws from each mode, modes in listed order.
pub fn sample_toy(spec: &ToySpec, rng: &mut SeededRng) -> DiscreteMeasure {
    let n = spec.total_points();
    let mut data = vec![0.0; 2 * n];
    rng.fill_normal(&mut data);
    for (k, p) in data.chunks_mut(2).enumerate() {
        let c = spec.centers[k / spec.points_per_mode];
        p[0] = c[0] + spec.std_dev * p[0];
        p[1] = c[1] + spec.std_dev * p[1];
    }
    DiscreteMeasure::new(Matrix::from_vec(n, 2, data).expect("sized"))
        .expect("toy layout has at least one point")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_counts() {
        let spec = ToySpec::default();
        let pts = sample_toy(&spec, &mut SeededRng::new(0, 1));
        assert_eq!(pts.len(), 256);
        assert_eq!(pts.dim(), 2);
        for c in &spec.centers {
            assert!(((c[0] * c[0] + c[1] * c[1]).sqrt() - 10.0).abs() < 1e-12);
        }
    }

    #[test]
    fn per_mode_means_are_near_centers() {
        let spec = ToySpec::default();
        let pts = sample_toy(&spec, &mut SeededRng::new(5, 1));
        for (k, c) in spec.centers.iter().enumerate() {
            let mut mean = [0.0; 2];
            for i in k * 32..(k + 1) * 32 {
                mean[0] += pts.point(i)[0] / 32.0;
                mean[1] += pts.point(i)[1] / 32.0;
            }
            let err = ((mean[0] - c[0]).powi(2) + (mean[1] - c[1]).powi(2)).sqrt();
            assert!(err < 0.75, "mode {k}: {err}");
        }
    }

    #[test]
    fn seeded_reproducible() {
        let spec = ToySpec::default();
        let a = sample_toy(&spec, &mut SeededRng::new(9, 1));
        let b = sample_toy(&spec, &mut SeededRng::new(9, 1));
        assert_eq!(a, b);
    }
}
