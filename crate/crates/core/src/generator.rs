//! Sampling through the learned transport map `T(z) = z + ∇D(z)`.

use crate::error::{ensure_dim, Error, Result};
use crate::linalg::Matrix;
use crate::nn::Mlp;
use crate::potential::{sample_noise, NoiseKind};
use crate::rng::{streams, SeededRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GenRequest {
    pub count: usize,
    pub seed: u64,
    pub noise: NoiseKind,
}

impl GenRequest {
    pub fn new(count: usize, seed: u64) -> Self {
        Self {
            count,
            seed,
            noise: NoiseKind::Gaussian,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Generated {
    pub noise: Matrix,
    /// Transported codes `z + ∇D(z)`.
    pub latents: Matrix,
    /// Decoded images in `[0, 1]`.
    pub images: Matrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Interpolation {
    pub latents: Matrix,
    pub images: Matrix,
}

/// `z + ∇D(z)` for a single point.
pub fn transport(net: &Mlp, z: &[f64]) -> Result<Vec<f64>> {
    let grad = net.input_gradient(z)?;
    Ok(z.iter().zip(&grad).map(|(a, g)| a + g).collect())
}

/// `z + ∇D(z)` for every row.
pub fn transport_batch(net: &Mlp, z: &Matrix) -> Result<Matrix> {
    let mut out = net.input_gradients(z)?;
    for (o, v) in out.as_mut_slice().iter_mut().zip(z.as_slice()) {
        *o += v;
    }
    Ok(out)
}

/// The seeded noise batch that [`generate`] transports.
pub fn request_noise(req: &GenRequest, dim: usize) -> Matrix {
    let mut rng = SeededRng::new(req.seed, streams::GENERATE);
    sample_noise(&mut rng, req.count, dim, req.noise)
}

pub fn generate(decoder: &Mlp, net: &Mlp, req: &GenRequest) -> Result<Generated> {
    if req.count == 0 {
        return Err(Error::InvalidConfig("count must be >= 1".into()));
    }
    ensure_dim(net.input_dim(), decoder.input_dim())?;
    let noise = request_noise(req, net.input_dim());
    let latents = transport_batch(net, &noise)?;
    let images = crate::autoencoder::decode(decoder, &latents)?;
    Ok(Generated {
        noise,
        latents,
        images,
    })
}

/// Decodes `steps` evenly spaced points on the segment between the
/// transported codes of `seed_a` and `seed_b`.
pub fn interpolate(
    decoder: &Mlp,
    net: &Mlp,
    seed_a: u64,
    seed_b: u64,
    steps: usize,
) -> Result<Interpolation> {
    if steps < 2 {
        return Err(Error::InvalidConfig(format!(
            "steps must be >= 2, got {steps}"
        )));
    }
    ensure_dim(net.input_dim(), decoder.input_dim())?;
    let end = |seed| -> Result<Vec<f64>> {
        let noise = request_noise(&GenRequest::new(1, seed), net.input_dim());
        Ok(transport_batch(net, &noise)?.into_vec())
    };
    let (a, b) = (end(seed_a)?, end(seed_b)?);
    let d = a.len();
    let mut latents = Matrix::zeros(steps, d);
    for k in 0..steps {
        let t = k as f64 / (steps - 1) as f64;
        for (o, (x, y)) in latents.row_mut(k).iter_mut().zip(a.iter().zip(&b)) {
            *o = (1.0 - t) * x + t * y;
        }
    }
    let images = crate::autoencoder::decode(decoder, &latents)?;
    Ok(Interpolation { latents, images })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Dense};

    fn affine_potential(w: &[f64], b: f64) -> Mlp {
        Mlp::new(vec![Dense::new(
            Matrix::from_vec(1, w.len(), w.to_vec()).unwrap(),
            vec![b],
            Activation::Identity,
        )
        .unwrap()])
        .unwrap()
    }

    fn decoder(d: usize) -> Mlp {
        let mut rng = SeededRng::new(4, 0);
        Mlp::init(&[d, 6, 9], Activation::Relu, Activation::Sigmoid, &mut rng).unwrap()
    }

    #[test]
    fn zero_potential_is_identity() {
        let net = Mlp::zeros(&[3, 4, 1], Activation::Relu, Activation::Identity).unwrap();
        assert_eq!(
            transport(&net, &[1.0, -2.0, 0.5]).unwrap(),
            vec![1.0, -2.0, 0.5]
        );
        let dec = decoder(3);
        let g = generate(&dec, &net, &GenRequest::new(5, 7)).unwrap();
        assert_eq!(g.latents, g.noise);
        assert_eq!(
            g.images,
            crate::autoencoder::decode(&dec, &g.noise).unwrap()
        );
    }

    #[test]
    fn affine_potential_translates() {
        let net = affine_potential(&[0.5, -1.0], 3.0);
        for z in [[0.0, 0.0], [2.0, -7.0], [1e3, 1e-3]] {
            let t = transport(&net, &z).unwrap();
            assert_eq!(t, vec![z[0] + 0.5, z[1] - 1.0]);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let net = affine_potential(&[0.1, 0.2], 0.0);
        let dec = decoder(2);
        let a = generate(&dec, &net, &GenRequest::new(4, 11)).unwrap();
        let b = generate(&dec, &net, &GenRequest::new(4, 11)).unwrap();
        assert_eq!(a, b);
        assert!(a.images.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn mismatched_decoder_rejected() {
        let net = affine_potential(&[0.1, 0.2], 0.0);
        assert!(matches!(
            generate(&decoder(3), &net, &GenRequest::new(1, 0)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn interpolation_endpoints_and_midpoint() {
        let net = affine_potential(&[0.3, -0.4], 0.0);
        let dec = decoder(2);
        let two = interpolate(&dec, &net, 1, 2, 2).unwrap();
        let ga = generate(&dec, &net, &GenRequest::new(1, 1)).unwrap();
        let gb = generate(&dec, &net, &GenRequest::new(1, 2)).unwrap();
        assert_eq!(two.images.row(0), ga.images.row(0));
        assert_eq!(two.images.row(1), gb.images.row(0));

        let five = interpolate(&dec, &net, 1, 2, 5).unwrap();
        for k in 0..2 {
            let mid = 0.5 * (ga.latents.get(0, k) + gb.latents.get(0, k));
            assert!((five.latents.get(2, k) - mid).abs() < 1e-12);
        }

        let same = interpolate(&dec, &net, 3, 3, 4).unwrap();
        for k in 1..4 {
            assert_eq!(same.images.row(k), same.images.row(0));
        }
        assert!(interpolate(&dec, &net, 1, 2, 1).is_err());
    }
}
