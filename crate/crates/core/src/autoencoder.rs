//! Vanilla MLP autoencoder. Trained once by [`train_ae`], then frozen: the
//! [`Autoencoder`] type only hands out shared references to its networks.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::linalg::Matrix;
use crate::nn::{Activation, AdamConfig, AdamState, Mlp};
use crate::potential::LatentBank;
use crate::rng::{streams, SeededRng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AeConfig {
    pub input_dim: usize,
    pub latent_dim: usize,
    /// Encoder hidden widths; the decoder mirrors them.
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub leaky_slope: f64,
}

impl AeConfig {
    /// 784 → 512 → 256 → 10, mirrored decoder with sigmoid output.
    pub fn mnist() -> Self {
        Self {
            input_dim: 784,
            latent_dim: 10,
            hidden: vec![512, 256],
            epochs: 50,
            batch_size: 64,
            adam: AdamConfig::new(1e-3, 0.5, 0.999),
            seed: 0,
            leaky_slope: 0.2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.latent_dim == 0 || self.latent_dim > self.input_dim {
            return fail("latent_dim must be in 1..=input_dim");
        }
        if self.epochs == 0 {
            return fail("epochs must be >= 1");
        }
        if self.batch_size == 0 {
            return fail("batch size must be >= 1");
        }
        self.adam.validate()
    }

    fn encoder_dims(&self) -> Vec<usize> {
        let mut d = vec![self.input_dim];
        d.extend(&self.hidden);
        d.push(self.latent_dim);
        d
    }

    fn decoder_dims(&self) -> Vec<usize> {
        let mut d = self.encoder_dims();
        d.reverse();
        d
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Autoencoder {
    encoder: Mlp,
    decoder: Mlp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AeReport {
    /// Mean batch loss per epoch.
    pub epoch_losses: Vec<f64>,
    /// Reconstruction MSE over the whole training set after training.
    pub final_mse: f64,
}

impl Autoencoder {
    pub fn from_parts(encoder: Mlp, decoder: Mlp) -> Result<Self> {
        ensure_dim(encoder.output_dim(), decoder.input_dim())?;
        ensure_dim(encoder.input_dim(), decoder.output_dim())?;
        Ok(Self { encoder, decoder })
    }

    pub fn encoder(&self) -> &Mlp {
        &self.encoder
    }

    pub fn decoder(&self) -> &Mlp {
        &self.decoder
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn encode(&self, images: &Matrix) -> Result<LatentBank> {
        encode(&self.encoder, images)
    }

    pub fn decode(&self, codes: &Matrix) -> Result<Matrix> {
        decode(&self.decoder, codes)
    }

    /// Mean over all pixels of `(decode(encode(x)) − x)²`, before clamping.
    pub fn reconstruction_mse(&self, images: &Matrix) -> Result<f64> {
        let codes = self.encoder.forward(images)?;
        let out = self.decoder.forward(&codes)?;
        Ok(mean_squared_diff(&out, images))
    }
}

/// Row `i` is the code of image `i`.
pub fn encode(encoder: &Mlp, images: &Matrix) -> Result<LatentBank> {
    LatentBank::new(encoder.forward(images)?)
}

/// Decoded images, clamped to `[0, 1]`.
pub fn decode(decoder: &Mlp, codes: &Matrix) -> Result<Matrix> {
    Ok(decoder.forward(codes)?.map(|v| v.clamp(0.0, 1.0)))
}

/// Mean squared distance of every pixel to the dataset's mean image.
pub fn mean_image_baseline(images: &Matrix) -> f64 {
    let mean = images.column_means();
    let total: f64 = images
        .iter_rows()
        .map(|r| {
            r.iter()
                .zip(&mean)
                .map(|(x, m)| (x - m) * (x - m))
                .sum::<f64>()
        })
        .sum();
    total / (images.rows() * images.cols()).max(1) as f64
}

fn mean_squared_diff(a: &Matrix, b: &Matrix) -> f64 {
    let s: f64 = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    s / a.as_slice().len().max(1) as f64
}

/// Trains encoder and decoder jointly on mean squared reconstruction error.
pub fn train_ae(images: &Matrix, cfg: &AeConfig) -> Result<(Autoencoder, AeReport)> {
    cfg.validate()?;
    if images.rows() == 0 {
        return Err(Error::Empty("training images"));
    }
    ensure_dim(cfg.input_dim, images.cols())?;
    if images.as_slice().iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::InvalidConfig(
            "pixel values must lie in [0, 1]".into(),
        ));
    }
    if images.rows() < cfg.batch_size {
        return Err(Error::InvalidConfig(format!(
            "{} images is fewer than the batch size {}",
            images.rows(),
            cfg.batch_size
        )));
    }

    let mut rng = SeededRng::new(cfg.seed, streams::AUTOENCODER);
    let hidden = Activation::LeakyRelu {
        slope: cfg.leaky_slope,
    };
    let mut encoder = Mlp::init(&cfg.encoder_dims(), hidden, Activation::Identity, &mut rng)?;
    let mut decoder = Mlp::init(&cfg.decoder_dims(), hidden, Activation::Sigmoid, &mut rng)?;
    let mut opt_enc = AdamState::new(cfg.adam, &encoder);
    let mut opt_dec = AdamState::new(cfg.adam, &decoder);

    let mut order: Vec<usize> = (0..images.rows()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut total = 0.0;
        let mut batches = 0usize;
        // Trailing partial batches are dropped.
        for idx in order.chunks_exact(cfg.batch_size) {
            let batch = images.select_rows(idx);
            total += reconstruction_step(
                &mut encoder,
                &mut decoder,
                &mut opt_enc,
                &mut opt_dec,
                &batch,
            )?;
            batches += 1;
        }
        epoch_losses.push(total / batches as f64);
    }
    let ae = Autoencoder { encoder, decoder };
    let final_mse = ae.reconstruction_mse(images)?;
    Ok((
        ae,
        AeReport {
            epoch_losses,
            final_mse,
        },
    ))
}

/// One Adam step on a batch; returns the batch loss before the step.
fn reconstruction_step(
    encoder: &mut Mlp,
    decoder: &mut Mlp,
    opt_enc: &mut AdamState,
    opt_dec: &mut AdamState,
    batch: &Matrix,
) -> Result<f64> {
    let enc_trace = encoder.trace(batch);
    let codes = enc_trace.output().clone();
    let dec_trace = decoder.trace(&codes);
    let out = dec_trace.output();
    let loss = mean_squared_diff(out, batch);
    if !loss.is_finite() {
        return Err(Error::NonFinite("reconstruction loss"));
    }
    let scale = 2.0 / batch.as_slice().len() as f64;
    let seed = Matrix::from_vec(
        out.rows(),
        out.cols(),
        out.as_slice()
            .iter()
            .zip(batch.as_slice())
            .map(|(y, x)| scale * (y - x))
            .collect(),
    )?;
    let (dec_grads, d_codes) = decoder.backward(&dec_trace, seed);
    let (enc_grads, _) = encoder.backward(&enc_trace, d_codes);
    drop(dec_trace);
    drop(enc_trace);
    opt_dec.update(decoder, &dec_grads)?;
    opt_enc.update(encoder, &enc_grads)?;
    Ok(loss)
}
