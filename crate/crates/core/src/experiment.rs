//! End-to-end runs with machine-readable metrics.
//!
//! Metrics contain no timing information, so repeated runs with the same
//! seed serialize to identical bytes.

use serde::{Deserialize, Serialize};

use crate::autoencoder::{mean_image_baseline, train_ae, AeConfig, AeReport, Autoencoder};
use crate::datasets::toy::{sample_toy, ToySpec};
use crate::error::{Error, Result};
use crate::eval::{energy_distance, mode_coverage, ModeReport, DEFAULT_RADIUS};
use crate::generator::{generate, transport_batch, GenRequest, Generated};
use crate::linalg::{distance, Matrix};
use crate::ot::{cost_matrix, solve, DiscreteMeasure};
use crate::potential::{fixed_source, LatentBank, TrainConfig, TrainObserver, Trainer};
use crate::rng::{streams, SeededRng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyConfig {
    pub train: TrainConfig,
    pub radius: f64,
    /// Seeds averaged in the real-vs-real energy baseline.
    pub baseline_seeds: u64,
}

impl ToyConfig {
    pub fn new(iterations: u64, seed: u64) -> Self {
        let mut train = TrainConfig::toy();
        train.iterations = iterations;
        train.seed = seed;
        Self {
            train,
            radius: DEFAULT_RADIUS,
            baseline_seeds: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyMetrics {
    pub seed: u64,
    pub iterations: u64,
    pub energy_transported_real: f64,
    pub energy_transported_source: f64,
    pub energy_source_real: f64,
    pub baseline_energy: f64,
    /// `energy_transported_real / baseline_energy`.
    pub baseline_ratio: f64,
    pub coverage: ModeReport,
    pub min_mode_fraction: f64,
    /// Mean `‖T(x_i) − y_σ(i)‖` under the optimal matching σ of source to
    /// real points; `None` when the two sets differ in size.
    pub match_error: Option<f64>,
    /// Mean `‖x_i − y_σ(i)‖`, the same quantity without transport.
    pub match_distance: Option<f64>,
}

pub struct ToyRun {
    pub metrics: ToyMetrics,
    pub trainer: Trainer,
    pub target: Matrix,
    pub source: Matrix,
    pub transported: Matrix,
}

/// The 256 real points (the bank) and the 256 source points that are
/// trained on and then transported.
pub fn toy_data(cfg: &ToyConfig) -> Result<(LatentBank, Matrix)> {
    let spec = ToySpec::default();
    let target = sample_toy(
        &spec,
        &mut SeededRng::new(cfg.train.seed, streams::TOY_TARGET),
    );
    Ok((
        LatentBank::new(target.into_points())?,
        fixed_source(&cfg.train),
    ))
}

pub fn run_toy(cfg: &ToyConfig, observer: &mut dyn TrainObserver) -> Result<ToyRun> {
    if cfg.train.latent_dim != 2 {
        return Err(Error::InvalidConfig("toy run is two-dimensional".into()));
    }
    let (bank, _) = toy_data(cfg)?;
    let mut trainer = Trainer::new(cfg.train.clone())?;
    trainer.run_until(&bank, cfg.train.iterations, observer)?;
    evaluate_toy(cfg, trainer)
}

/// Metrics for a toy potential at whatever iteration `trainer` has reached.
pub fn evaluate_toy(cfg: &ToyConfig, trainer: Trainer) -> Result<ToyRun> {
    let (bank, source) = toy_data(cfg)?;
    let target = bank.codes().clone();
    let transported = transport_batch(trainer.net(), &source)?;
    let coverage = mode_coverage(&transported, &ToySpec::default(), cfg.radius)?;
    let baseline_energy = toy_baseline(cfg.baseline_seeds)?;
    let energy_transported_real = energy_distance(&transported, &target)?;
    let (match_error, match_distance) = if source.rows() == target.rows() {
        let (e, d) = matched_displacement(&source, &transported, &target)?;
        (Some(e), Some(d))
    } else {
        (None, None)
    };
    let metrics = ToyMetrics {
        seed: cfg.train.seed,
        iterations: trainer.iteration(),
        energy_transported_real,
        energy_transported_source: energy_distance(&transported, &source)?,
        energy_source_real: energy_distance(&source, &target)?,
        baseline_energy,
        baseline_ratio: energy_transported_real / baseline_energy,
        min_mode_fraction: coverage.min_fraction(),
        coverage,
        match_error,
        match_distance,
    };
    Ok(ToyRun {
        metrics,
        trainer,
        target,
        source,
        transported,
    })
}

/// Mean distance from transported and untransported source points to their
/// optimally matched targets.
pub fn matched_displacement(
    source: &Matrix,
    transported: &Matrix,
    target: &Matrix,
) -> Result<(f64, f64)> {
    let src = DiscreteMeasure::new(source.clone())?;
    let tgt = DiscreteMeasure::new(target.clone())?;
    let sigma = solve(&cost_matrix(&src, &tgt)?).assignment.row_to_col;
    let n = sigma.len() as f64;
    let mean = |points: &Matrix| {
        sigma
            .iter()
            .enumerate()
            .map(|(i, &j)| distance(points.row(i), target.row(j)))
            .sum::<f64>()
            / n
    };
    Ok((mean(transported), mean(source)))
}

/// Mean energy distance between two independent draws of the toy data, over
/// `seeds` seeds.
pub fn toy_baseline(seeds: u64) -> Result<f64> {
    if seeds == 0 {
        return Err(Error::InvalidConfig(
            "baseline needs at least one seed".into(),
        ));
    }
    let spec = ToySpec::default();
    let mut total = 0.0;
    for s in 0..seeds {
        let mut rng = SeededRng::new(s, streams::BASELINE);
        let a = sample_toy(&spec, &mut rng).into_points();
        let b = sample_toy(&spec, &mut rng).into_points();
        total += energy_distance(&a, &b)?;
    }
    Ok(total / seeds as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MnistConfig {
    pub ae: AeConfig,
    pub ot: TrainConfig,
    pub generate: usize,
    pub generate_seed: u64,
}

impl MnistConfig {
    /// Laptop-sized run: 50 AE epochs, a 128-wide potential, 20k iterations.
    pub fn desk(seed: u64) -> Self {
        let mut ae = AeConfig::mnist();
        ae.seed = seed;
        let mut ot = TrainConfig::images(ae.latent_dim);
        ot.hidden = vec![128; 5];
        ot.iterations = 20_000;
        ot.seed = seed;
        Self {
            ae,
            ot,
            generate: 64,
            generate_seed: seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MnistMetrics {
    pub images: usize,
    pub ae: AeReport,
    pub mean_image_baseline: f64,
    pub ot_iterations: u64,
    pub final_ot_loss: f64,
    pub generated: usize,
    pub nan_pixels: usize,
    pub generated_pixel_mean: f64,
    pub training_pixel_mean: f64,
    /// Energy distance (pixel space) from generated images to the training set.
    pub energy_generated_real: f64,
    /// Same, for noise decoded without transport.
    pub energy_untransported_real: f64,
}

pub struct MnistRun {
    pub metrics: MnistMetrics,
    pub autoencoder: Autoencoder,
    pub trainer: Trainer,
    pub generated: Generated,
}

/// Records the last loss seen, forwarding everything to `inner`.
struct LastLoss<'a> {
    inner: &'a mut dyn TrainObserver,
    loss: f64,
}

impl TrainObserver for LastLoss<'_> {
    fn on_step(&mut self, trainer: &Trainer, stats: &crate::potential::StepStats) -> Result<()> {
        self.loss = stats.total_loss;
        self.inner.on_step(trainer, stats)
    }

    fn on_checkpoint(&mut self, trainer: &Trainer) -> Result<()> {
        self.inner.on_checkpoint(trainer)
    }
}

pub fn run_mnist(
    images: &Matrix,
    cfg: &MnistConfig,
    observer: &mut dyn TrainObserver,
) -> Result<MnistRun> {
    let (autoencoder, ae_report) = train_ae(images, &cfg.ae)?;
    let bank = autoencoder.encode(images)?;
    let mut trainer = Trainer::new(cfg.ot.clone())?;
    let mut last = LastLoss {
        inner: observer,
        loss: f64::NAN,
    };
    trainer.run_until(&bank, cfg.ot.iterations, &mut last)?;
    let final_ot_loss = last.loss;

    let req = GenRequest::new(cfg.generate, cfg.generate_seed);
    let generated = generate(autoencoder.decoder(), trainer.net(), &req)?;
    let untransported = autoencoder.decode(&generated.noise)?;
    let pixels = generated.images.as_slice();
    let mean = |m: &Matrix| m.as_slice().iter().sum::<f64>() / m.as_slice().len() as f64;
    let metrics = MnistMetrics {
        images: images.rows(),
        ae: ae_report,
        mean_image_baseline: mean_image_baseline(images),
        ot_iterations: trainer.iteration(),
        final_ot_loss,
        generated: generated.images.rows(),
        nan_pixels: pixels.iter().filter(|v| v.is_nan()).count(),
        generated_pixel_mean: mean(&generated.images),
        training_pixel_mean: mean(images),
        energy_generated_real: energy_distance(&generated.images, images)?,
        energy_untransported_real: energy_distance(&untransported, images)?,
    };
    Ok(MnistRun {
        metrics,
        autoencoder,
        trainer,
        generated,
    })
}
