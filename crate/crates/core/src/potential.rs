//! Training the potential network `D`.
//!
//! Each iteration draws `m` latent codes from the bank and `m` noise samples,
//! solves the discrete transport problem between them exactly, and takes one
//! Adam step on the regularized regression of `D` onto the source-side
//! potentials `φ` (see [`crate::nn::loss_and_grads`]).

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{distance, Matrix};
use crate::nn::{loss_and_grads, Activation, AdamConfig, AdamState, Mlp};
use crate::ot::{self, DiscreteMeasure};
use crate::rng::{streams, SeededRng};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Standard normal.
    #[default]
    Gaussian,
    /// Uniform on `[−√3, √3]^d` (zero mean, unit variance).
    Uniform,
}

/// Where each iteration's source (noise) batch comes from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceMode {
    /// A new noise batch every iteration.
    #[default]
    Fresh,
    /// One noise set drawn from the seed (see [`fixed_source`]) and reused
    /// every iteration.
    Fixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub iterations: u64,
    pub batch_size: usize,
    pub lambda: f64,
    pub adam: AdamConfig,
    pub seed: u64,
    pub checkpoint_every: u64,
    pub latent_dim: usize,
    /// Hidden layer widths of `D`; the output layer (width 1) is implicit.
    pub hidden: Vec<usize>,
    pub activation: Activation,
    #[serde(default)]
    pub noise: NoiseKind,
    #[serde(default)]
    pub source: SourceMode,
}

impl TrainConfig {
    /// Eight-Gaussian setup: 4-layer ReLU MLP (512 wide), λ = 0, α = 1e-2,
    /// a fixed set of 256 noise points against the whole 256-point bank.
    pub fn toy() -> Self {
        Self {
            iterations: 10_000,
            batch_size: 256,
            lambda: 0.0,
            adam: AdamConfig::new(1e-2, 0.5, 0.999),
            seed: 0,
            checkpoint_every: 1000,
            latent_dim: 2,
            hidden: vec![512; 3],
            activation: Activation::Relu,
            noise: NoiseKind::Gaussian,
            source: SourceMode::Fixed,
        }
    }

    /// Image setup: 6-layer LeakyReLU(0.2) MLP (512 wide), λ = 0.1, α = 1e-4.
    pub fn images(latent_dim: usize) -> Self {
        Self {
            iterations: 200_000,
            batch_size: 64,
            source: SourceMode::Fresh,
            lambda: 0.1,
            adam: AdamConfig::new(1e-4, 0.5, 0.999),
            latent_dim,
            hidden: vec![512; 5],
            activation: Activation::LeakyRelu { slope: 0.2 },
            ..Self::toy()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.batch_size < 2 {
            return fail(format!("batch size must be >= 2, got {}", self.batch_size));
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return fail(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if self.latent_dim == 0 {
            return fail("latent dimension must be >= 1".into());
        }
        if self.checkpoint_every == 0 {
            return fail("checkpoint interval must be >= 1".into());
        }
        if self.hidden.contains(&0) {
            return fail("hidden widths must be positive".into());
        }
        self.adam.validate()
    }

    /// Layer widths of `D`, input first.
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.latent_dim];
        dims.extend(&self.hidden);
        dims.push(1);
        dims
    }
}

/// Latent codes of the training data, one per row.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentBank {
    codes: Matrix,
}

impl LatentBank {
    pub fn new(codes: Matrix) -> Result<Self> {
        if codes.rows() == 0 || codes.cols() == 0 {
            return Err(Error::Empty("latent bank"));
        }
        if !codes.all_finite() {
            return Err(Error::NonFinite("latent bank"));
        }
        Ok(Self { codes })
    }

    pub fn len(&self) -> usize {
        self.codes.rows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.codes.cols()
    }

    pub fn codes(&self) -> &Matrix {
        &self.codes
    }
}

/// `m` distinct codes, uniformly without replacement.
pub fn sample_batch(bank: &LatentBank, rng: &mut SeededRng, m: usize) -> Result<Matrix> {
    if m > bank.len() {
        return Err(Error::InvalidConfig(format!(
            "batch of {m} exceeds bank of {}",
            bank.len()
        )));
    }
    let idx = rng.sample_indices(bank.len(), m);
    Ok(bank.codes.select_rows(&idx))
}

/// `m × d` i.i.d. noise.
pub fn sample_noise(rng: &mut SeededRng, m: usize, d: usize, kind: NoiseKind) -> Matrix {
    let mut data = vec![0.0; m * d];
    match kind {
        NoiseKind::Gaussian => rng.fill_normal(&mut data),
        NoiseKind::Uniform => {
            let half = 3f64.sqrt();
            data.iter_mut()
                .for_each(|v| *v = (2.0 * rng.uniform() - 1.0) * half);
        }
    }
    Matrix::from_vec(m, d, data).expect("sized")
}

/// The source set used by [`SourceMode::Fixed`]: `batch_size` noise points
/// from the seed's own stream.
pub fn fixed_source(cfg: &TrainConfig) -> Matrix {
    let mut rng = SeededRng::new(cfg.seed, streams::FIXED_SOURCE);
    sample_noise(&mut rng, cfg.batch_size, cfg.latent_dim, cfg.noise)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStats {
    pub iteration: u64,
    pub mse_term: f64,
    pub reg_term: f64,
    pub total_loss: f64,
    pub lp_objective: f64,
}

/// Hooks called by [`Trainer::run_until`].
pub trait TrainObserver {
    fn on_step(&mut self, _trainer: &Trainer, _stats: &StepStats) -> Result<()> {
        Ok(())
    }

    /// Called after every `checkpoint_every`-th iteration.
    fn on_checkpoint(&mut self, _trainer: &Trainer) -> Result<()> {
        Ok(())
    }
}

impl TrainObserver for () {}

/// Complete training state; everything needed to resume bit-exactly.
#[derive(Clone, Debug)]
pub struct Trainer {
    config: TrainConfig,
    net: Mlp,
    adam: AdamState,
    rng: SeededRng,
    iteration: u64,
    /// With a fixed source and a full-bank batch every iteration solves the
    /// same transport problem; its solution is kept here. Derived data, not
    /// part of the training state.
    fixed_problem: Option<Problem>,
}

impl PartialEq for Trainer {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.net == other.net
            && self.adam == other.adam
            && self.rng == other.rng
            && self.iteration == other.iteration
    }
}

/// One batch's regression problem.
#[derive(Clone, Debug)]
struct Problem {
    bank: Matrix,
    source: Matrix,
    /// `φ_i`, gauge-fixed.
    targets: Vec<f64>,
    /// `‖y_σ(i) − x_i‖`.
    match_dist: Vec<f64>,
    lp_objective: f64,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let mut init_rng = SeededRng::new(config.seed, streams::INIT);
        let mut net = Mlp::init(
            &config.dims(),
            config.activation,
            Activation::Identity,
            &mut init_rng,
        )?;
        // Zero output layer: `∇D ≡ 0`, so the untrained map is the identity.
        let last = net.layers_mut().last_mut().expect("network has layers");
        last.weight_mut().as_mut_slice().fill(0.0);
        let adam = AdamState::new(config.adam, &net);
        Ok(Self {
            rng: SeededRng::new(config.seed, streams::TRAIN),
            config,
            net,
            adam,
            iteration: 0,
            fixed_problem: None,
        })
    }

    pub fn from_parts(
        config: TrainConfig,
        net: Mlp,
        adam: AdamState,
        rng: SeededRng,
        iteration: u64,
    ) -> Result<Self> {
        config.validate()?;
        ensure_dim(config.latent_dim, net.input_dim())?;
        ensure_dim(1, net.output_dim())?;
        ensure_dim(net.num_params(), adam.first.len())?;
        ensure_dim(net.num_params(), adam.second.len())?;
        Ok(Self {
            config,
            net,
            adam,
            rng,
            iteration,
            fixed_problem: None,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn adam(&self) -> &AdamState {
        &self.adam
    }

    pub fn rng(&self) -> &SeededRng {
        &self.rng
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn into_net(self) -> Mlp {
        self.net
    }

    /// Source and target batches the next [`Trainer::step`] will use,
    /// without advancing the generator.
    pub fn peek_batches(&self, bank: &LatentBank) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
        let mut rng = self.rng.clone();
        self.draw_batches(bank, &mut rng)
    }

    fn reuses_problem(&self, bank: &LatentBank) -> bool {
        self.config.source == SourceMode::Fixed && self.config.batch_size == bank.len()
    }

    fn draw_batches(
        &self,
        bank: &LatentBank,
        rng: &mut SeededRng,
    ) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
        ensure_dim(self.config.latent_dim, bank.dim())?;
        let m = self.config.batch_size;
        let (real, noise) = match self.config.source {
            // The whole bank in order: nothing random left to draw.
            SourceMode::Fixed if self.reuses_problem(bank) => {
                (bank.codes().clone(), fixed_source(&self.config))
            }
            SourceMode::Fixed => (sample_batch(bank, rng, m)?, fixed_source(&self.config)),
            SourceMode::Fresh => {
                let real = sample_batch(bank, rng, m)?;
                (real, sample_noise(rng, m, bank.dim(), self.config.noise))
            }
        };
        Ok((DiscreteMeasure::new(noise)?, DiscreteMeasure::new(real)?))
    }

    fn build_problem(&self, bank: &LatentBank, rng: &mut SeededRng) -> Result<Problem> {
        let (src, tgt) = self.draw_batches(bank, rng)?;
        let cost = ot::cost_matrix(&src, &tgt)?;
        let solution = ot::solve(&cost);
        let sigma = ot::ordering_from_cost(&cost, &solution.potentials)?.sigma;
        let match_dist = sigma
            .iter()
            .enumerate()
            .map(|(i, &j)| distance(tgt.point(j), src.point(i)))
            .collect();
        Ok(Problem {
            bank: bank.codes().clone(),
            source: src.into_points(),
            targets: solution.potentials.source,
            match_dist,
            lp_objective: solution.potentials.objective,
        })
    }

    /// One iteration. On a non-finite loss the training state is left
    /// untouched and [`Error::Diverged`] is returned.
    pub fn step(&mut self, bank: &LatentBank) -> Result<StepStats> {
        let mut rng = self.rng.clone();
        let reuse = self.reuses_problem(bank);
        let mut fresh = None;
        let problem = match &self.fixed_problem {
            Some(p) if reuse && &p.bank == bank.codes() => p,
            _ => &*fresh.insert(self.build_problem(bank, &mut rng)?),
        };

        let next = self.iteration + 1;
        let bundle = match loss_and_grads(
            &self.net,
            &problem.source,
            &problem.targets,
            &problem.match_dist,
            self.config.lambda,
        ) {
            Ok(b) => b,
            Err(Error::NonFinite("loss")) => {
                return Err(Error::Diverged {
                    iteration: next,
                    loss: f64::NAN,
                })
            }
            Err(e) => return Err(e),
        };
        if !bundle.grads.all_finite() {
            return Err(Error::Diverged {
                iteration: next,
                loss: bundle.loss,
            });
        }
        let lp_objective = problem.lp_objective;
        self.adam.update(&mut self.net, &bundle.grads)?;
        self.rng = rng;
        self.iteration = next;
        if reuse && fresh.is_some() {
            self.fixed_problem = fresh;
        }
        Ok(StepStats {
            iteration: next,
            mse_term: bundle.mse_term,
            reg_term: bundle.reg_term,
            total_loss: bundle.loss,
            lp_objective,
        })
    }

    /// Steps until `iteration() == until`.
    pub fn run_until(
        &mut self,
        bank: &LatentBank,
        until: u64,
        observer: &mut dyn TrainObserver,
    ) -> Result<()> {
        while self.iteration < until {
            let stats = self.step(bank)?;
            observer.on_step(self, &stats)?;
            if self.iteration.is_multiple_of(self.config.checkpoint_every) {
                observer.on_checkpoint(self)?;
            }
        }
        Ok(())
    }
}

/// Runs `cfg.iterations` iterations from a fresh initialization.
pub fn train_potential(
    bank: &LatentBank,
    cfg: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<Mlp> {
    let mut trainer = Trainer::new(cfg.clone())?;
    trainer.run_until(bank, cfg.iterations, observer)?;
    Ok(trainer.into_net())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bank(n: usize, d: usize) -> LatentBank {
        let data = (0..n * d).map(|k| (k as f64 * 0.37).sin() * 3.0).collect();
        LatentBank::new(Matrix::from_vec(n, d, data).unwrap()).unwrap()
    }

    #[test]
    fn full_batch_is_a_permutation() {
        let b = bank(16, 2);
        let batch = sample_batch(&b, &mut SeededRng::new(1, 0), 16).unwrap();
        let mut rows: Vec<Vec<u64>> = batch
            .iter_rows()
            .map(|r| r.iter().map(|v| v.to_bits()).collect())
            .collect();
        let mut all: Vec<Vec<u64>> = b
            .codes()
            .iter_rows()
            .map(|r| r.iter().map(|v| v.to_bits()).collect())
            .collect();
        rows.sort();
        all.sort();
        assert_eq!(rows, all);
    }

    #[test]
    fn oversized_batch_rejected() {
        let b = bank(4, 2);
        assert!(sample_batch(&b, &mut SeededRng::new(1, 0), 5).is_err());
    }

    #[test]
    fn seeded_batches_and_noise_repeat() {
        let b = bank(32, 3);
        let mut r1 = SeededRng::new(8, 0);
        let mut r2 = SeededRng::new(8, 0);
        assert_eq!(
            sample_batch(&b, &mut r1, 8).unwrap(),
            sample_batch(&b, &mut r2, 8).unwrap()
        );
        assert_eq!(
            sample_noise(&mut r1, 5, 3, NoiseKind::Gaussian),
            sample_noise(&mut r2, 5, 3, NoiseKind::Gaussian)
        );
    }

    #[test]
    fn uniform_noise_has_unit_variance_support() {
        let z = sample_noise(&mut SeededRng::new(3, 0), 1000, 2, NoiseKind::Uniform);
        let half = 3f64.sqrt();
        assert!(z.as_slice().iter().all(|v| v.abs() <= half));
    }

    #[test]
    fn config_validation() {
        let mut c = TrainConfig::toy();
        assert!(c.validate().is_ok());
        c.batch_size = 1;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::toy();
        c.lambda = -0.1;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::toy();
        c.latent_dim = 0;
        assert!(c.validate().is_err());
        assert_eq!(TrainConfig::toy().dims(), vec![2, 512, 512, 512, 1]);
        assert_eq!(TrainConfig::images(10).dims().len(), 7);
    }

    #[test]
    fn zero_iterations_returns_initial_network() {
        let mut cfg = TrainConfig::toy();
        cfg.iterations = 0;
        cfg.hidden = vec![8, 8];
        let b = bank(64, 2);
        let net = train_potential(&b, &cfg, &mut ()).unwrap();
        assert_eq!(&net, Trainer::new(cfg).unwrap().net());
    }

    #[test]
    fn bank_dimension_must_match() {
        let mut cfg = TrainConfig::toy();
        cfg.hidden = vec![4];
        let mut t = Trainer::new(cfg).unwrap();
        assert!(matches!(
            t.step(&bank(64, 3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
