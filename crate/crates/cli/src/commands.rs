use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use aeot::autoencoder::{train_ae as fit_autoencoder, AeConfig};
use aeot::checkpoint::{Checkpoint, Role};
use aeot::datasets::idx::load_idx_images;
use aeot::datasets::toy::ToySpec;
use aeot::eval::{emit_toy_figure, energy_distance, mode_coverage, ModeReport, DEFAULT_RADIUS};
use aeot::experiment::{run_toy, ToyConfig};
use aeot::generator::{generate as gen_images, interpolate as interp, GenRequest};
use aeot::nn::AdamConfig;
use aeot::ot;
use aeot::potential::{LatentBank, StepStats, TrainConfig, TrainObserver, Trainer};
use aeot::Error;
use anyhow::{bail, Context, Result};
use serde::Serialize;

use crate::config::{pick, FileConfig};
use crate::io::{self, DECODER_FILE, ENCODER_FILE, LATENTS_FILE, POTENTIAL_FILE};
use crate::{EvalArgs, GenerateArgs, InterpolateArgs, ToyArgs, TrainAeArgs, TrainOtArgs};

fn apply_train_overrides(cfg: &mut TrainConfig, file: &FileConfig) {
    let adam = cfg.adam;
    cfg.adam = AdamConfig::new(
        pick(None, file.lr, adam.lr),
        pick(None, file.beta1, adam.beta1),
        pick(None, file.beta2, adam.beta2),
    );
    cfg.batch_size = pick(None, file.batch_size, cfg.batch_size);
    cfg.hidden = pick(None, file.hidden.clone(), cfg.hidden.clone());
    cfg.checkpoint_every = pick(None, file.checkpoint_every, cfg.checkpoint_every);
}

pub fn toy(args: ToyArgs) -> Result<()> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let mut cfg = ToyConfig::new(
        pick(args.iters, file.iters, 10_000),
        pick(args.seed, file.seed, 0),
    );
    apply_train_overrides(&mut cfg.train, &file);
    cfg.train.lambda = pick(None, file.lambda, cfg.train.lambda);
    cfg.train.validate()?;

    let run = run_toy(&cfg, &mut ())?;
    io::create_dir(&args.out)?;
    emit_toy_figure(
        &args.out,
        &run.source,
        &run.target,
        &run.transported,
        run.trainer.net(),
    )?;
    Checkpoint::from_trainer(&run.trainer)?.save(&args.out.join(POTENTIAL_FILE))?;
    io::write(
        &args.out.join("real.csv"),
        io::matrix_to_csv(&run.target, "x").as_bytes(),
    )?;
    io::write(
        &args.out.join("transported.csv"),
        io::matrix_to_csv(&run.transported, "x").as_bytes(),
    )?;
    io::write_json(&args.out.join("metrics.json"), &run.metrics)?;
    let m = &run.metrics;
    println!(
        "toy: {} iterations, coverage {}/{}, energy(transported, real) = {:.4} ({:.2}x baseline)",
        m.iterations,
        m.coverage.covered,
        m.coverage.counts.len(),
        m.energy_transported_real,
        m.baseline_ratio
    );
    Ok(())
}

pub fn train_ae(args: TrainAeArgs) -> Result<()> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let data = io::resolve_data(args.data, file.data.clone())?;
    let limit = pick(args.images, file.images, 1000);
    let images = load_idx_images(&data, Some(limit))
        .with_context(|| format!("loading {}", data.display()))?;

    let mut cfg = AeConfig::mnist();
    cfg.input_dim = images.cols();
    cfg.epochs = pick(args.epochs, file.epochs, cfg.epochs);
    cfg.latent_dim = pick(args.latent_dim, file.latent_dim, cfg.latent_dim);
    cfg.seed = pick(args.seed, file.seed, cfg.seed);
    cfg.batch_size = pick(None, file.batch_size, cfg.batch_size);
    cfg.hidden = pick(None, file.hidden.clone(), cfg.hidden);
    cfg.adam = AdamConfig::new(
        pick(None, file.lr, cfg.adam.lr),
        pick(None, file.beta1, cfg.adam.beta1),
        pick(None, file.beta2, cfg.adam.beta2),
    );
    cfg.validate()?;

    let (ae, report) = fit_autoencoder(&images, &cfg)?;
    let bank = ae.encode(&images)?;
    let echo = serde_json::to_value(&cfg)?;
    io::create_dir(&args.out)?;
    Checkpoint::from_net(Role::Encoder, ae.encoder(), echo.clone())
        .save(&args.out.join(ENCODER_FILE))?;
    Checkpoint::from_net(Role::Decoder, ae.decoder(), echo).save(&args.out.join(DECODER_FILE))?;
    io::write(
        &args.out.join(LATENTS_FILE),
        io::matrix_to_csv(bank.codes(), "z").as_bytes(),
    )?;
    io::write_json(&args.out.join("ae_report.json"), &report)?;
    println!(
        "train-ae: {} images, {} epochs, reconstruction MSE {:.5}",
        images.rows(),
        cfg.epochs,
        report.final_mse
    );
    Ok(())
}

/// Accumulates the training log and writes periodic checkpoints.
struct Recorder {
    out: PathBuf,
    log: String,
    start: Instant,
}

impl Recorder {
    const HEADER: &'static str = "iter,mse_term,reg_term,total_loss,lp_objective,wallclock_ms\n";

    fn flush(&self) -> aeot::Result<()> {
        aeot::checkpoint::write_atomic(&self.out.join("train_log.csv"), self.log.as_bytes())
    }
}

impl TrainObserver for Recorder {
    fn on_step(&mut self, _trainer: &Trainer, s: &StepStats) -> aeot::Result<()> {
        writeln!(
            self.log,
            "{},{},{},{},{},{}",
            s.iteration,
            s.mse_term,
            s.reg_term,
            s.total_loss,
            s.lp_objective,
            self.start.elapsed().as_millis()
        )
        .expect("string write");
        Ok(())
    }

    fn on_checkpoint(&mut self, trainer: &Trainer) -> aeot::Result<()> {
        let dir = self.out.join("checkpoints");
        std::fs::create_dir_all(&dir)?;
        Checkpoint::from_trainer(trainer)?
            .save(&dir.join(format!("potential-{:08}.json", trainer.iteration())))?;
        self.flush()
    }
}

pub fn train_ot(args: TrainOtArgs) -> Result<()> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let latents_path = args.ae_checkpoint.join(LATENTS_FILE);
    let codes = io::read_points(&latents_path)?;
    let bank = LatentBank::new(codes)?;

    let mut trainer = match &args.resume {
        Some(path) => Checkpoint::load(path)
            .with_context(|| format!("loading {}", path.display()))?
            .to_trainer()?,
        None => {
            let mut cfg = TrainConfig::images(bank.dim());
            cfg.iterations = 20_000;
            apply_train_overrides(&mut cfg, &file);
            cfg.lambda = pick(args.lambda, file.lambda, cfg.lambda);
            cfg.seed = pick(args.seed, file.seed, cfg.seed);
            Trainer::new(cfg)?
        }
    };
    let until = pick(args.iters, file.iters, trainer.config().iterations);
    if trainer.iteration() > until {
        bail!(
            "checkpoint is at iteration {}, past --iters {until}",
            trainer.iteration()
        );
    }

    let out = args.out.unwrap_or_else(|| args.ae_checkpoint.clone());
    io::create_dir(&out)?;
    if let Some(path) = &args.dump_ot_instance {
        dump_instance(path, &trainer, &bank)?;
    }

    let mut rec = Recorder {
        out: out.clone(),
        log: Recorder::HEADER.to_string(),
        start: Instant::now(),
    };
    match trainer.run_until(&bank, until, &mut rec) {
        Ok(()) => {}
        Err(e @ Error::Diverged { .. }) => {
            let dump = out.join("diverged.json");
            Checkpoint::from_trainer(&trainer)?.save(&dump)?;
            rec.flush()?;
            return Err(e).context(format!("training state saved to {}", dump.display()));
        }
        Err(e) => return Err(e.into()),
    }
    rec.flush()?;
    Checkpoint::from_trainer(&trainer)?.save(&out.join(POTENTIAL_FILE))?;
    println!(
        "train-ot: {} iterations, potential written to {}",
        trainer.iteration(),
        out.display()
    );
    Ok(())
}

fn dump_instance(path: &Path, trainer: &Trainer, bank: &LatentBank) -> Result<()> {
    let (src, tgt) = trainer.peek_batches(bank)?;
    let cost = ot::cost_matrix(&src, &tgt)?;
    let plan = ot::solve_primal(&cost);
    let mut buf = Vec::new();
    ot::write_instance_csv(&cost, &plan, &mut buf)?;
    io::write(path, &buf)
}

pub fn generate(args: GenerateArgs) -> Result<()> {
    let decoder = io::load_net(&args.checkpoints.join(DECODER_FILE), Role::Decoder)?;
    let potential = io::load_net(&args.checkpoints.join(POTENTIAL_FILE), Role::Potential)?;
    let g = gen_images(&decoder, &potential, &GenRequest::new(args.n, args.seed))?;
    io::create_dir(&args.out)?;
    io::write_images(&args.out, "sample", &g.images)?;
    io::write(
        &args.out.join(LATENTS_FILE),
        io::matrix_to_csv(&g.latents, "z").as_bytes(),
    )?;
    println!(
        "generate: {} images written to {}",
        args.n,
        args.out.display()
    );
    Ok(())
}

pub fn interpolate(args: InterpolateArgs) -> Result<()> {
    let [a, b] = args.seeds[..] else {
        bail!("--seeds takes exactly two values");
    };
    let decoder = io::load_net(&args.checkpoints.join(DECODER_FILE), Role::Decoder)?;
    let potential = io::load_net(&args.checkpoints.join(POTENTIAL_FILE), Role::Potential)?;
    let path = interp(&decoder, &potential, a, b, args.steps)?;
    io::create_dir(&args.out)?;
    io::write_images(&args.out, "frame", &path.images)?;
    io::write(
        &args.out.join(LATENTS_FILE),
        io::matrix_to_csv(&path.latents, "z").as_bytes(),
    )?;
    println!(
        "interpolate: {} frames written to {}",
        args.steps,
        args.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct EvalReport {
    real_count: usize,
    generated_count: usize,
    dim: usize,
    energy_distance: f64,
    /// Present only for 2-D inputs (eight-Gaussian layout).
    #[serde(skip_serializing_if = "Option::is_none")]
    mode_coverage: Option<ModeReport>,
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let real = io::read_points(&args.real)?;
    let generated = io::read_points(&args.generated)?;
    let energy = energy_distance(&real, &generated)?;
    let mode_coverage = if generated.cols() == 2 {
        Some(mode_coverage(
            &generated,
            &ToySpec::default(),
            DEFAULT_RADIUS,
        )?)
    } else {
        None
    };
    let report = EvalReport {
        real_count: real.rows(),
        generated_count: generated.rows(),
        dim: real.cols(),
        energy_distance: energy,
        mode_coverage,
    };
    io::write_json(&args.out, &report)?;
    println!("eval: energy distance {energy:.6}");
    Ok(())
}
