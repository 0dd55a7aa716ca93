use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pcn::{checkpoint, cifar, config, parallel, trace};
use pcn_core::verify::{engine_gradients, oracle_suite, sign_flipped, GradientSite, ORACLE_TOLERANCE};
use pcn_core::{synth_blobs, Dataset, EvalMode, EvalSettings, InferenceSettings, PcnError, TrainConfig};

const EXIT_CONFIG: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_DIVERGED: u8 = 3;
const EXIT_ORACLE: u8 = 4;

#[derive(Parser)]
#[command(name = "pcn", version, about = "Train, evaluate and verify predictive coding networks")]
struct Cli {
    /// Worker threads for evaluation; 0 picks one per core.
    #[arg(long, global = true, env = "PCN_THREADS", default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on a CIFAR-10 binary directory and write a checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint on the test batch of a CIFAR-10 binary directory.
    Eval(EvalArgs),
    /// Check analytic gradients against finite differences on random networks.
    Verify(VerifyArgs),
    /// Write a Gaussian-blob dataset in the CIFAR-10 binary layout.
    Synth(SynthArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// TOML config; the CIFAR-10 reference settings when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory holding data_batch_*.bin.
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint to write.
    #[arg(long)]
    out: PathBuf,
    /// Energy trace CSV to write.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Train on the first N samples only.
    #[arg(long)]
    subset: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum ModeArg {
    UnsupervisedInference,
    LabelClamped,
    Both,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Directory holding test_batch.bin.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    seed: Option<u64>,
    /// TOML config supplying inference settings, batch size, mode and seed.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Evaluate the first N test samples only.
    #[arg(long)]
    subset: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Negate every analytic gradient before comparing.
    #[arg(long, hide = true)]
    flip_sign: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    classes: usize,
    #[arg(long)]
    per_class: usize,
    /// Also write test_batch.bin with this many samples per class.
    #[arg(long)]
    test_per_class: Option<usize>,
    #[arg(long, default_value_t = 4.0)]
    separation: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = parallel::configure_threads(cli.threads) {
        eprintln!("error: thread pool: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Verify(a) => verify(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

type Outcome = Result<(), (u8, String)>;

fn fail(code: u8) -> impl Fn(&dyn std::fmt::Display) -> (u8, String) {
    move |e| (code, e.to_string())
}

/// Fits a CIFAR-layout dataset (always ten label slots) to a model with
/// `classes` outputs, provided every label is in range.
fn narrow_classes(mut data: Dataset, input_dim: usize, classes: usize) -> Result<Dataset, (u8, String)> {
    if data.input_dim() != input_dim {
        return Err((EXIT_DATA, format!("data has {} features, model expects {input_dim}", data.input_dim())));
    }
    if let Some(&bad) = data.labels.iter().find(|&&l| l >= classes) {
        return Err((EXIT_DATA, format!("label {bad} is out of range for a model with {classes} outputs")));
    }
    data.num_classes = classes;
    Ok(data)
}

fn subset(data: Dataset, n: Option<usize>) -> Dataset {
    match n {
        Some(n) if n < data.len() => data.take(n),
        _ => data,
    }
}

fn train(a: TrainArgs) -> Outcome {
    let mut cfg = match &a.config {
        Some(p) => config::load(p).map_err(|e| fail(EXIT_CONFIG)(&e))?,
        None => TrainConfig::cifar10_reference(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    if let Some(b) = a.batch_size {
        cfg.batch_size = b;
    }
    cfg.validate().map_err(|e| fail(EXIT_CONFIG)(&e))?;

    let data = cifar::load_train(&a.data).map_err(|e| fail(EXIT_DATA)(&e))?;
    let data = narrow_classes(subset(data, a.subset), cfg.model.input_dim(), cfg.model.output_dim)?;
    if cfg.batch_size > data.len() {
        return Err((EXIT_DATA, format!("batch size {} exceeds the {} available samples", cfg.batch_size, data.len())));
    }

    let start = Instant::now();
    let outcome = pcn_core::train_with(&cfg, &data, |s| {
        println!(
            "epoch={} mean_final_energy={} wall_s={:.3}",
            s.epoch,
            pcn_core::energy::format_significant(s.mean_final_energy, 9),
            start.elapsed().as_secs_f64()
        );
    })
    .map_err(|e| match e.error {
        PcnError::Divergence { .. } => (EXIT_DIVERGED, e.to_string()),
        _ => (EXIT_CONFIG, e.to_string()),
    })?;

    checkpoint::save(&outcome.stack, &cfg.model, &a.out).map_err(|e| fail(EXIT_DATA)(&e))?;
    if let Some(path) = &a.trace {
        trace::write_csv(&outcome.trace, path).map_err(|e| (EXIT_DATA, format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Outcome {
    let (stack, model) = checkpoint::load(&a.checkpoint).map_err(|e| fail(EXIT_CONFIG)(&e))?;
    let mut settings = match &a.config {
        Some(p) => config::load(p).map_err(|e| fail(EXIT_CONFIG)(&e))?.eval_settings(),
        None => {
            let mut s = TrainConfig::cifar10_reference().eval_settings();
            s.latent_init_scale = model.latent_init_scale;
            s
        }
    };
    if let Some(seed) = a.seed {
        settings.seed = seed;
    }
    if let Some(b) = a.batch_size {
        settings.batch_size = b;
    }
    settings.infer = InferenceSettings {
        t_infer: a.steps.unwrap_or(settings.infer.t_infer),
        eta_infer: a.rate.unwrap_or(settings.infer.eta_infer),
        ..settings.infer
    };
    settings.infer.validate().map_err(|e| fail(EXIT_CONFIG)(&e))?;
    if settings.batch_size == 0 {
        return Err((EXIT_CONFIG, "batch size must be at least 1".into()));
    }
    let modes = match a.mode {
        None => vec![settings.mode],
        Some(ModeArg::UnsupervisedInference) => vec![EvalMode::UnsupervisedInference],
        Some(ModeArg::LabelClamped) => vec![EvalMode::LabelClamped],
        Some(ModeArg::Both) => vec![EvalMode::UnsupervisedInference, EvalMode::LabelClamped],
    };

    let data = cifar::load_test(&a.data).map_err(|e| fail(EXIT_DATA)(&e))?;
    let data = narrow_classes(subset(data, a.subset), model.input_dim(), model.output_dim)?;

    for mode in modes {
        let report = parallel::evaluate_parallel(&stack, &EvalSettings { mode, ..settings }, &data)
            .map_err(|e| fail(EXIT_DATA)(&e))?;
        println!("top1={:.6} top3={:.6} mode={} samples={}", report.top1, report.top3, mode, report.samples);
    }
    Ok(())
}

fn verify(a: VerifyArgs) -> Outcome {
    let report = if a.flip_sign {
        oracle_suite(a.seed, a.trials, |net| engine_gradients(net).map(sign_flipped))
    } else {
        oracle_suite(a.seed, a.trials, engine_gradients)
    }
    .map_err(|e| fail(EXIT_CONFIG)(&e))?;
    println!(
        "trials={} latent_max_rel_err={:.3e} weight_max_rel_err={:.3e} readout_max_rel_err={:.3e}",
        a.trials, report.max_latent, report.max_weight, report.max_readout
    );
    if report.passes(ORACLE_TOLERANCE) {
        return Ok(());
    }
    let w = report.worst.expect("a failing report names its worst entry");
    let site = match w.site {
        GradientSite::Latent(l) => format!("latent layer {l}"),
        GradientSite::Weight(l) => format!("weight layer {l}"),
        GradientSite::Readout => "readout".to_string(),
    };
    Err((
        EXIT_ORACLE,
        format!("gradient oracle disagreement at {site}, entry ({}, {}): relative error {:.3e}", w.entry.0, w.entry.1, w.error),
    ))
}

fn synth(a: SynthArgs) -> Outcome {
    let bad = |msg: String| (EXIT_CONFIG, msg);
    if a.classes == 0 || a.classes > cifar::NUM_CLASSES {
        return Err(bad(format!("--classes must be in 1..=10, got {}", a.classes)));
    }
    if a.per_class == 0 {
        return Err(bad("--per-class must be at least 1".into()));
    }
    let test = a.test_per_class.unwrap_or(0);
    let all = synth_blobs(a.classes, a.per_class + test, cifar::IMAGE_BYTES, a.separation, a.seed)
        .map_err(|e| bad(e.to_string()))?;
    // Sample i has class i mod C, so any prefix that is a multiple of C stays balanced.
    let (train, rest) = all.split_at(a.classes * a.per_class);
    fs::create_dir_all(&a.out).map_err(|e| (EXIT_DATA, format!("{}: {e}", a.out.display())))?;
    write(&train, &a.out.join("data_batch_1.bin"))?;
    if test > 0 {
        write(&rest, &a.out.join("test_batch.bin"))?;
    }
    Ok(())
}

fn write(data: &Dataset, path: &Path) -> Outcome {
    cifar::write_cifar10(data, path).map_err(|e| fail(EXIT_DATA)(&e))
}
