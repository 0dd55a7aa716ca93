//! Mini-batch training loop and the top-k test protocol.
//!
//! Per batch: clamp the inputs, draw fresh latents, run supervised inference,
//! then run `t_learn` weight updates on the frozen latents. Every energy along
//! the way lands in the [`EnergyTrace`].

use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::data::{batches, one_hot, BatchPlan, Dataset};
use crate::energy::EnergyTrace;
use crate::error::{PcnError, Phase, Result};
use crate::inference::{run_inference, InferenceSettings};
use crate::learning::{run_learning, LearnSettings};
use crate::matrix::Matrix;
use crate::model::{GenerativeStack, LatentBatch, ModelConfig};
use crate::rng;

const STREAM_WEIGHTS: u64 = 0x5745_4947_4854; // "WEIGHT"

/// Whether test-time inference sees the label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum EvalMode {
    /// Top error is zero; the label is only used for scoring.
    #[default]
    UnsupervisedInference,
    /// Inference includes the supervised error, i.e. the label steers the
    /// latents. Diagnostic only: it leaks the answer into the prediction.
    LabelClamped,
}

impl EvalMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EvalMode::UnsupervisedInference => "unsupervised_inference",
            EvalMode::LabelClamped => "label_clamped",
        }
    }
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EvalMode {
    type Err = PcnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unsupervised_inference" => Ok(EvalMode::UnsupervisedInference),
            "label_clamped" => Ok(EvalMode::LabelClamped),
            other => Err(PcnError::InvalidConfig(format!("unknown eval mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub infer: InferenceSettings,
    pub learn: LearnSettings,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub eval_mode: EvalMode,
}

impl TrainConfig {
    /// `t_learn` defaults to the batch size, keeping `t_infer` inference
    /// updates per learning update.
    pub fn new(
        model: ModelConfig,
        infer: InferenceSettings,
        eta_learn: f64,
        batch_size: usize,
        epochs: usize,
        seed: u64,
    ) -> Result<Self> {
        let config = TrainConfig {
            model,
            infer,
            learn: LearnSettings { t_learn: batch_size, eta_learn },
            batch_size,
            epochs,
            seed,
            eval_mode: EvalMode::default(),
        };
        config.validate()?;
        Ok(config)
    }

    /// 3072-1000-500-10 relu network, B = 500, 50 inference steps at 0.05,
    /// 500 learning steps at 0.005, four epochs.
    pub fn cifar10_reference() -> Self {
        let model = ModelConfig::new(alloc::vec![3072, 1000, 500, 10], 10, crate::Activation::Relu)
            .expect("static config");
        let infer = InferenceSettings::new(50, 0.05).expect("static config");
        TrainConfig::new(model, infer, 0.005, 500, 4, 0).expect("static config")
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.infer.validate()?;
        self.learn.validate()?;
        if self.batch_size == 0 {
            return Err(PcnError::InvalidConfig("batch_size must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(PcnError::InvalidConfig("epochs must be at least 1".into()));
        }
        Ok(())
    }

    pub fn eval_settings(&self) -> EvalSettings {
        EvalSettings {
            infer: self.infer,
            batch_size: self.batch_size,
            mode: self.eval_mode,
            seed: self.seed,
            latent_init_scale: self.model.latent_init_scale,
        }
    }
}

/// A training failure, located by epoch and batch.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainError {
    pub epoch: usize,
    pub batch: usize,
    pub error: PcnError,
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.error {
            PcnError::Divergence { phase, step, layer } => {
                write!(f, "numeric divergence at epoch={} batch={} phase={phase} step={step}", self.epoch, self.batch)?;
                match layer {
                    Some(l) => write!(f, " layer={l}"),
                    None => write!(f, " layer=readout"),
                }
            }
            other => write!(f, "epoch={} batch={}: {other}", self.epoch, self.batch),
        }
    }
}

impl core::error::Error for TrainError {}

/// Per-epoch summary handed to the progress callback of [`train_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct EpochSummary {
    pub epoch: usize,
    pub batches: usize,
    /// Mean over batches of the energy after the last learning update.
    pub mean_final_energy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub stack: GenerativeStack,
    pub trace: EnergyTrace,
}

pub fn train(config: &TrainConfig, dataset: &Dataset) -> core::result::Result<TrainOutcome, TrainError> {
    train_with(config, dataset, |_| {})
}

/// Trains from a fresh Xavier initialization derived from `config.seed`.
pub fn train_with(
    config: &TrainConfig,
    dataset: &Dataset,
    on_epoch: impl FnMut(&EpochSummary),
) -> core::result::Result<TrainOutcome, TrainError> {
    let at_start = |error| TrainError { epoch: 0, batch: 0, error };
    config.validate().map_err(at_start)?;
    let stack = GenerativeStack::init(&config.model, rng::derive(config.seed, STREAM_WEIGHTS, 0)).map_err(at_start)?;
    train_from(config, dataset, stack, on_epoch)
}

/// Continues training an existing stack.
pub fn train_from(
    config: &TrainConfig,
    dataset: &Dataset,
    mut stack: GenerativeStack,
    mut on_epoch: impl FnMut(&EpochSummary),
) -> core::result::Result<TrainOutcome, TrainError> {
    let at_start = |error| TrainError { epoch: 0, batch: 0, error };
    config.validate().map_err(at_start)?;
    check_dataset(&config.model, dataset).map_err(at_start)?;
    if stack.dims() != config.model.dims || stack.output_dim() != config.model.output_dim {
        return Err(at_start(PcnError::InvalidConfig("stack shape does not match model config".into())));
    }
    let mut trace = EnergyTrace::new();
    for epoch in 0..config.epochs {
        let plan = BatchPlan::for_epoch(dataset.len(), config.batch_size, config.seed, epoch)
            .map_err(|error| TrainError { epoch, batch: 0, error })?;
        let mut final_energy_sum = 0.0;
        let mut batch_count = 0;
        let epoch_seed = rng::derive(config.seed, rng::STREAM_LATENTS, epoch as u64);
        for (batch, b) in batches(dataset, &plan).map_err(|error| TrainError { epoch, batch: 0, error })?.enumerate() {
            let located = |error| TrainError { epoch, batch, error };
            let targets = one_hot(&b.labels, config.model.output_dim).map_err(located)?;
            let latents = LatentBatch::init(&config.model, b.inputs.rows(), rng::derive(epoch_seed, rng::STREAM_LATENTS, batch as u64))
                .map_err(located)?;
            let inferred = run_inference(&stack, &b.inputs, &latents, Some(&targets), &config.infer).map_err(located)?;
            for (t, &e) in inferred.energies.iter().enumerate() {
                trace.record(epoch, batch, t, Phase::Infer, e).map_err(located)?;
            }
            let learned = run_learning(&stack, &b.inputs, &inferred.latents, Some(&targets), &config.learn).map_err(
                |error| match error {
                    PcnError::Divergence { phase, step, layer } => {
                        located(PcnError::Divergence { phase, step: inferred.steps_taken + step, layer })
                    }
                    other => located(other),
                },
            )?;
            let offset = inferred.steps_taken + 1;
            for (t, &e) in learned.energies.iter().enumerate() {
                trace.record(epoch, batch, offset + t, Phase::Learn, e).map_err(located)?;
            }
            final_energy_sum += learned.energies.last().copied().unwrap_or(0.0);
            batch_count += 1;
            stack = learned.stack;
        }
        on_epoch(&EpochSummary {
            epoch,
            batches: batch_count,
            mean_final_energy: if batch_count > 0 { final_energy_sum / batch_count as f64 } else { 0.0 },
        });
    }
    Ok(TrainOutcome { stack, trace })
}

fn check_dataset(model: &ModelConfig, dataset: &Dataset) -> Result<()> {
    if dataset.input_dim() != model.input_dim() {
        return Err(PcnError::InvalidConfig(format!(
            "dataset has {} input features, model expects {}",
            dataset.input_dim(),
            model.input_dim()
        )));
    }
    if dataset.num_classes != model.output_dim {
        return Err(PcnError::InvalidConfig(format!(
            "dataset has {} classes, model has {} outputs",
            dataset.num_classes, model.output_dim
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSettings {
    pub infer: InferenceSettings,
    pub batch_size: usize,
    pub mode: EvalMode,
    /// Keys the latent initialization of every test batch.
    pub seed: u64,
    pub latent_init_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub top1: f64,
    pub top3: f64,
    /// Number of evaluated samples per true class.
    pub per_class_counts: Vec<usize>,
    pub samples: usize,
    pub mode: EvalMode,
}

/// Hit counts for one evaluated batch; combine with [`EvalReport::from_batches`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchEval {
    pub top1_hits: usize,
    pub top3_hits: usize,
    pub class_counts: Vec<usize>,
}

impl EvalReport {
    pub fn from_batches<'a>(mode: EvalMode, num_classes: usize, parts: impl IntoIterator<Item = &'a BatchEval>) -> Self {
        let mut top1 = 0;
        let mut top3 = 0;
        let mut counts = alloc::vec![0; num_classes];
        for p in parts {
            top1 += p.top1_hits;
            top3 += p.top3_hits;
            for (c, n) in counts.iter_mut().zip(&p.class_counts) {
                *c += n;
            }
        }
        let samples: usize = counts.iter().sum();
        let frac = |hits: usize| if samples == 0 { 0.0 } else { hits as f64 / samples as f64 };
        EvalReport { top1: frac(top1), top3: frac(top3), per_class_counts: counts, samples, mode }
    }
}

/// True iff `label` is among the `k` largest entries of `scores`; ties go to
/// the lower index.
pub fn top_k_hit(scores: &[f64], label: usize, k: usize) -> bool {
    let target = scores[label];
    let ahead = scores
        .iter()
        .enumerate()
        .filter(|&(j, &s)| s > target || (s == target && j < label))
        .count();
    ahead < k
}

/// Plan used to cut a test set into evaluation batches.
pub fn eval_plan(dataset: &Dataset, settings: &EvalSettings) -> Result<BatchPlan> {
    BatchPlan::sequential(dataset.len(), settings.batch_size.min(dataset.len()).max(1))
}

/// Runs test-time inference on one batch with frozen weights and scores it.
pub fn evaluate_batch(
    stack: &GenerativeStack,
    settings: &EvalSettings,
    inputs: &Matrix,
    labels: &[usize],
    batch_index: usize,
) -> Result<BatchEval> {
    let num_classes = stack.output_dim();
    let model = ModelConfig {
        dims: stack.dims(),
        output_dim: num_classes,
        activations: stack.activations.clone(),
        latent_init_scale: settings.latent_init_scale,
    };
    let latents = LatentBatch::init(&model, inputs.rows(), rng::derive(settings.seed, rng::STREAM_EVAL, batch_index as u64))?;
    let targets = one_hot(labels, num_classes)?;
    let clamp = match settings.mode {
        EvalMode::UnsupervisedInference => None,
        EvalMode::LabelClamped => Some(&targets),
    };
    let run = run_inference(stack, inputs, &latents, clamp, &settings.infer)?;
    let scores = stack.readout_scores(run.latents.top())?;
    let k3 = 3.min(num_classes);
    let mut out = BatchEval { top1_hits: 0, top3_hits: 0, class_counts: alloc::vec![0; num_classes] };
    for (i, &label) in labels.iter().enumerate() {
        let row = scores.row(i);
        out.top1_hits += top_k_hit(row, label, 1) as usize;
        out.top3_hits += top_k_hit(row, label, k3) as usize;
        out.class_counts[label] += 1;
    }
    Ok(out)
}

/// Evaluates a frozen stack on `dataset`, batch by batch.
pub fn evaluate_with(stack: &GenerativeStack, settings: &EvalSettings, dataset: &Dataset) -> Result<EvalReport> {
    if dataset.num_classes != stack.output_dim() {
        return Err(PcnError::InvalidConfig(format!(
            "class-count mismatch: dataset has {} classes, readout has {} outputs",
            dataset.num_classes,
            stack.output_dim()
        )));
    }
    let plan = eval_plan(dataset, settings)?;
    let parts = batches(dataset, &plan)?
        .enumerate()
        .map(|(i, b)| evaluate_batch(stack, settings, &b.inputs, &b.labels, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_batches(settings.mode, stack.output_dim(), &parts))
}

/// [`evaluate_with`] using the inference settings, batch size, eval mode and
/// seed of a training config.
pub fn evaluate(stack: &GenerativeStack, config: &TrainConfig, dataset: &Dataset) -> Result<EvalReport> {
    evaluate_with(stack, &config.eval_settings(), dataset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::Activation;
    use crate::data::synth_blobs;
    use alloc::vec;

    #[test]
    fn top_k_examples() {
        assert!(top_k_hit(&[0.1, 0.9], 1, 1));
        assert!(!top_k_hit(&[0.5, 0.5], 1, 1));
        assert!(top_k_hit(&[0.5, 0.5], 0, 1));
        assert!(top_k_hit(&[3.0, 1.0, 2.0], 2, 2));
        assert!(!top_k_hit(&[3.0, 1.0, 2.0], 1, 2));
    }

    fn tiny_config(epochs: usize, t_infer: usize, t_learn: usize, batch: usize) -> TrainConfig {
        let model = ModelConfig::new(vec![4, 3, 2], 2, Activation::Tanh).unwrap();
        let mut c = TrainConfig::new(model, InferenceSettings::new(t_infer, 0.05).unwrap(), 0.01, batch, epochs, 3).unwrap();
        c.learn.t_learn = t_learn;
        c
    }

    #[test]
    fn trace_counts_one_batch() {
        let ds = synth_blobs(2, 2, 4, 2.0, 0).unwrap();
        let config = tiny_config(1, 1, 1, 4);
        let out = train(&config, &ds).unwrap();
        let steps: Vec<(usize, Phase)> = out.trace.records().iter().map(|r| (r.step_index, r.phase)).collect();
        assert_eq!(steps, vec![(0, Phase::Infer), (1, Phase::Infer), (2, Phase::Learn)]);
    }

    #[test]
    fn reference_settings_are_valid() {
        let c = TrainConfig::cifar10_reference();
        assert_eq!(c.batch_size, 500);
        assert_eq!(c.learn.t_learn, 500);
        assert_eq!(c.infer.t_infer, 50);
        assert_eq!(c.model.param_count(), 3_577_100);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn single_class_always_hits() {
        let model = ModelConfig::new(vec![4, 3], 1, Activation::Relu).unwrap();
        let stack = GenerativeStack::init(&model, 5).unwrap();
        let ds = Dataset::new(Matrix::filled(5, 4, 0.3), vec![0; 5], 1).unwrap();
        let config = TrainConfig::new(model, InferenceSettings::new(3, 0.1).unwrap(), 0.01, 2, 1, 0).unwrap();
        let report = evaluate(&stack, &config, &ds).unwrap();
        assert_eq!(report.top1, 1.0);
        assert_eq!(report.top3, 1.0);
        assert_eq!(report.samples, 5);
        assert_eq!(report.per_class_counts, vec![5]);
    }

    #[test]
    fn evaluation_is_frozen_and_deterministic() {
        let ds = synth_blobs(2, 6, 4, 2.0, 0).unwrap();
        let config = tiny_config(2, 5, 4, 4);
        let stack = train(&config, &ds).unwrap().stack;
        let before = stack.clone();
        let a = evaluate(&stack, &config, &ds).unwrap();
        let b = evaluate(&stack, &config, &ds).unwrap();
        assert_eq!(stack, before);
        assert_eq!(a, b);
        assert!(a.top3 >= a.top1);
        assert_eq!(a.per_class_counts.iter().sum::<usize>(), a.samples);
    }

    #[test]
    fn class_mismatch_is_rejected() {
        let ds = synth_blobs(3, 2, 4, 2.0, 0).unwrap();
        let config = tiny_config(1, 1, 1, 2);
        let stack = GenerativeStack::init(&config.model, 0).unwrap();
        assert!(evaluate(&stack, &config, &ds).is_err());
        assert!(train(&config, &ds).is_err());
    }

    #[test]
    fn divergence_is_located() {
        let ds = synth_blobs(2, 4, 4, 2.0, 0).unwrap();
        let mut config = tiny_config(1, 2000, 1, 4);
        config.model.activations = vec![Activation::Identity; 2];
        config.infer.eta_infer = 10.0;
        let err = train(&config, &ds).unwrap_err();
        assert_eq!((err.epoch, err.batch), (0, 0));
        assert!(matches!(err.error, PcnError::Divergence { phase: Phase::Infer, .. }));
        assert!(alloc::string::ToString::to_string(&err).contains("phase=infer"));
    }
}
