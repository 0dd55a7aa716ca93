//! Inference: gradient descent on the latents with the weights held fixed.
//!
//! Every step takes one snapshot of the network, computes all latent
//! gradients from it, and only then writes the new latents:
//!
//! ```text
//! G(l) = E(l) − H(l−1) · W(l−1),   X(l) ← X(l) − η_infer · G(l),   l = 1..=L
//! ```

use alloc::format;
use alloc::vec::Vec;

use crate::energy::total_energy;
use crate::error::{PcnError, Phase, Result};
use crate::matrix::Matrix;
use crate::model::{compute_errors, ErrorBundle, GenerativeStack, LatentBatch};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EarlyStop {
    /// Stop once the largest absolute latent update stays below this value…
    pub threshold: f64,
    /// …for this many consecutive steps.
    pub patience: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InferenceSettings {
    pub t_infer: usize,
    pub eta_infer: f64,
    pub early_stop: Option<EarlyStop>,
}

impl InferenceSettings {
    pub fn new(t_infer: usize, eta_infer: f64) -> Result<Self> {
        let s = InferenceSettings { t_infer, eta_infer, early_stop: None };
        s.validate()?;
        Ok(s)
    }

    pub fn with_early_stop(mut self, threshold: f64, patience: usize) -> Result<Self> {
        self.early_stop = Some(EarlyStop { threshold, patience });
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_infer == 0 {
            return Err(PcnError::InvalidConfig("t_infer must be at least 1".into()));
        }
        if !(self.eta_infer > 0.0 && self.eta_infer.is_finite()) {
            return Err(PcnError::InvalidConfig(format!("eta_infer must be positive, got {}", self.eta_infer)));
        }
        if let Some(es) = self.early_stop {
            if es.threshold.is_nan() || es.threshold <= 0.0 || es.patience == 0 {
                return Err(PcnError::InvalidConfig(format!(
                    "early stop needs threshold > 0 and patience ≥ 1, got {es:?}"
                )));
            }
        }
        Ok(())
    }
}

/// `G(l) = E(l) − H(l−1) · W(l−1)` for `l = 1..=L`, where `E(L)` is the
/// bundle's top error. Returned in layer order: element `l − 1` is `G(l)`.
pub fn latent_gradients(bundle: &ErrorBundle, stack: &GenerativeStack) -> Result<Vec<Matrix>> {
    let layers = stack.num_latent_layers();
    if bundle.errors.len() != layers || bundle.gain_mod.len() != layers {
        return Err(PcnError::InvalidConfig(format!(
            "bundle has {} layers, stack has {layers}",
            bundle.errors.len()
        )));
    }
    (1..=layers).map(|l| latent_gradient(bundle, stack, l)).collect()
}

fn latent_gradient(bundle: &ErrorBundle, stack: &GenerativeStack, l: usize) -> Result<Matrix> {
    let own = if l == stack.num_latent_layers() { &bundle.top_err } else { &bundle.errors[l] };
    let feedback = bundle.gain_mod[l - 1].matmul(&stack.weights[l - 1])?;
    own.sub(&feedback)
}

/// Result of a single synchronous step.
#[derive(Debug, Clone)]
pub struct InferenceStep {
    /// Latents after the update.
    pub latents: LatentBatch,
    /// Snapshot of the pre-update state the gradients were taken from.
    pub bundle: ErrorBundle,
    /// Largest absolute entry of `η · G` over every layer.
    pub max_update: f64,
}

/// One synchronous inference step: snapshot, all gradients, then all writes.
pub fn inference_step(
    stack: &GenerativeStack,
    input: &Matrix,
    latents: &LatentBatch,
    labels: Option<&Matrix>,
    eta_infer: f64,
) -> Result<InferenceStep> {
    let order: Vec<usize> = (1..=stack.num_latent_layers()).collect();
    step_impl(stack, input, latents, labels, eta_infer, &order, 1)
}

/// [`inference_step`] with the latent writes applied in `order` (a permutation
/// of `1..=L`). Because all reads come from the snapshot, the order cannot
/// change the result.
pub fn inference_step_ordered(
    stack: &GenerativeStack,
    input: &Matrix,
    latents: &LatentBatch,
    labels: Option<&Matrix>,
    eta_infer: f64,
    order: &[usize],
) -> Result<InferenceStep> {
    let layers = stack.num_latent_layers();
    let mut seen = alloc::vec![false; layers + 1];
    for &l in order {
        if l == 0 || l > layers || seen[l] {
            return Err(PcnError::InvalidConfig(format!("{order:?} is not a permutation of 1..={layers}")));
        }
        seen[l] = true;
    }
    if order.len() != layers {
        return Err(PcnError::InvalidConfig(format!("{order:?} is not a permutation of 1..={layers}")));
    }
    step_impl(stack, input, latents, labels, eta_infer, order, 1)
}

fn step_impl(
    stack: &GenerativeStack,
    input: &Matrix,
    latents: &LatentBatch,
    labels: Option<&Matrix>,
    eta_infer: f64,
    order: &[usize],
    step: usize,
) -> Result<InferenceStep> {
    if !(eta_infer >= 0.0 && eta_infer.is_finite()) {
        return Err(PcnError::InvalidConfig(format!("eta_infer must be finite and nonnegative, got {eta_infer}")));
    }
    let bundle = compute_errors(stack, input, latents, labels)?;
    let grads = order
        .iter()
        .map(|&l| latent_gradient(&bundle, stack, l).map(|g| (l, g)))
        .collect::<Result<Vec<_>>>()?;
    let mut next = latents.clone();
    let mut max_update = 0.0f64;
    for (l, g) in grads {
        max_update = max_update.max(eta_infer * g.max_abs());
        let x = &mut next.layers[l - 1];
        x.axpy(-eta_infer, &g)?;
        if !x.is_finite() {
            return Err(PcnError::Divergence { phase: Phase::Infer, step, layer: Some(l) });
        }
    }
    Ok(InferenceStep { latents: next, bundle, max_update })
}

#[derive(Debug, Clone)]
pub struct InferenceRun {
    pub latents: LatentBatch,
    /// Batch-averaged energy before the first update, then after each update;
    /// `steps_taken + 1` entries.
    pub energies: Vec<f64>,
    pub steps_taken: usize,
    /// Snapshot of the final latents.
    pub final_bundle: ErrorBundle,
}

/// Repeats [`inference_step`] up to `t_infer` times, stopping early when the
/// optional early-stop rule fires.
pub fn run_inference(
    stack: &GenerativeStack,
    input: &Matrix,
    latents: &LatentBatch,
    labels: Option<&Matrix>,
    settings: &InferenceSettings,
) -> Result<InferenceRun> {
    settings.validate()?;
    let order: Vec<usize> = (1..=stack.num_latent_layers()).collect();
    let mut current = latents.clone();
    let mut energies = Vec::with_capacity(settings.t_infer + 1);
    let mut quiet_steps = 0;
    let mut steps_taken = 0;
    for step in 1..=settings.t_infer {
        let out = step_impl(stack, input, &current, labels, settings.eta_infer, &order, step)?;
        energies.push(total_energy(&out.bundle));
        current = out.latents;
        steps_taken = step;
        if let Some(es) = settings.early_stop {
            if out.max_update < es.threshold {
                quiet_steps += 1;
                if quiet_steps >= es.patience {
                    break;
                }
            } else {
                quiet_steps = 0;
            }
        }
    }
    let final_bundle = compute_errors(stack, input, &current, labels)?;
    energies.push(total_energy(&final_bundle));
    Ok(InferenceRun { latents: current, energies, steps_taken, final_bundle })
}
