//! Learning: batch-averaged weight descent with the latents frozen.
//!
//! ```text
//! G_W(l)  = −(1/B) · H(l)ᵀ · X(l+1)
//! G_out   =  (1/B) · Esupᵀ · X(L)
//! ```
//!
//! Each gradient reads only the two layers the weight connects.

use alloc::format;
use alloc::vec::Vec;

use crate::energy::total_energy;
use crate::error::{PcnError, Phase, Result};
use crate::matrix::Matrix;
use crate::model::{compute_errors, ErrorBundle, GenerativeStack, LatentBatch};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnSettings {
    pub t_learn: usize,
    pub eta_learn: f64,
}

impl LearnSettings {
    pub fn new(t_learn: usize, eta_learn: f64) -> Result<Self> {
        let s = LearnSettings { t_learn, eta_learn };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_learn == 0 {
            return Err(PcnError::InvalidConfig("t_learn must be at least 1".into()));
        }
        if !(self.eta_learn > 0.0 && self.eta_learn.is_finite()) {
            return Err(PcnError::InvalidConfig(format!("eta_learn must be positive, got {}", self.eta_learn)));
        }
        Ok(())
    }
}

/// `G_W(l) = −(1/B) · H(l)ᵀ · X(l+1)` for `l = 0..L`.
pub fn weight_gradients(bundle: &ErrorBundle, latents: &LatentBatch) -> Result<Vec<Matrix>> {
    if bundle.gain_mod.len() != latents.num_layers() {
        return Err(PcnError::InvalidConfig(format!(
            "bundle has {} layers, latents have {}",
            bundle.gain_mod.len(),
            latents.num_layers()
        )));
    }
    bundle
        .gain_mod
        .iter()
        .enumerate()
        .map(|(l, h)| weight_gradient(h, latents.layer(l + 1)))
        .collect()
}

/// Gradient for a single generative weight from its gain-modulated error and
/// the latent layer above it.
pub fn weight_gradient(gain_mod: &Matrix, x_above: &Matrix) -> Result<Matrix> {
    let mut g = gain_mod.matmul_tn(x_above)?;
    g.scale(-1.0 / gain_mod.rows() as f64);
    Ok(g)
}

/// `G_out = (1/B) · Esupᵀ · X(L)`.
pub fn readout_gradient(bundle: &ErrorBundle, latents: &LatentBatch) -> Result<Matrix> {
    let e_sup = bundle
        .sup_err
        .as_ref()
        .ok_or(PcnError::Mode("readout gradient needs a supervised bundle"))?;
    let mut g = e_sup.matmul_tn(latents.top())?;
    g.scale(1.0 / e_sup.rows() as f64);
    Ok(g)
}

/// Plain gradient step `W ← W − η · G` on every provided matrix.
pub fn apply_updates(
    stack: &GenerativeStack,
    grads: &[Matrix],
    readout_grad: Option<&Matrix>,
    eta_learn: f64,
) -> Result<GenerativeStack> {
    let mut next = stack.clone();
    apply_in_place(&mut next, grads, readout_grad, eta_learn, 1)?;
    Ok(next)
}

fn apply_in_place(
    stack: &mut GenerativeStack,
    grads: &[Matrix],
    readout_grad: Option<&Matrix>,
    eta_learn: f64,
    step: usize,
) -> Result<()> {
    if grads.len() != stack.weights.len() {
        return Err(PcnError::InvalidConfig(format!(
            "{} gradients for {} weight matrices",
            grads.len(),
            stack.weights.len()
        )));
    }
    for (w, g) in stack.weights.iter().zip(grads) {
        if w.shape() != g.shape() {
            return Err(PcnError::Dimension { op: "apply_updates", left: w.shape(), right: g.shape() });
        }
    }
    if let Some(g) = readout_grad {
        if g.shape() != stack.readout.shape() {
            return Err(PcnError::Dimension { op: "apply_updates", left: stack.readout.shape(), right: g.shape() });
        }
    }
    for (l, (w, g)) in stack.weights.iter_mut().zip(grads).enumerate() {
        w.axpy(-eta_learn, g)?;
        if !w.is_finite() {
            return Err(PcnError::Divergence { phase: Phase::Learn, step, layer: Some(l) });
        }
    }
    if let Some(g) = readout_grad {
        stack.readout.axpy(-eta_learn, g)?;
        if !stack.readout.is_finite() {
            return Err(PcnError::Divergence { phase: Phase::Learn, step, layer: None });
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct LearnRun {
    pub stack: GenerativeStack,
    /// Batch-averaged energy after each of the `t_learn` updates.
    pub energies: Vec<f64>,
}

/// `t_learn` weight updates on a frozen latent configuration. Errors are
/// recomputed under the current weights before every update; the readout is
/// trained only when labels are given.
pub fn run_learning(
    stack: &GenerativeStack,
    input: &Matrix,
    latents: &LatentBatch,
    labels: Option<&Matrix>,
    settings: &LearnSettings,
) -> Result<LearnRun> {
    settings.validate()?;
    let mut current = stack.clone();
    let mut energies = Vec::with_capacity(settings.t_learn);
    let mut bundle = compute_errors(&current, input, latents, labels)?;
    for step in 1..=settings.t_learn {
        let grads = weight_gradients(&bundle, latents)?;
        let readout = match labels {
            Some(_) => Some(readout_gradient(&bundle, latents)?),
            None => None,
        };
        apply_in_place(&mut current, &grads, readout.as_ref(), settings.eta_learn, step)?;
        bundle = compute_errors(&current, input, latents, labels)?;
        energies.push(total_energy(&bundle));
    }
    Ok(LearnRun { stack: current, energies })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::Activation;
    use alloc::vec;

    fn one_layer(w: &[[f64; 1]], act: Activation) -> GenerativeStack {
        GenerativeStack::new(vec![Matrix::from_rows(w)], Matrix::zeros(1, 1), vec![act]).unwrap()
    }

    fn latent(v: f64) -> LatentBatch {
        LatentBatch { layers: vec![Matrix::from_rows(&[[v]])] }
    }

    #[test]
    fn weight_gradient_examples() {
        let stack = one_layer(&[[1.0], [2.0]], Activation::Identity);
        let b = compute_errors(&stack, &Matrix::from_rows(&[[4.0, 5.0]]), &latent(3.0), None).unwrap();
        assert_eq!(weight_gradients(&b, &latent(3.0)).unwrap(), vec![Matrix::from_rows(&[[-3.0], [3.0]])]);

        let stack = one_layer(&[[-1.0], [2.0]], Activation::Relu);
        let b = compute_errors(&stack, &Matrix::from_rows(&[[1.0, 1.0]]), &latent(1.0), None).unwrap();
        let g = weight_gradients(&b, &latent(1.0)).unwrap();
        assert_eq!(g[0].as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn readout_gradient_examples() {
        let stack = one_layer(&[[0.0], [0.0]], Activation::Identity);
        let stack = GenerativeStack { readout: Matrix::from_rows(&[[1.0]]), ..stack };
        let input = Matrix::zeros(1, 2);
        // ŷ = 3, y = 1 → ε_sup = 2.
        let y = Matrix::from_rows(&[[1.0]]);
        let b = compute_errors(&stack, &input, &latent(3.0), Some(&y)).unwrap();
        assert_eq!(readout_gradient(&b, &latent(3.0)).unwrap(), Matrix::from_rows(&[[6.0]]));

        let exact = Matrix::from_rows(&[[3.0]]);
        let b = compute_errors(&stack, &input, &latent(3.0), Some(&exact)).unwrap();
        assert_eq!(readout_gradient(&b, &latent(3.0)).unwrap(), Matrix::zeros(1, 1));

        let doubled = LatentBatch { layers: vec![Matrix::from_rows(&[[3.0], [3.0]])] };
        let y2 = Matrix::from_rows(&[[1.0], [1.0]]);
        let b = compute_errors(&stack, &Matrix::zeros(2, 2), &doubled, Some(&y2)).unwrap();
        assert_eq!(readout_gradient(&b, &doubled).unwrap(), Matrix::from_rows(&[[6.0]]));

        let unsup = compute_errors(&stack, &input, &latent(3.0), None).unwrap();
        assert!(matches!(readout_gradient(&unsup, &latent(3.0)), Err(PcnError::Mode(_))));
    }

    #[test]
    fn apply_updates_examples() {
        let stack = one_layer(&[[1.0], [2.0]], Activation::Identity);
        let g = vec![Matrix::from_rows(&[[-3.0], [3.0]])];
        let next = apply_updates(&stack, &g, None, 0.1).unwrap();
        assert!((next.weights[0].get(0, 0) - 1.3).abs() < 1e-15);
        assert!((next.weights[0].get(1, 0) - 1.7).abs() < 1e-15);

        assert_eq!(apply_updates(&stack, &[Matrix::zeros(2, 1)], None, 0.1).unwrap(), stack);
        assert_eq!(apply_updates(&stack, &g, None, 0.0).unwrap(), stack);
        assert!(apply_updates(&stack, &[Matrix::zeros(1, 2)], None, 0.1).is_err());
        assert!(apply_updates(&stack, &g, Some(&Matrix::zeros(2, 2)), 0.1).is_err());
    }

    #[test]
    fn learning_at_exact_fit_changes_nothing() {
        let stack = one_layer(&[[1.0], [2.0]], Activation::Identity);
        let input = Matrix::from_rows(&[[3.0, 6.0]]);
        let run = run_learning(&stack, &input, &latent(3.0), None, &LearnSettings::new(7, 0.5).unwrap()).unwrap();
        assert_eq!(run.stack, stack);
        assert_eq!(run.energies, vec![0.0; 7]);
    }

    #[test]
    fn single_learning_step_is_one_gradient_update() {
        let stack = one_layer(&[[1.0], [2.0]], Activation::Identity);
        let input = Matrix::from_rows(&[[4.0, 5.0]]);
        let run = run_learning(&stack, &input, &latent(3.0), None, &LearnSettings::new(1, 0.1).unwrap()).unwrap();
        let g = vec![Matrix::from_rows(&[[-3.0], [3.0]])];
        assert_eq!(run.stack, apply_updates(&stack, &g, None, 0.1).unwrap());
        assert_eq!(run.energies.len(), 1);
    }

    #[test]
    fn learning_divergence_is_reported() {
        let stack = one_layer(&[[1.0], [2.0]], Activation::Identity);
        let input = Matrix::from_rows(&[[4.0, 5.0]]);
        let err = run_learning(&stack, &input, &latent(3.0), None, &LearnSettings::new(2000, 5.0).unwrap())
            .unwrap_err();
        assert!(matches!(err, PcnError::Divergence { phase: Phase::Learn, layer: Some(0), .. }));
    }
}
