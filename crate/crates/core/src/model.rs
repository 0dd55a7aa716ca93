//! Network shape, weights, latent state and the snapshot of prediction errors
//! shared by inference and learning.
//!
//! Layer `l` is predicted top-down from layer `l + 1`:
//!
//! ```text
//! A(l)  = X(l+1) · W(l)ᵀ          (B × d_l)
//! X̂(l) = f(l)(A(l))
//! E(l)  = X(l) − X̂(l)
//! H(l)  = E(l) ⊙ f(l)'(A(l))
//! ```
//!
//! `X(0)` is the clamped input. With labels, a linear readout adds
//! `Ŷ = X(L) · Woutᵀ`, `Esup = Ŷ − Y`, and the top layer error `E(L) = Esup · Wout`.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::activation::Activation;
use crate::error::{PcnError, Result};
use crate::matrix::Matrix;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// `[d_0, d_1, …, d_L]`; `d_0` is the input width.
    pub dims: Vec<usize>,
    pub output_dim: usize,
    /// `activations[l]` is `f(l)`, used when predicting layer `l` from `l + 1`.
    pub activations: Vec<Activation>,
    /// Standard deviation of the Gaussian latent initialization.
    pub latent_init_scale: f64,
}

impl ModelConfig {
    /// Uniform activation across layers, unit latent init scale.
    pub fn new(dims: Vec<usize>, output_dim: usize, activation: Activation) -> Result<Self> {
        let layers = dims.len().saturating_sub(1);
        let config = ModelConfig {
            dims,
            output_dim,
            activations: alloc::vec![activation; layers],
            latent_init_scale: 1.0,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_latent_init_scale(mut self, scale: f64) -> Result<Self> {
        self.latent_init_scale = scale;
        self.validate()?;
        Ok(self)
    }

    pub fn with_activations(mut self, activations: Vec<Activation>) -> Result<Self> {
        self.activations = activations;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.len() < 2 {
            return Err(PcnError::InvalidConfig(format!(
                "need at least one latent layer, got dims {:?}",
                self.dims
            )));
        }
        if self.dims.contains(&0) {
            return Err(PcnError::InvalidConfig(format!("zero-width layer in dims {:?}", self.dims)));
        }
        if self.output_dim == 0 {
            return Err(PcnError::InvalidConfig("output_dim must be at least 1".into()));
        }
        if self.activations.len() != self.dims.len() - 1 {
            return Err(PcnError::InvalidConfig(format!(
                "expected {} activations, got {}",
                self.dims.len() - 1,
                self.activations.len()
            )));
        }
        if !(self.latent_init_scale >= 0.0 && self.latent_init_scale.is_finite()) {
            return Err(PcnError::InvalidConfig(format!(
                "latent_init_scale must be finite and nonnegative, got {}",
                self.latent_init_scale
            )));
        }
        Ok(())
    }

    /// Number of latent layers `L`.
    pub fn num_latent_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn top_dim(&self) -> usize {
        self.dims[self.dims.len() - 1]
    }

    /// Trainable parameters: every `W(l)` plus the readout.
    pub fn param_count(&self) -> usize {
        let generative: usize = self.dims.windows(2).map(|w| w[0] * w[1]).sum();
        generative + self.output_dim * self.top_dim()
    }
}

/// All learnable state: `weights[l]` is `W(l)` (`d_l × d_{l+1}`), `readout` is
/// `Wout` (`d_out × d_L`).
#[derive(Debug, Clone, PartialEq)]
pub struct GenerativeStack {
    pub weights: Vec<Matrix>,
    pub readout: Matrix,
    pub activations: Vec<Activation>,
}

impl GenerativeStack {
    /// Assembles a stack from explicit matrices, checking the chain of shapes.
    pub fn new(weights: Vec<Matrix>, readout: Matrix, activations: Vec<Activation>) -> Result<Self> {
        let stack = GenerativeStack { weights, readout, activations };
        stack.validate()?;
        Ok(stack)
    }

    /// Xavier-uniform initialization: entries i.i.d. on `±√(6 / (fan_in + fan_out))`,
    /// with `fan_in = cols` and `fan_out = rows`.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = rng::seeded(seed);
        let weights = config
            .dims
            .windows(2)
            .map(|w| xavier_uniform(w[0], w[1], &mut rng))
            .collect();
        let readout = xavier_uniform(config.output_dim, config.top_dim(), &mut rng);
        Ok(GenerativeStack { weights, readout, activations: config.activations.clone() })
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.is_empty() {
            return Err(PcnError::InvalidConfig("stack has no generative layers".into()));
        }
        if self.activations.len() != self.weights.len() {
            return Err(PcnError::InvalidConfig(format!(
                "{} activations for {} layers",
                self.activations.len(),
                self.weights.len()
            )));
        }
        for pair in self.weights.windows(2) {
            if pair[0].cols() != pair[1].rows() {
                return Err(PcnError::Dimension {
                    op: "stack chain",
                    left: pair[0].shape(),
                    right: pair[1].shape(),
                });
            }
        }
        let top = self.weights[self.weights.len() - 1].cols();
        if self.readout.cols() != top {
            return Err(PcnError::Dimension {
                op: "readout",
                left: self.readout.shape(),
                right: self.weights[self.weights.len() - 1].shape(),
            });
        }
        Ok(())
    }

    pub fn num_latent_layers(&self) -> usize {
        self.weights.len()
    }

    /// `[d_0, …, d_L]` implied by the weight shapes.
    pub fn dims(&self) -> Vec<usize> {
        let mut dims: Vec<usize> = self.weights.iter().map(Matrix::rows).collect();
        dims.push(self.weights[self.weights.len() - 1].cols());
        dims
    }

    pub fn output_dim(&self) -> usize {
        self.readout.rows()
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Matrix::len).sum::<usize>() + self.readout.len()
    }

    /// Linear readout `Ŷ = X(L) · Woutᵀ`.
    pub fn readout_scores(&self, top: &Matrix) -> Result<Matrix> {
        top.matmul_nt(&self.readout)
    }
}

/// Shorthand for [`GenerativeStack::init`].
pub fn init_weights(config: &ModelConfig, seed: u64) -> Result<GenerativeStack> {
    GenerativeStack::init(config, seed)
}

/// Shorthand for [`LatentBatch::init`].
pub fn init_latents(config: &ModelConfig, batch_size: usize, seed: u64) -> Result<LatentBatch> {
    LatentBatch::init(config, batch_size, seed)
}

fn xavier_uniform(rows: usize, cols: usize, rng: &mut rng::Rng) -> Matrix {
    let bound = libm::sqrt(6.0 / (rows + cols) as f64);
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-bound..=bound))
}

/// Per-sample latent rows `X(1..=L)`; `layers[l - 1]` is `X(l)` (`B × d_l`).
#[derive(Debug, Clone, PartialEq)]
pub struct LatentBatch {
    pub layers: Vec<Matrix>,
}

impl LatentBatch {
    /// i.i.d. `Normal(0, latent_init_scale²)` draws.
    pub fn init(config: &ModelConfig, batch_size: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        if batch_size == 0 {
            return Err(PcnError::InvalidConfig("batch size must be at least 1".into()));
        }
        let mut rng = rng::seeded(seed);
        let normal = Normal::new(0.0, config.latent_init_scale)
            .map_err(|e| PcnError::InvalidConfig(format!("latent init: {e}")))?;
        let layers = config.dims[1..]
            .iter()
            .map(|&d| Matrix::from_fn(batch_size, d, |_, _| normal.sample(&mut rng)))
            .collect();
        Ok(LatentBatch { layers })
    }

    pub fn batch_size(&self) -> usize {
        self.layers[0].rows()
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// `X(l)` for `l` in `1..=L`.
    pub fn layer(&self, l: usize) -> &Matrix {
        &self.layers[l - 1]
    }

    pub fn top(&self) -> &Matrix {
        &self.layers[self.layers.len() - 1]
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(Matrix::is_finite)
    }
}

/// One snapshot of the energy landscape for a batch, all quantities `B × width`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorBundle {
    /// `A(l)`, `l = 0..L`.
    pub preacts: Vec<Matrix>,
    /// `X̂(l)`.
    pub preds: Vec<Matrix>,
    /// `E(l) = X(l) − X̂(l)`.
    pub errors: Vec<Matrix>,
    /// `H(l) = E(l) ⊙ f'(A(l))`.
    pub gain_mod: Vec<Matrix>,
    /// `Ŷ`, present only with labels.
    pub sup_pred: Option<Matrix>,
    /// `Esup = Ŷ − Y`, present only with labels.
    pub sup_err: Option<Matrix>,
    /// `E(L)`: zero without labels, `Esup · Wout` with them.
    pub top_err: Matrix,
}

impl ErrorBundle {
    pub fn batch_size(&self) -> usize {
        self.top_err.rows()
    }

    pub fn is_supervised(&self) -> bool {
        self.sup_err.is_some()
    }
}

/// `A = x_above · Wᵀ`, `X̂ = f(A)`.
pub fn forward_layer(weights: &Matrix, x_above: &Matrix, act: Activation) -> Result<(Matrix, Matrix)> {
    if x_above.cols() != weights.cols() {
        return Err(PcnError::Dimension {
            op: "forward_layer",
            left: x_above.shape(),
            right: weights.shape(),
        });
    }
    let preact = x_above.matmul_nt(weights)?;
    let pred = act.apply_matrix(&preact);
    Ok((preact, pred))
}

pub(crate) fn check_batch_shapes(
    stack: &GenerativeStack,
    input: &Matrix,
    latents: &LatentBatch,
    labels: Option<&Matrix>,
) -> Result<()> {
    let dims = stack.dims();
    let layers = stack.num_latent_layers();
    if latents.num_layers() != layers {
        return Err(PcnError::InvalidConfig(format!(
            "{} latent layers for a {layers}-layer stack",
            latents.num_layers()
        )));
    }
    let batch = input.rows();
    if batch == 0 || input.cols() != dims[0] {
        return Err(PcnError::Dimension { op: "input", left: input.shape(), right: (batch, dims[0]) });
    }
    for (l, x) in latents.layers.iter().enumerate() {
        if x.shape() != (batch, dims[l + 1]) {
            return Err(PcnError::Dimension { op: "latent", left: x.shape(), right: (batch, dims[l + 1]) });
        }
    }
    if let Some(y) = labels {
        if y.shape() != (batch, stack.output_dim()) {
            return Err(PcnError::Dimension {
                op: "labels",
                left: y.shape(),
                right: (batch, stack.output_dim()),
            });
        }
    }
    Ok(())
}

/// Computes every prediction and error for one `(input, latents, stack)` snapshot.
pub fn compute_errors(
    stack: &GenerativeStack,
    input: &Matrix,
    latents: &LatentBatch,
    labels: Option<&Matrix>,
) -> Result<ErrorBundle> {
    check_batch_shapes(stack, input, latents, labels)?;
    let layers = stack.num_latent_layers();
    let mut preacts = Vec::with_capacity(layers);
    let mut preds = Vec::with_capacity(layers);
    let mut errors = Vec::with_capacity(layers);
    let mut gain_mod = Vec::with_capacity(layers);
    for l in 0..layers {
        let act = stack.activations[l];
        let (a, pred) = forward_layer(&stack.weights[l], latents.layer(l + 1), act)?;
        let target = if l == 0 { input } else { latents.layer(l) };
        let e = target.sub(&pred)?;
        let h = e.hadamard(&act.derivative_matrix(&a))?;
        preacts.push(a);
        preds.push(pred);
        errors.push(e);
        gain_mod.push(h);
    }
    let top = latents.top();
    let (sup_pred, sup_err, top_err) = match labels {
        Some(y) => {
            let y_hat = stack.readout_scores(top)?;
            let e_sup = y_hat.sub(y)?;
            let top_err = e_sup.matmul(&stack.readout)?;
            (Some(y_hat), Some(e_sup), top_err)
        }
        None => (None, None, Matrix::zeros(top.rows(), top.cols())),
    };
    Ok(ErrorBundle { preacts, preds, errors, gain_mod, sup_pred, sup_err, top_err })
}
