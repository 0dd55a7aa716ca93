//! Independent oracles for the fast paths: central finite differences of the
//! total energy, and a scalar re-implementation of the error snapshot that
//! uses no matrix kernels.
//!
//! Oracle agreement is measured entrywise as
//! `|analytic − numeric| / max(|analytic|, |numeric|, 1)`, so entries below
//! unit scale are compared absolutely. Random relu networks are resampled
//! until every preactivation sits at least [`RELU_KINK_MARGIN`] from zero.

use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::activation::Activation;
use crate::energy::total_energy;
use crate::error::{PcnError, Result};
use crate::inference::latent_gradients;
use crate::learning::{readout_gradient, weight_gradients};
use crate::matrix::Matrix;
use crate::model::{check_batch_shapes, compute_errors, ErrorBundle, GenerativeStack, LatentBatch};
use crate::rng;

/// Default central-difference step.
pub const FD_STEP: f64 = 1e-6;
/// Agreement threshold for analytic vs. numeric gradients.
pub const ORACLE_TOLERANCE: f64 = 1e-5;
/// Relu preactivations closer than this to zero are excluded from checks.
pub const RELU_KINK_MARGIN: f64 = 1e-4;

fn energy_of(
    stack: &GenerativeStack,
    input: &Matrix,
    latents: &LatentBatch,
    labels: Option<&Matrix>,
) -> Result<f64> {
    compute_errors(stack, input, latents, labels).map(|b| total_energy(&b))
}

/// Numerical gradient of the energy with respect to latent layer `layer`
/// (`1..=L`).
///
/// The inference rule moves each row down the gradient of that sample's own
/// energy, while [`total_energy`] is a batch mean; the central difference is
/// therefore multiplied by `B` to put it on the per-sample scale.
pub fn fd_latent_grad(
    stack: &GenerativeStack,
    input: &Matrix,
    latents: &LatentBatch,
    labels: Option<&Matrix>,
    layer: usize,
    h: f64,
) -> Result<Matrix> {
    check_batch_shapes(stack, input, latents, labels)?;
    if layer == 0 || layer > latents.num_layers() {
        return Err(PcnError::InvalidConfig(alloc::format!("latent layer {layer} out of range")));
    }
    let batch = latents.batch_size() as f64;
    let (rows, cols) = latents.layer(layer).shape();
    let mut probe = latents.clone();
    let mut out = Matrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let orig = probe.layers[layer - 1].get(i, j);
            probe.layers[layer - 1].set(i, j, orig + h);
            let up = energy_of(stack, input, &probe, labels)?;
            probe.layers[layer - 1].set(i, j, orig - h);
            let down = energy_of(stack, input, &probe, labels)?;
            probe.layers[layer - 1].set(i, j, orig);
            out.set(i, j, batch * (up - down) / (2.0 * h));
        }
    }
    Ok(out)
}

/// Which weight matrix to differentiate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightTarget {
    /// `W(l)`, `l` in `0..L`.
    Layer(usize),
    Readout,
}

/// Numerical gradient of the batch-averaged energy with respect to one weight
/// matrix, latents frozen.
pub fn fd_weight_grad(
    stack: &GenerativeStack,
    input: &Matrix,
    latents: &LatentBatch,
    labels: Option<&Matrix>,
    target: WeightTarget,
    h: f64,
) -> Result<Matrix> {
    check_batch_shapes(stack, input, latents, labels)?;
    let mut probe = stack.clone();
    let shape = match target {
        WeightTarget::Layer(l) if l < stack.weights.len() => stack.weights[l].shape(),
        WeightTarget::Layer(l) => {
            return Err(PcnError::InvalidConfig(alloc::format!("weight layer {l} out of range")))
        }
        WeightTarget::Readout => stack.readout.shape(),
    };
    let mut out = Matrix::zeros(shape.0, shape.1);
    for i in 0..shape.0 {
        for j in 0..shape.1 {
            let orig = target_mut(&mut probe, target).get(i, j);
            target_mut(&mut probe, target).set(i, j, orig + h);
            let up = energy_of(&probe, input, latents, labels)?;
            target_mut(&mut probe, target).set(i, j, orig - h);
            let down = energy_of(&probe, input, latents, labels)?;
            target_mut(&mut probe, target).set(i, j, orig);
            out.set(i, j, (up - down) / (2.0 * h));
        }
    }
    Ok(out)
}

fn target_mut(stack: &mut GenerativeStack, target: WeightTarget) -> &mut Matrix {
    match target {
        WeightTarget::Layer(l) => &mut stack.weights[l],
        WeightTarget::Readout => &mut stack.readout,
    }
}

/// Scalar, loop-only evaluation of the error snapshot straight from the
/// per-sample definitions.
pub fn naive_errors(
    stack: &GenerativeStack,
    input: &Matrix,
    latents: &LatentBatch,
    labels: Option<&Matrix>,
) -> Result<ErrorBundle> {
    check_batch_shapes(stack, input, latents, labels)?;
    let layers = stack.num_latent_layers();
    let batch = input.rows();
    let state = |l: usize, b: usize, i: usize| if l == 0 { input.get(b, i) } else { latents.layer(l).get(b, i) };
    let mut preacts = Vec::with_capacity(layers);
    let mut preds = Vec::with_capacity(layers);
    let mut errors = Vec::with_capacity(layers);
    let mut gain_mod = Vec::with_capacity(layers);
    for l in 0..layers {
        let w = &stack.weights[l];
        let f = stack.activations[l];
        let (rows, cols) = w.shape();
        let mut a = Matrix::zeros(batch, rows);
        let mut p = Matrix::zeros(batch, rows);
        let mut e = Matrix::zeros(batch, rows);
        let mut g = Matrix::zeros(batch, rows);
        for b in 0..batch {
            for i in 0..rows {
                let mut acc = 0.0;
                for j in 0..cols {
                    acc += w.get(i, j) * state(l + 1, b, j);
                }
                let pred = f.apply(acc);
                let err = state(l, b, i) - pred;
                a.set(b, i, acc);
                p.set(b, i, pred);
                e.set(b, i, err);
                g.set(b, i, err * f.derivative(acc));
            }
        }
        preacts.push(a);
        preds.push(p);
        errors.push(e);
        gain_mod.push(g);
    }
    let top_dim = stack.readout.cols();
    let (sup_pred, sup_err, top_err) = match labels {
        Some(y) => {
            let out_dim = stack.readout.rows();
            let mut y_hat = Matrix::zeros(batch, out_dim);
            let mut e_sup = Matrix::zeros(batch, out_dim);
            let mut top = Matrix::zeros(batch, top_dim);
            for b in 0..batch {
                for k in 0..out_dim {
                    let mut acc = 0.0;
                    for j in 0..top_dim {
                        acc += stack.readout.get(k, j) * latents.top().get(b, j);
                    }
                    y_hat.set(b, k, acc);
                    e_sup.set(b, k, acc - y.get(b, k));
                }
                for j in 0..top_dim {
                    let mut acc = 0.0;
                    for k in 0..out_dim {
                        acc += stack.readout.get(k, j) * e_sup.get(b, k);
                    }
                    top.set(b, j, acc);
                }
            }
            (Some(y_hat), Some(e_sup), top)
        }
        None => (None, None, Matrix::zeros(batch, top_dim)),
    };
    Ok(ErrorBundle { preacts, preds, errors, gain_mod, sup_pred, sup_err, top_err })
}

/// Entrywise scaled error, see the module docs.
pub fn scaled_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1.0)
}

/// Largest [`scaled_error`] between two equally shaped matrices, with the
/// offending `(row, col)`.
pub fn max_scaled_error(analytic: &Matrix, numeric: &Matrix) -> Result<(f64, (usize, usize))> {
    if analytic.shape() != numeric.shape() {
        return Err(PcnError::Dimension { op: "max_scaled_error", left: analytic.shape(), right: numeric.shape() });
    }
    let mut worst = (0.0, (0, 0));
    for i in 0..analytic.rows() {
        for j in 0..analytic.cols() {
            let e = scaled_error(analytic.get(i, j), numeric.get(i, j));
            if e > worst.0 || e.is_nan() {
                worst = (e, (i, j));
            }
        }
    }
    Ok(worst)
}

/// A small random network plus one batch of state, for oracle checks.
#[derive(Debug, Clone)]
pub struct RandomNet {
    pub stack: GenerativeStack,
    pub input: Matrix,
    pub latents: LatentBatch,
    pub labels: Option<Matrix>,
}

impl RandomNet {
    /// Draws `L ∈ {1,2,3}`, widths in `1..=8`, `B ∈ 1..=4`, a random activation
    /// per layer and a random mode. Relu kinks are avoided by resampling.
    pub fn generate(seed: u64) -> Self {
        let mut rng = rng::seeded(seed);
        let layers = rng.random_range(1..=3usize);
        let dims: Vec<usize> = (0..=layers).map(|_| rng.random_range(1..=8usize)).collect();
        let out_dim = rng.random_range(1..=4usize);
        let batch = rng.random_range(1..=4usize);
        let activations: Vec<Activation> = (0..layers).map(|_| Activation::ALL[rng.random_range(0..3usize)]).collect();
        let supervised = rng.random_bool(0.5);
        Self::generate_shaped(&mut rng, &dims, out_dim, batch, &activations, supervised)
    }

    /// Same as [`RandomNet::generate`] with every shape fixed by the caller.
    pub fn generate_shaped(
        rng: &mut rng::Rng,
        dims: &[usize],
        out_dim: usize,
        batch: usize,
        activations: &[Activation],
        supervised: bool,
    ) -> Self {
        loop {
            let weights: Vec<Matrix> = dims
                .windows(2)
                .map(|w| Matrix::from_fn(w[0], w[1], |_, _| rng.random_range(-1.0..1.0)))
                .collect();
            let readout = Matrix::from_fn(out_dim, dims[dims.len() - 1], |_, _| rng.random_range(-1.0..1.0));
            let stack = GenerativeStack::new(weights, readout, activations.to_vec()).expect("consistent shapes");
            let input = Matrix::from_fn(batch, dims[0], |_, _| rng.random_range(0.0..1.0));
            let latents = LatentBatch {
                layers: dims[1..]
                    .iter()
                    .map(|&d| Matrix::from_fn(batch, d, |_, _| StandardNormal.sample(rng)))
                    .collect(),
            };
            let labels = supervised.then(|| {
                let mut y = Matrix::zeros(batch, out_dim);
                for b in 0..batch {
                    y.set(b, rng.random_range(0..out_dim), 1.0);
                }
                y
            });
            let net = RandomNet { stack, input, latents, labels };
            if net.clear_of_kinks() {
                return net;
            }
        }
    }

    fn clear_of_kinks(&self) -> bool {
        let bundle = compute_errors(&self.stack, &self.input, &self.latents, self.labels.as_ref()).expect("valid net");
        bundle
            .preacts
            .iter()
            .zip(&self.stack.activations)
            .filter(|(_, &act)| act == Activation::Relu)
            .all(|(a, _)| a.as_slice().iter().all(|v| v.abs() >= RELU_KINK_MARGIN))
    }

    pub fn bundle(&self) -> Result<ErrorBundle> {
        compute_errors(&self.stack, &self.input, &self.latents, self.labels.as_ref())
    }
}

/// Analytic gradients to be checked against the oracles.
#[derive(Debug, Clone)]
pub struct AnalyticGradients {
    pub latent: Vec<Matrix>,
    pub weight: Vec<Matrix>,
    pub readout: Option<Matrix>,
}

/// The engine's own gradients for `net`.
pub fn engine_gradients(net: &RandomNet) -> Result<AnalyticGradients> {
    let bundle = net.bundle()?;
    Ok(AnalyticGradients {
        latent: latent_gradients(&bundle, &net.stack)?,
        weight: weight_gradients(&bundle, &net.latents)?,
        readout: match net.labels {
            Some(_) => Some(readout_gradient(&bundle, &net.latents)?),
            None => None,
        },
    })
}

/// Where a worst-case disagreement was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientSite {
    /// Latent layer `1..=L`.
    Latent(usize),
    /// Generative weight `W(l)`.
    Weight(usize),
    Readout,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discrepancy {
    pub error: f64,
    pub site: GradientSite,
    pub entry: (usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OracleReport {
    pub max_latent: f64,
    pub max_weight: f64,
    pub max_readout: f64,
    pub worst: Option<Discrepancy>,
}

impl OracleReport {
    pub fn max_error(&self) -> f64 {
        self.max_latent.max(self.max_weight).max(self.max_readout)
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_error() < tolerance
    }

    /// Folds another report into this one, keeping the worst discrepancy.
    pub fn merge(&mut self, other: &OracleReport) {
        self.max_latent = self.max_latent.max(other.max_latent);
        self.max_weight = self.max_weight.max(other.max_weight);
        self.max_readout = self.max_readout.max(other.max_readout);
        if let Some(w) = other.worst {
            if self.worst.is_none_or(|cur| w.error > cur.error) {
                self.worst = Some(w);
            }
        }
    }

    fn note(&mut self, site: GradientSite, (error, entry): (f64, (usize, usize))) {
        let slot = match site {
            GradientSite::Latent(_) => &mut self.max_latent,
            GradientSite::Weight(_) => &mut self.max_weight,
            GradientSite::Readout => &mut self.max_readout,
        };
        *slot = slot.max(error);
        if self.worst.is_none_or(|w| error > w.error) {
            self.worst = Some(Discrepancy { error, site, entry });
        }
    }
}

/// Compares `analytic` against central differences (step `h`) at every latent,
/// weight and (in supervised mode) readout entry of `net`.
pub fn check_gradients(net: &RandomNet, analytic: &AnalyticGradients, h: f64) -> Result<OracleReport> {
    let mut report = OracleReport::default();
    let labels = net.labels.as_ref();
    for (i, g) in analytic.latent.iter().enumerate() {
        let l = i + 1;
        let fd = fd_latent_grad(&net.stack, &net.input, &net.latents, labels, l, h)?;
        report.note(GradientSite::Latent(l), max_scaled_error(g, &fd)?);
    }
    for (l, g) in analytic.weight.iter().enumerate() {
        let fd = fd_weight_grad(&net.stack, &net.input, &net.latents, labels, WeightTarget::Layer(l), h)?;
        report.note(GradientSite::Weight(l), max_scaled_error(g, &fd)?);
    }
    if let Some(g) = &analytic.readout {
        let fd = fd_weight_grad(&net.stack, &net.input, &net.latents, labels, WeightTarget::Readout, h)?;
        report.note(GradientSite::Readout, max_scaled_error(g, &fd)?);
    }
    Ok(report)
}

/// Runs the oracle suite over `trials` random networks derived from `seed`,
/// using `gradients` to produce the analytic side.
pub fn oracle_suite(
    seed: u64,
    trials: usize,
    gradients: impl Fn(&RandomNet) -> Result<AnalyticGradients>,
) -> Result<OracleReport> {
    let mut total = OracleReport::default();
    for t in 0..trials {
        let net = RandomNet::generate(rng::derive(seed, 0x4f52_4143_4c45, t as u64));
        let report = check_gradients(&net, &gradients(&net)?, FD_STEP)?;
        total.merge(&report);
    }
    Ok(total)
}

/// Largest absolute difference between two bundles across every field.
pub fn bundle_max_abs_diff(a: &ErrorBundle, b: &ErrorBundle) -> f64 {
    fn diff(x: &Matrix, y: &Matrix) -> f64 {
        if x.shape() != y.shape() {
            return f64::INFINITY;
        }
        x.as_slice().iter().zip(y.as_slice()).fold(0.0, |m, (p, q)| m.max((p - q).abs()))
    }
    fn diff_all(x: &[Matrix], y: &[Matrix]) -> f64 {
        if x.len() != y.len() {
            return f64::INFINITY;
        }
        x.iter().zip(y).fold(0.0, |m, (p, q)| m.max(diff(p, q)))
    }
    fn diff_opt(x: &Option<Matrix>, y: &Option<Matrix>) -> f64 {
        match (x, y) {
            (Some(p), Some(q)) => diff(p, q),
            (None, None) => 0.0,
            _ => f64::INFINITY,
        }
    }
    let parts = [
        diff_all(&a.preacts, &b.preacts),
        diff_all(&a.preds, &b.preds),
        diff_all(&a.errors, &b.errors),
        diff_all(&a.gain_mod, &b.gain_mod),
        diff_opt(&a.sup_pred, &b.sup_pred),
        diff_opt(&a.sup_err, &b.sup_err),
        diff(&a.top_err, &b.top_err),
    ];
    parts.into_iter().fold(0.0, f64::max)
}

/// Flips the sign of every gradient; a deliberately broken build for
/// exercising the oracle's sensitivity.
pub fn sign_flipped(grads: AnalyticGradients) -> AnalyticGradients {
    let neg = |mut m: Matrix| {
        m.scale(-1.0);
        m
    };
    AnalyticGradients {
        latent: grads.latent.into_iter().map(neg).collect(),
        weight: grads.weight.into_iter().map(neg).collect(),
        readout: grads.readout.map(neg),
    }
}
