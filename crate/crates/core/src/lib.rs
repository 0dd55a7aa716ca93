//! Predictive coding network engine.
//!
//! A stack of generative weights predicts each layer from the one above; the
//! total squared prediction error (the energy) is minimized by alternating
//! gradient descent on the latent states (inference) and on the weights
//! (learning). Every update is local: it reads only the errors and states of
//! the two layers a weight connects.
//!
//! - [`model`]: shapes, weights, latents and the error snapshot
//! - [`inference`]: synchronous latent updates with optional early stopping
//! - [`learning`]: batch-averaged weight updates on frozen latents
//! - [`energy`]: total energy and per-step trajectories
//! - [`data`]: datasets, one-hot targets, seeded batching, synthetic blobs
//! - [`trainer`]: the mini-batch training loop and top-k evaluation
//! - [`verify`]: finite-difference and scalar reference oracles
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;

pub mod activation;
pub mod data;
pub mod energy;
pub mod error;
pub mod inference;
pub mod learning;
pub mod matrix;
pub mod model;
pub mod rng;
pub mod trainer;
pub mod verify;

pub use activation::Activation;
pub use data::{batches, one_hot, synth_blobs, Batch, BatchPlan, Dataset};
pub use energy::{total_energy, EnergyRecord, EnergyTrace};
pub use error::{PcnError, Phase, Result};
pub use inference::{
    inference_step, inference_step_ordered, latent_gradients, run_inference, EarlyStop, InferenceRun,
    InferenceSettings, InferenceStep,
};
pub use learning::{apply_updates, readout_gradient, run_learning, weight_gradients, LearnRun, LearnSettings};
pub use matrix::Matrix;
pub use model::{
    compute_errors, forward_layer, init_latents, init_weights, ErrorBundle, GenerativeStack, LatentBatch,
    ModelConfig,
};
pub use trainer::{
    evaluate, evaluate_batch, evaluate_with, top_k_hit, train, train_from, train_with, BatchEval, EpochSummary,
    EvalMode, EvalReport, EvalSettings, TrainConfig, TrainError, TrainOutcome,
};
