//! TOML training configuration.
//!
//! ```toml
//! seed = 0
//! epochs = 4
//! batch_size = 500
//! eval_mode = "unsupervised_inference"
//!
//! [model]
//! dims = [3072, 1000, 500, 10]
//! output_dim = 10
//! activation = "relu"          # or a per-layer list: activations = ["relu", "tanh", "relu"]
//! latent_init_scale = 1.0
//!
//! [infer]
//! steps = 50
//! rate = 0.05
//! # early_stop = { threshold = 1e-6, patience = 3 }
//!
//! [learn]
//! steps = 500                  # defaults to batch_size
//! rate = 0.005
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use pcn_core::{Activation, EarlyStop, EvalMode, InferenceSettings, LearnSettings, ModelConfig, PcnError, TrainConfig};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config syntax: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Invalid(#[from] PcnError),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    seed: u64,
    epochs: usize,
    batch_size: usize,
    eval_mode: Option<String>,
    model: ModelSection,
    infer: InferSection,
    learn: LearnSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    dims: Vec<usize>,
    output_dim: usize,
    activation: Option<String>,
    activations: Option<Vec<String>>,
    latent_init_scale: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InferSection {
    steps: usize,
    rate: f64,
    early_stop: Option<EarlyStopSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EarlyStopSection {
    threshold: f64,
    patience: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LearnSection {
    steps: Option<usize>,
    rate: f64,
}

pub fn parse(text: &str) -> Result<TrainConfig, ConfigError> {
    let file: FileConfig = toml::from_str(text)?;
    let layers = file.model.dims.len().saturating_sub(1);
    let activations = match (&file.model.activations, &file.model.activation) {
        (Some(_), Some(_)) => {
            return Err(PcnError::InvalidConfig("set either `activation` or `activations`, not both".into()).into())
        }
        (Some(list), None) => list.iter().map(|s| s.parse()).collect::<Result<Vec<Activation>, _>>()?,
        (None, Some(one)) => vec![one.parse()?; layers],
        (None, None) => vec![Activation::Relu; layers],
    };
    let model = ModelConfig {
        dims: file.model.dims,
        output_dim: file.model.output_dim,
        activations,
        latent_init_scale: file.model.latent_init_scale.unwrap_or(1.0),
    };
    let infer = InferenceSettings {
        t_infer: file.infer.steps,
        eta_infer: file.infer.rate,
        early_stop: file.infer.early_stop.map(|e| EarlyStop { threshold: e.threshold, patience: e.patience }),
    };
    let config = TrainConfig {
        model,
        infer,
        learn: LearnSettings { t_learn: file.learn.steps.unwrap_or(file.batch_size), eta_learn: file.learn.rate },
        batch_size: file.batch_size,
        epochs: file.epochs,
        seed: file.seed,
        eval_mode: match file.eval_mode {
            Some(m) => m.parse()?,
            None => EvalMode::default(),
        },
    };
    config.validate()?;
    Ok(config)
}

pub fn load(path: &Path) -> Result<TrainConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_owned(), source })?;
    parse(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAPER: &str = include_str!("../examples/cifar10-paper.cfg");

    #[test]
    fn shipped_reference_config_matches_builtin() {
        let c = parse(PAPER).unwrap();
        assert_eq!(c, TrainConfig::cifar10_reference());
    }

    #[test]
    fn per_layer_activations_and_defaults() {
        let text = r#"
            epochs = 1
            batch_size = 8
            [model]
            dims = [4, 3, 2]
            output_dim = 2
            activations = ["tanh", "identity"]
            [infer]
            steps = 5
            rate = 0.1
            early_stop = { threshold = 1e-6, patience = 2 }
            [learn]
            rate = 0.01
        "#;
        let c = parse(text).unwrap();
        assert_eq!(c.model.activations, vec![Activation::Tanh, Activation::Identity]);
        assert_eq!(c.learn.t_learn, 8);
        assert_eq!(c.seed, 0);
        assert_eq!(c.model.latent_init_scale, 1.0);
        assert_eq!(c.infer.early_stop, Some(EarlyStop { threshold: 1e-6, patience: 2 }));
        assert_eq!(c.eval_mode, EvalMode::UnsupervisedInference);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(matches!(parse("epochs = "), Err(ConfigError::Parse(_))));
        let missing_learn = "epochs = 1\nbatch_size = 2\n[model]\ndims=[2,1]\noutput_dim=1\n[infer]\nsteps=1\nrate=0.1\n";
        assert!(matches!(parse(missing_learn), Err(ConfigError::Parse(_))));
        let zero_rate = format!("{missing_learn}[learn]\nrate = 0.0\n");
        assert!(matches!(parse(&zero_rate), Err(ConfigError::Invalid(_))));
        let typo = format!("{missing_learn}[learn]\nrate = 0.1\nrat = 2\n");
        assert!(matches!(parse(&typo), Err(ConfigError::Parse(_))));
    }
}
