use core::fmt;

use alloc::string::String;

/// Which phase of a batch cycle was running when something went wrong.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Infer,
    Learn,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Infer => "infer",
            Phase::Learn => "learn",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Errors produced by the engine.
#[derive(Debug, Clone, PartialEq)]
pub enum PcnError {
    /// Two operands had incompatible shapes.
    Dimension {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    /// A configuration or argument violated its contract.
    InvalidConfig(String),
    /// An operation needing supervised quantities got an unsupervised bundle.
    Mode(&'static str),
    /// A label index was outside `0..num_classes`.
    LabelOutOfRange { index: usize, label: usize, num_classes: usize },
    /// An update produced NaN or infinity.
    Divergence {
        phase: Phase,
        /// 1-based update step at which the non-finite value appeared.
        step: usize,
        /// Latent layer (1..=L), generative weight layer (0..L), or `None` for the readout.
        layer: Option<usize>,
    },
    /// Energy trace records were appended out of order.
    TraceOrder(String),
}

pub type Result<T> = core::result::Result<T, PcnError>;

impl fmt::Display for PcnError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PcnError::Dimension { op, left, right } => write!(
                f,
                "dimension mismatch in {op}: {}x{} vs {}x{}",
                left.0, left.1, right.0, right.1
            ),
            PcnError::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            PcnError::Mode(msg) => write!(f, "mode error: {msg}"),
            PcnError::LabelOutOfRange { index, label, num_classes } => write!(
                f,
                "label {label} at position {index} is out of range for {num_classes} classes"
            ),
            PcnError::Divergence { phase, step, layer } => match layer {
                Some(l) => write!(f, "numeric divergence: phase={phase} step={step} layer={l}"),
                None => write!(f, "numeric divergence: phase={phase} step={step} layer=readout"),
            },
            PcnError::TraceOrder(msg) => write!(f, "energy trace ordering violated: {msg}"),
        }
    }
}

impl core::error::Error for PcnError {}
