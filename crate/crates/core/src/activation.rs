use core::fmt;
use core::str::FromStr;

use alloc::format;

use crate::error::PcnError;
use crate::matrix::Matrix;

/// Elementwise layer nonlinearity `f` together with its derivative `f'`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Activation {
    #[default]
    Relu,
    Identity,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    a
                } else {
                    0.0
                }
            }
            Activation::Identity => a,
            Activation::Tanh => libm::tanh(a),
        }
    }

    /// `f'(a)`; relu uses the subgradient 0 at the kink.
    #[inline]
    pub fn derivative(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
            Activation::Tanh => {
                let t = libm::tanh(a);
                1.0 - t * t
            }
        }
    }

    pub fn apply_matrix(self, a: &Matrix) -> Matrix {
        a.map(|v| self.apply(v))
    }

    pub fn derivative_matrix(self, a: &Matrix) -> Matrix {
        a.map(|v| self.derivative(v))
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
            Activation::Tanh => "tanh",
        }
    }

    /// Stable numeric tag used by the checkpoint format.
    pub fn tag(self) -> u32 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::Tanh => 2,
        }
    }

    pub fn from_tag(tag: u32) -> Option<Self> {
        match tag {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Relu),
            2 => Some(Activation::Tanh),
            _ => None,
        }
    }

    pub const ALL: [Activation; 3] = [Activation::Relu, Activation::Identity, Activation::Tanh];
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = PcnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "relu" => Ok(Activation::Relu),
            "identity" | "linear" => Ok(Activation::Identity),
            "tanh" => Ok(Activation::Tanh),
            other => Err(PcnError::InvalidConfig(format!("unknown activation `{other}`"))),
        }
    }
}
