use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu(f64),
    Sigmoid,
    Tanh,
}

impl Default for Activation {
    fn default() -> Self {
        Activation::LeakyRelu(DEFAULT_LEAKY_SLOPE)
    }
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu(a) => {
                if x >= 0.0 {
                    x
                } else {
                    a * x
                }
            }
            Activation::Sigmoid => crate::svd_param::sigmoid(x),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative at pre-activation `x`. Kinks at 0 take the positive side.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if x >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(a) => {
                if x >= 0.0 {
                    1.0
                } else {
                    a
                }
            }
            Activation::Sigmoid => {
                let s = crate::svd_param::sigmoid(x);
                s * (1.0 - s)
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
        }
    }

    /// 1-Lipschitz and fixes the origin.
    pub fn is_contractive_relu(self) -> bool {
        match self {
            Activation::Relu => true,
            Activation::LeakyRelu(a) => a.abs() <= 1.0,
            _ => false,
        }
    }
}

pub fn activation(kind: Activation, x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| kind.apply(v)).collect()
}

/// `∂L/∂x` given pre-activations `x` and `g = ∂L/∂act(x)`.
pub fn activation_grad(kind: Activation, x: &[f64], g: &[f64]) -> Vec<f64> {
    x.iter().zip(g).map(|(&v, &gi)| kind.derivative(v) * gi).collect()
}

impl FromStr for Activation {
    type Err = Error;

    /// `identity`, `relu`, `leaky_relu`, `leaky_relu:<slope>`, `sigmoid`, `tanh`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "identity" | "linear" => return Ok(Activation::Identity),
            "relu" => return Ok(Activation::Relu),
            "leaky_relu" => return Ok(Activation::LeakyRelu(DEFAULT_LEAKY_SLOPE)),
            "sigmoid" => return Ok(Activation::Sigmoid),
            "tanh" => return Ok(Activation::Tanh),
            _ => {}
        }
        if let Some(slope) = s.strip_prefix("leaky_relu:") {
            let a: f64 = slope
                .parse()
                .map_err(|_| Error::Config(format!("bad leaky_relu slope '{slope}'")))?;
            if !a.is_finite() {
                return Err(Error::Config(format!("bad leaky_relu slope '{slope}'")));
            }
            return Ok(Activation::LeakyRelu(a));
        }
        Err(Error::Config(format!("unknown activation '{s}'")))
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Identity => write!(f, "identity"),
            Activation::Relu => write!(f, "relu"),
            Activation::LeakyRelu(a) => write!(f, "leaky_relu:{a}"),
            Activation::Sigmoid => write!(f, "sigmoid"),
            Activation::Tanh => write!(f, "tanh"),
        }
    }
}
