//! Feed-forward layer `out = act(W·h + b)` with an SVD-parameterized,
//! possibly rectangular `W`.

use super::activation::Activation;
use super::spectral::{PreparedSpectral, SpectralGrads, SpectralTape};
use crate::diagnostics::flops::FlopCounter;
use crate::error::{invalid, Result};
use crate::svd_param::SpectralMatrix;

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralDenseLayer {
    pub weights: SpectralMatrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseTape {
    pub pre: Vec<f64>,
    pub spectral: SpectralTape,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseGrads {
    pub weights: SpectralGrads,
    pub bias: Vec<f64>,
    /// `∂L/∂h`.
    pub input: Vec<f64>,
}

impl SpectralDenseLayer {
    pub fn new(weights: SpectralMatrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(invalid(format!("bias length {} != {}", bias.len(), weights.rows())));
        }
        Ok(SpectralDenseLayer { weights, bias, activation })
    }

    pub fn forward(&self, h: &[f64]) -> Result<(Vec<f64>, DenseTape)> {
        let mut flops = FlopCounter::new();
        let prep = PreparedSpectral::new(&self.weights, &mut flops);
        let (mut pre, spectral) = prep.forward(h, &mut flops)?;
        for (p, b) in pre.iter_mut().zip(&self.bias) {
            *p += b;
        }
        let out = pre.iter().map(|&v| self.activation.apply(v)).collect();
        Ok((out, DenseTape { pre, spectral }))
    }

    /// `g = ∂L/∂out`.
    pub fn backward(&self, tape: &DenseTape, g: &[f64]) -> Result<DenseGrads> {
        if g.len() != self.weights.rows() || tape.pre.len() != g.len() {
            return Err(invalid("gradient does not match layer output"));
        }
        let dpre: Vec<f64> = tape.pre.iter().zip(g).map(|(&p, &gi)| self.activation.derivative(p) * gi).collect();
        let mut flops = FlopCounter::new();
        let prep = PreparedSpectral::new(&self.weights, &mut flops);
        let weights = prep.backward(&tape.spectral, &dpre, &mut flops)?;
        let input = weights.dh.clone();
        Ok(DenseGrads { weights, bias: dpre, input })
    }
}
