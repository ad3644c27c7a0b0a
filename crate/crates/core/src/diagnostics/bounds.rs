//! Margin-based generalization bound of a recurrent classifier and the
//! hidden-state growth inequality it relies on.

use crate::diagnostics::svd::jacobi_svd;
use crate::error::{invalid, Error, Result};
use crate::layers::rnn::{rnn_step, RnnCell};
use crate::matrix::{norm, Matrix};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundInputs {
    pub w_spectral: f64,
    pub m_spectral: f64,
    pub y_spectral: f64,
    pub w_frobenius: f64,
    pub m_frobenius: f64,
    pub y_frobenius: f64,
    /// Bound `B` on every input norm.
    pub input_bound: f64,
    pub depth: usize,
    pub width: usize,
    /// Classification margin `γ`.
    pub margin: f64,
}

impl BoundInputs {
    /// Norms of the transition, input and output matrices of `cell`.
    pub fn from_cell(cell: &RnnCell, input_bound: f64, depth: usize, margin: f64) -> Result<Self> {
        let spec = |m: &Matrix| -> Result<f64> { Ok(jacobi_svd(m)?.spectral_norm()) };
        let w = cell.transition_matrix();
        let inp = BoundInputs {
            w_spectral: spec(&w)?,
            m_spectral: spec(&cell.input_weights)?,
            y_spectral: spec(&cell.output_weights)?,
            w_frobenius: w.frobenius(),
            m_frobenius: cell.input_weights.frobenius(),
            y_frobenius: cell.output_weights.frobenius(),
            input_bound,
            depth,
            width: cell.hidden(),
            margin,
        };
        inp.validate()?;
        Ok(inp)
    }

    pub fn validate(&self) -> Result<()> {
        let norms = [
            self.w_spectral,
            self.m_spectral,
            self.y_spectral,
            self.w_frobenius,
            self.m_frobenius,
            self.y_frobenius,
            self.input_bound,
        ];
        if norms.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid("norms and input bound must be finite and non-negative"));
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return Err(invalid(format!("margin must be positive, got {}", self.margin)));
        }
        if self.depth == 0 || self.width == 0 {
            return Err(invalid("depth and width must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundValue {
    pub value: f64,
    /// `n = 1`: the `ln n` factor is zero and the bound says nothing.
    pub degenerate: bool,
}

/// `B²t²n·ln n·max{‖W‖₂^{2t−2}, 1}·‖M‖₂²‖Y‖₂²·(t²‖W‖_F² + ‖M‖_F²/‖M‖₂² + ‖Y‖_F²/‖Y‖₂²)/γ²`.
///
/// Evaluated with the ratios multiplied out, so a zero `‖M‖₂` or `‖Y‖₂`
/// gives the limit value instead of NaN.
pub fn generalization_bound(inp: &BoundInputs) -> Result<BoundValue> {
    inp.validate()?;
    Ok(evaluate(inp, inp.w_spectral))
}

/// Same bound with `‖W‖₂` replaced by `1 + r`, the largest value allowed by
/// a singular-value radius `r` around 1.
pub fn generalization_bound_for_radius(inp: &BoundInputs, radius: f64) -> Result<BoundValue> {
    inp.validate()?;
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(invalid(format!("radius must be non-negative, got {radius}")));
    }
    Ok(evaluate(inp, 1.0 + radius))
}

fn evaluate(inp: &BoundInputs, w_spectral: f64) -> BoundValue {
    let t = inp.depth as f64;
    let n = inp.width as f64;
    if inp.width == 1 {
        return BoundValue { value: 0.0, degenerate: true };
    }
    let growth = w_spectral.powi(2 * inp.depth as i32 - 2).max(1.0);
    let prefactor = inp.input_bound.powi(2) * t * t * n * n.ln() * growth / (inp.margin * inp.margin);
    let (m2, y2) = (inp.m_spectral.powi(2), inp.y_spectral.powi(2));
    let bracket = m2 * y2 * t * t * inp.w_frobenius.powi(2) + inp.m_frobenius.powi(2) * y2 + m2 * inp.y_frobenius.powi(2);
    BoundValue { value: prefactor * bracket, degenerate: false }
}

/// Outcome of checking `‖h⁽ⁱ⁾‖ ≤ B‖M‖₂·i·max{‖W‖₂^{i−1}, 1}` along a rollout.
#[derive(Clone, Debug, PartialEq)]
pub struct GrowthCheck {
    pub holds: bool,
    /// Largest `‖h⁽ⁱ⁾‖ / bound` (0/0 counts as 0).
    pub max_ratio: f64,
    pub ratios: Vec<f64>,
}

/// Rolls `cell` from `h⁽⁰⁾ = 0` over `inputs` with the bias removed and
/// checks the hidden-state growth bound at every step. Requires a
/// 1-Lipschitz activation that fixes 0 (ReLU or leaky ReLU with slope ≤ 1),
/// and every input norm at most `input_bound`.
pub fn growth_bound_check(cell: &RnnCell, inputs: &[Vec<f64>], input_bound: f64) -> Result<GrowthCheck> {
    if !cell.activation.is_contractive_relu() {
        return Err(Error::Unsupported(format!("growth bound needs a ReLU-type activation, got {}", cell.activation)));
    }
    if let Some(x) = inputs.iter().find(|x| norm(x) > input_bound) {
        return Err(invalid(format!("input norm {} exceeds bound {input_bound}", norm(x))));
    }
    let w_norm = jacobi_svd(&cell.transition_matrix())?.spectral_norm();
    let m_norm = jacobi_svd(&cell.input_weights)?.spectral_norm();
    let mut unbiased = cell.clone();
    unbiased.bias.iter_mut().for_each(|b| *b = 0.0);
    let mut h = vec![0.0; cell.hidden()];
    let mut ratios = Vec::with_capacity(inputs.len());
    for (i, x) in inputs.iter().enumerate() {
        let (h_next, _, _) = rnn_step(&unbiased, &h, x)?;
        h = h_next;
        let step = (i + 1) as f64;
        let bound = input_bound * m_norm * step * w_norm.powi(i as i32).max(1.0);
        let hn = norm(&h);
        let ratio = if hn == 0.0 { 0.0 } else { hn / bound };
        ratios.push(ratio);
    }
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    // tiny slack for rounding in the norms
    Ok(GrowthCheck { holds: max_ratio <= 1.0 + 1e-12, max_ratio, ratios })
}
