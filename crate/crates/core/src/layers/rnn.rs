//! Recurrent cell `h⁽ᵗ⁾ = act(W·h⁽ᵗ⁻¹⁾ + M·x⁽ᵗ⁾ + b)`, `ŷ⁽ᵗ⁾ = Y·h⁽ᵗ⁾`, with the
//! transition `W` either SVD-parameterized or a plain dense matrix, and
//! hand-written backpropagation through time.

use rand::Rng;

use super::activation::Activation;
use super::spectral::{PreparedSpectral, SpectralGrads, SpectralTape};
use crate::diagnostics::flops::{FlopCounter, Kernel};
use crate::error::{invalid, Result};
use crate::matrix::{norm, Matrix};
use crate::svd_param::SpectralMatrix;

#[derive(Clone, Debug, PartialEq)]
pub enum Transition {
    Spectral(SpectralMatrix),
    Dense(Matrix),
}

impl Transition {
    pub fn dim(&self) -> usize {
        match self {
            Transition::Spectral(w) => w.cols(),
            Transition::Dense(w) => w.cols(),
        }
    }

    pub fn to_dense(&self) -> Matrix {
        match self {
            Transition::Spectral(w) => w.materialize(),
            Transition::Dense(w) => w.clone(),
        }
    }

    fn scalar_count(&self) -> usize {
        match self {
            Transition::Spectral(w) => w.scalar_count(),
            Transition::Dense(w) => w.as_slice().len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RnnCell {
    pub transition: Transition,
    /// `M`, `n×n_i`.
    pub input_weights: Matrix,
    /// `Y`, `n_y×n`.
    pub output_weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

fn gaussian_io<R: Rng + ?Sized>(n: usize, n_in: usize, n_out: usize, rng: &mut R) -> (Matrix, Matrix) {
    let m = Matrix::gaussian(n, n_in, 1.0 / (n_in as f64).sqrt(), rng);
    let y = Matrix::gaussian(n_out, n, 1.0 / (n as f64).sqrt(), rng);
    (m, y)
}

impl RnnCell {
    pub fn new(
        transition: Transition,
        input_weights: Matrix,
        output_weights: Matrix,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        let n = transition.dim();
        if let Transition::Dense(w) = &transition {
            if !w.is_square() {
                return Err(invalid("dense transition must be square"));
            }
        }
        if let Transition::Spectral(w) = &transition {
            if !w.is_square() {
                return Err(invalid("spectral transition must be square"));
            }
        }
        if input_weights.rows() != n || output_weights.cols() != n || bias.len() != n {
            return Err(invalid(format!(
                "inconsistent cell shapes: W {n}x{n}, M {:?}, Y {:?}, b {}",
                input_weights.shape(),
                output_weights.shape(),
                bias.len()
            )));
        }
        if input_weights.cols() == 0 || output_weights.rows() == 0 {
            return Err(invalid("input and output dimensions must be positive"));
        }
        Ok(RnnCell { transition, input_weights, output_weights, bias, activation })
    }

    /// Gaussian reflectors, `σ̂ = 0`, Gaussian `M` and `Y` with standard
    /// deviation `1/√fan_in`, `b = 0`.
    #[allow(clippy::too_many_arguments)]
    pub fn spectral<R: Rng + ?Sized>(
        n: usize,
        n_in: usize,
        n_out: usize,
        m1: usize,
        m2: usize,
        radius: f64,
        center: f64,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let w = SpectralMatrix::random(n, n, m1, m2, radius, center, rng)?;
        let (m, y) = gaussian_io(n, n_in, n_out, rng);
        Self::new(Transition::Spectral(w), m, y, vec![0.0; n], activation)
    }

    /// Dense Gaussian transition with standard deviation `1/√n`.
    pub fn vanilla<R: Rng + ?Sized>(
        n: usize,
        n_in: usize,
        n_out: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if n == 0 {
            return Err(invalid("hidden dimension must be positive"));
        }
        let w = Matrix::gaussian(n, n, 1.0 / (n as f64).sqrt(), rng);
        let (m, y) = gaussian_io(n, n_in, n_out, rng);
        Self::new(Transition::Dense(w), m, y, vec![0.0; n], activation)
    }

    pub fn hidden(&self) -> usize {
        self.transition.dim()
    }

    pub fn input_dim(&self) -> usize {
        self.input_weights.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.output_weights.rows()
    }

    pub fn transition_matrix(&self) -> Matrix {
        self.transition.to_dense()
    }

    pub fn spectral_matrix(&self) -> Option<&SpectralMatrix> {
        match &self.transition {
            Transition::Spectral(w) => Some(w),
            Transition::Dense(_) => None,
        }
    }

    /// Trainable slices: transition (reflectors then `σ̂`, or dense `W`),
    /// then `M`, `Y`, `b`.
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = match &mut self.transition {
            Transition::Spectral(w) => w.param_slices_mut(),
            Transition::Dense(w) => vec![w.as_mut_slice()],
        };
        out.push(self.input_weights.as_mut_slice());
        out.push(self.output_weights.as_mut_slice());
        out.push(&mut self.bias);
        out
    }

    pub fn param_count(&self) -> usize {
        self.transition.scalar_count()
            + self.input_weights.as_slice().len()
            + self.output_weights.as_slice().len()
            + self.bias.len()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut copy = self.clone();
        copy.param_slices_mut().into_iter().flat_map(|s| s.to_vec()).collect()
    }

    pub fn set_params(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.param_count() {
            return Err(invalid(format!("expected {} parameters, got {}", self.param_count(), theta.len())));
        }
        let mut off = 0;
        for s in self.param_slices_mut() {
            s.copy_from_slice(&theta[off..off + s.len()]);
            off += s.len();
        }
        Ok(())
    }
}

/// Gradient of the transition part.
#[derive(Clone, Debug, PartialEq)]
pub enum TransitionGrads {
    Spectral(SpectralGrads),
    Dense(Matrix),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RnnGrads {
    pub transition: TransitionGrads,
    pub input: Matrix,
    pub output: Matrix,
    pub bias: Vec<f64>,
}

impl RnnGrads {
    pub fn zeros_like(cell: &RnnCell) -> Self {
        let transition = match &cell.transition {
            Transition::Spectral(w) => TransitionGrads::Spectral(SpectralGrads::zeros_like(w)),
            Transition::Dense(w) => TransitionGrads::Dense(Matrix::zeros(w.rows(), w.cols())),
        };
        RnnGrads {
            transition,
            input: Matrix::zeros(cell.input_weights.rows(), cell.input_weights.cols()),
            output: Matrix::zeros(cell.output_weights.rows(), cell.output_weights.cols()),
            bias: vec![0.0; cell.bias.len()],
        }
    }

    /// Same order as [`RnnCell::param_slices_mut`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        match &self.transition {
            TransitionGrads::Spectral(g) => {
                g.du.iter().chain(&g.dv).for_each(|d| out.extend(d));
                out.extend(&g.d_sigma_hat);
            }
            TransitionGrads::Dense(g) => out.extend(g.as_slice()),
        }
        out.extend(self.input.as_slice());
        out.extend(self.output.as_slice());
        out.extend(&self.bias);
        out
    }

    pub fn scale(&mut self, c: f64) {
        let scale_vec = |v: &mut [f64]| v.iter_mut().for_each(|x| *x *= c);
        match &mut self.transition {
            TransitionGrads::Spectral(g) => {
                g.du.iter_mut().chain(g.dv.iter_mut()).for_each(|d| scale_vec(d));
                scale_vec(&mut g.d_sigma);
                scale_vec(&mut g.d_sigma_hat);
            }
            TransitionGrads::Dense(g) => scale_vec(g.as_mut_slice()),
        }
        scale_vec(self.input.as_mut_slice());
        scale_vec(self.output.as_mut_slice());
        scale_vec(&mut self.bias);
    }
}

/// Per-step cache for the backward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct StepTape {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    /// Pre-activation `W·h⁽ᵗ⁻¹⁾ + M·x⁽ᵗ⁾ + b`.
    pub pre: Vec<f64>,
    pub h: Vec<f64>,
    pub spectral: Option<SpectralTape>,
}

/// A cell with its per-pass reflector constants precomputed.
#[derive(Clone, Debug)]
pub struct PreparedCell<'a> {
    cell: &'a RnnCell,
    spectral: Option<PreparedSpectral<'a>>,
}

impl<'a> PreparedCell<'a> {
    pub fn new(cell: &'a RnnCell, flops: &mut FlopCounter) -> Self {
        let spectral = match &cell.transition {
            Transition::Spectral(w) => Some(PreparedSpectral::new(w, flops)),
            Transition::Dense(_) => None,
        };
        PreparedCell { cell, spectral }
    }

    pub fn cell(&self) -> &'a RnnCell {
        self.cell
    }

    /// One step. Returns `(h, ŷ, tape)`.
    pub fn step(&self, h_prev: &[f64], x: &[f64], flops: &mut FlopCounter) -> Result<(Vec<f64>, Vec<f64>, StepTape)> {
        let cell = self.cell;
        let n = cell.hidden();
        if h_prev.len() != n || x.len() != cell.input_dim() {
            return Err(invalid(format!(
                "step expects h of length {n} and x of length {}, got {} and {}",
                cell.input_dim(),
                h_prev.len(),
                x.len()
            )));
        }
        let (mut pre, spectral) = match (&cell.transition, &self.spectral) {
            (Transition::Spectral(_), Some(p)) => {
                let (c, tape) = p.forward(h_prev, flops)?;
                (c, Some(tape))
            }
            (Transition::Dense(w), _) => {
                flops.add(Kernel::Dense, 2 * (n * n) as u64);
                (w.matvec(h_prev), None)
            }
            _ => unreachable!("prepared state matches transition kind"),
        };
        let mx = cell.input_weights.matvec(x);
        flops.add(Kernel::Dense, 2 * (n * x.len()) as u64);
        for ((p, a), b) in pre.iter_mut().zip(&mx).zip(&cell.bias) {
            *p += a + b;
        }
        let h: Vec<f64> = pre.iter().map(|&v| cell.activation.apply(v)).collect();
        flops.add(Kernel::Elementwise, 3 * n as u64);
        let y = cell.output_weights.matvec(&h);
        flops.add(Kernel::Dense, 2 * (n * cell.output_dim()) as u64);
        let tape = StepTape { x: x.to_vec(), h_prev: h_prev.to_vec(), pre, h: h.clone(), spectral };
        Ok((h, y, tape))
    }

    /// Runs the cell over `xs` from `h0`. Returns the per-step outputs and tapes.
    pub fn run(&self, h0: &[f64], xs: &[Vec<f64>], flops: &mut FlopCounter) -> Result<(Vec<Vec<f64>>, Vec<StepTape>)> {
        let mut h = h0.to_vec();
        let mut ys = Vec::with_capacity(xs.len());
        let mut tapes = Vec::with_capacity(xs.len());
        for x in xs {
            let (h_next, y, tape) = self.step(&h, x, flops)?;
            h = h_next;
            ys.push(y);
            tapes.push(tape);
        }
        Ok((ys, tapes))
    }

    /// Backpropagation through time. `loss_grads[t]` is `∂L/∂ŷ` for the step
    /// recorded in `tapes[t]`, or `None` when that step does not enter the loss.
    /// Gradients are added into `grads`; shared weights sum over steps.
    ///
    /// Returns `‖∂L/∂h⁽ᵗ⁾‖` for `t = 0..=T`, where `h⁽⁰⁾` is the initial state.
    pub fn backward_through_time(
        &self,
        tapes: &[StepTape],
        loss_grads: &[Option<Vec<f64>>],
        grads: &mut RnnGrads,
        flops: &mut FlopCounter,
    ) -> Result<Vec<f64>> {
        let cell = self.cell;
        let n = cell.hidden();
        let n_out = cell.output_dim();
        if tapes.len() != loss_grads.len() {
            return Err(invalid(format!("{} tapes but {} loss gradients", tapes.len(), loss_grads.len())));
        }
        let mut scratch = match &grads.transition {
            TransitionGrads::Spectral(g) => Some(g.clone()),
            TransitionGrads::Dense(_) => None,
        };
        let mut norms = vec![0.0; tapes.len() + 1];
        let mut dh = vec![0.0; n];
        let mut dpre = vec![0.0; n];
        for t in (0..tapes.len()).rev() {
            let tape = &tapes[t];
            if tape.h.len() != n || tape.pre.len() != n || tape.x.len() != cell.input_dim() {
                return Err(invalid("tape does not match the cell"));
            }
            if let Some(dy) = &loss_grads[t] {
                if dy.len() != n_out {
                    return Err(invalid(format!("loss gradient length {} != {n_out}", dy.len())));
                }
                grads.output.add_outer(dy, &tape.h, 1.0);
                let back = cell.output_weights.matvec_t(dy);
                for (a, b) in dh.iter_mut().zip(&back) {
                    *a += b;
                }
                flops.add(Kernel::Dense, 5 * (n * n_out) as u64);
            }
            norms[t + 1] = norm(&dh);
            for i in 0..n {
                dpre[i] = cell.activation.derivative(tape.pre[i]) * dh[i];
                grads.bias[i] += dpre[i];
            }
            grads.input.add_outer(&dpre, &tape.x, 1.0);
            flops.add(Kernel::Elementwise, 2 * n as u64);
            flops.add(Kernel::Dense, 2 * (n * tape.x.len()) as u64);
            match (&cell.transition, &mut grads.transition) {
                (Transition::Spectral(_), TransitionGrads::Spectral(total)) => {
                    let prep = self.spectral.as_ref().expect("prepared spectral");
                    let st = tape.spectral.as_ref().ok_or_else(|| invalid("tape lacks spectral record"))?;
                    let s = scratch.as_mut().expect("spectral scratch");
                    prep.backward_into(st, &dpre, s, flops)?;
                    accumulate(total, s, flops);
                    dh.copy_from_slice(&s.dh);
                }
                (Transition::Dense(w), TransitionGrads::Dense(total)) => {
                    total.add_outer(&dpre, &tape.h_prev, 1.0);
                    dh = w.matvec_t(&dpre);
                    flops.add(Kernel::Dense, 4 * (n * n) as u64);
                }
                _ => return Err(invalid("gradient buffer does not match the transition kind")),
            }
        }
        norms[0] = norm(&dh);
        Ok(norms)
    }
}

fn accumulate(total: &mut SpectralGrads, step: &SpectralGrads, flops: &mut FlopCounter) {
    let mut count = 0usize;
    for (a, b) in total.du.iter_mut().chain(total.dv.iter_mut()).zip(step.du.iter().chain(&step.dv)) {
        for (x, y) in a.iter_mut().zip(b) {
            *x += y;
        }
        count += b.len();
    }
    for (x, y) in total.d_sigma.iter_mut().zip(&step.d_sigma) {
        *x += y;
    }
    for (x, y) in total.d_sigma_hat.iter_mut().zip(&step.d_sigma_hat) {
        *x += y;
    }
    flops.add(Kernel::Elementwise, (count + 2 * step.d_sigma.len()) as u64);
}

/// One step of `cell` from `h_prev` on input `x`: `(h, ŷ, tape)`.
pub fn rnn_step(cell: &RnnCell, h_prev: &[f64], x: &[f64]) -> Result<(Vec<f64>, Vec<f64>, StepTape)> {
    let mut flops = FlopCounter::new();
    PreparedCell::new(cell, &mut flops).step(h_prev, x, &mut flops)
}

/// Gradients of all parameters from a recorded rollout, plus the sequence
/// `‖∂L/∂h⁽ᵗ⁾‖` for `t = 0..=T`.
pub fn rnn_backward_through_time(
    cell: &RnnCell,
    tapes: &[StepTape],
    loss_grads: &[Option<Vec<f64>>],
) -> Result<(RnnGrads, Vec<f64>)> {
    let mut flops = FlopCounter::new();
    let mut grads = RnnGrads::zeros_like(cell);
    let norms = PreparedCell::new(cell, &mut flops).backward_through_time(tapes, loss_grads, &mut grads, &mut flops)?;
    Ok((grads, norms))
}
