//! Central-difference gradient checking.

use std::fmt;

use crate::error::{invalid, Result};
use crate::layers::rnn::{PreparedCell, RnnCell, RnnGrads};
use crate::diagnostics::flops::FlopCounter;
use crate::training::mse_loss;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckRow {
    pub coordinate: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub rows: Vec<GradCheckRow>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.rows.iter().map(|r| r.rel_error).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&GradCheckRow> {
        self.rows.iter().max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>10} {:>16} {:>16} {:>10}", "coordinate", "analytic", "numeric", "rel-err")?;
        for r in &self.rows {
            writeln!(f, "{:>10} {:>16.9e} {:>16.9e} {:>10.3e}", r.coordinate, r.analytic, r.numeric, r.rel_error)?;
        }
        Ok(())
    }
}

/// `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares `analytic` with `(f(θ+εeᵢ) − f(θ−εeᵢ)) / 2ε` on every coordinate.
pub fn finite_diff_check(
    mut f: impl FnMut(&[f64]) -> f64,
    params: &[f64],
    analytic: &[f64],
    step: f64,
) -> Result<GradCheckReport> {
    if params.len() != analytic.len() {
        return Err(invalid(format!("{} parameters but {} gradient entries", params.len(), analytic.len())));
    }
    if !(step > 0.0) {
        return Err(invalid("step must be positive"));
    }
    let mut theta = params.to_vec();
    let mut rows = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        theta[i] = params[i] + step;
        let fp = f(&theta);
        theta[i] = params[i] - step;
        let fm = f(&theta);
        theta[i] = params[i];
        let numeric = (fp - fm) / (2.0 * step);
        rows.push(GradCheckRow { coordinate: i, analytic: analytic[i], numeric, rel_error: relative_error(analytic[i], numeric) });
    }
    Ok(GradCheckReport { rows })
}

/// A batch of sequences with per-step regression targets, used to check the
/// full BPTT gradient of a cell.
#[derive(Clone, Debug)]
pub struct SequenceProblem {
    /// `inputs[b][t]`.
    pub inputs: Vec<Vec<Vec<f64>>>,
    /// `targets[b][t]`; `None` where the step does not enter the loss.
    pub targets: Vec<Vec<Option<Vec<f64>>>>,
}

impl SequenceProblem {
    /// Mean over the batch of `Σ_t mse(ŷ⁽ᵗ⁾, target⁽ᵗ⁾)`, and its gradient in
    /// [`RnnCell::param_slices_mut`] order.
    pub fn loss_and_grad(&self, cell: &RnnCell) -> Result<(f64, Vec<f64>)> {
        let mut flops = FlopCounter::new();
        let prep = PreparedCell::new(cell, &mut flops);
        let mut grads = RnnGrads::zeros_like(cell);
        let loss = self.run(&prep, Some(&mut grads), &mut flops)?;
        Ok((loss, grads.flatten()))
    }

    pub fn loss(&self, cell: &RnnCell) -> Result<f64> {
        let mut flops = FlopCounter::new();
        let prep = PreparedCell::new(cell, &mut flops);
        self.run(&prep, None, &mut flops)
    }

    fn run(&self, prep: &PreparedCell<'_>, mut grads: Option<&mut RnnGrads>, flops: &mut FlopCounter) -> Result<f64> {
        if self.inputs.len() != self.targets.len() || self.inputs.is_empty() {
            return Err(invalid("inputs and targets must be non-empty and aligned"));
        }
        let scale = 1.0 / self.inputs.len() as f64;
        let h0 = vec![0.0; prep.cell().hidden()];
        let mut total = 0.0;
        for (xs, ts) in self.inputs.iter().zip(&self.targets) {
            if xs.len() != ts.len() {
                return Err(invalid("sequence and target lengths differ"));
            }
            let (ys, tapes) = prep.run(&h0, xs, flops)?;
            let mut dys = Vec::with_capacity(ys.len());
            for (y, t) in ys.iter().zip(ts) {
                match t {
                    Some(t) => {
                        let (l, g) = mse_loss(y, t)?;
                        total += l * scale;
                        dys.push(Some(g.into_iter().map(|v| v * scale).collect()));
                    }
                    None => dys.push(None),
                }
            }
            if let Some(g) = grads.as_deref_mut() {
                prep.backward_through_time(&tapes, &dys, g, flops)?;
            }
        }
        Ok(total)
    }
}

/// Checks every parameter of `cell` on `problem`. `corrupt` doubles the
/// analytic gradient before comparison (a checker sanity switch).
pub fn check_cell(cell: &RnnCell, problem: &SequenceProblem, step: f64, corrupt: bool) -> Result<GradCheckReport> {
    let (_, mut analytic) = problem.loss_and_grad(cell)?;
    if corrupt {
        analytic.iter_mut().for_each(|g| *g *= 2.0);
    }
    let theta = cell.params();
    let mut probe = cell.clone();
    let mut failure = None;
    let report = finite_diff_check(
        |p| {
            probe.set_params(p).expect("same length");
            match problem.loss(&probe) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        &theta,
        &analytic,
        step,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(report),
    }
}
