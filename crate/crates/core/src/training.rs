//! Losses, Adam, and the seeded BPTT training loop for the synthetic tasks.

use std::fmt;
use std::ops::ControlFlow;
use std::str::FromStr;
use std::time::Instant;

use crate::diagnostics::flops::{FlopCounter, Kernel};
use crate::error::{invalid, Error, Result};
use crate::layers::rnn::{PreparedCell, RnnCell, RnnGrads, TransitionGrads};
use crate::layers::Activation;
use crate::svd_param::spectral_margin;
use crate::tasks::{
    gen_addition, gen_copy, one_hot, stream_rng, AdditionBatch, CopyBatch, Stream, COPY_ALPHABET,
};

/// Mean squared error over all entries and its gradient.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(invalid(format!("mse_loss: {} predictions vs {} targets", pred.len(), target.len())));
    }
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let d = p - t;
            loss += d * d;
            2.0 * d / n
        })
        .collect();
    Ok((loss / n, grad))
}

/// Mean over rows of `−log softmax(logits)[target]` and its gradient.
pub fn cross_entropy_loss(logits: &[Vec<f64>], targets: &[usize]) -> Result<(f64, Vec<Vec<f64>>)> {
    if logits.len() != targets.len() || logits.is_empty() {
        return Err(invalid(format!("cross_entropy_loss: {} rows vs {} targets", logits.len(), targets.len())));
    }
    let rows = logits.len() as f64;
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(logits.len());
    for (z, &t) in logits.iter().zip(targets) {
        if t >= z.len() {
            return Err(invalid(format!("class {t} out of range for {} logits", z.len())));
        }
        let (l, g) = softmax_ce(z, t);
        loss += l;
        grads.push(g.into_iter().map(|x| x / rows).collect());
    }
    Ok((loss / rows, grads))
}

/// Single-row cross-entropy and its (unscaled) gradient `softmax(z) − e_t`.
fn softmax_ce(z: &[f64], t: usize) -> (f64, Vec<f64>) {
    let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = z.iter().map(|&v| (v - zmax).exp()).collect();
    let s: f64 = p.iter().sum();
    let loss = s.ln() - (z[t] - zmax);
    p.iter_mut().for_each(|x| *x /= s);
    p[t] -= 1.0;
    (loss, p)
}

/// Bias-corrected Adam.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(len: usize) -> Self {
        Self::with_betas(len, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(len: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam { beta1, beta2, eps, m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Updates `params` (the concatenation of the slices) from `grads`.
    pub fn step(&mut self, params: Vec<&mut [f64]>, grads: &[f64], lr: f64, flops: &mut FlopCounter) -> Result<()> {
        let total: usize = params.iter().map(|s| s.len()).sum();
        if total != self.m.len() || grads.len() != total {
            return Err(invalid(format!("adam: state {} vs params {total} vs grads {}", self.m.len(), grads.len())));
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let mut i = 0;
        for slice in params {
            for p in slice.iter_mut() {
                let g = grads[i];
                self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
                self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = self.m[i] / bc1;
                let v_hat = self.v[i] / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + self.eps);
                i += 1;
            }
        }
        flops.add(Kernel::Optimizer, 12 * total as u64);
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskKind {
    Addition,
    Copy,
}

impl TaskKind {
    pub fn input_dim(self) -> usize {
        match self {
            TaskKind::Addition => 2,
            TaskKind::Copy => COPY_ALPHABET,
        }
    }

    pub fn output_dim(self) -> usize {
        match self {
            TaskKind::Addition => 1,
            TaskKind::Copy => COPY_ALPHABET,
        }
    }
}

impl FromStr for TaskKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "addition" => Ok(TaskKind::Addition),
            "copy" => Ok(TaskKind::Copy),
            other => Err(Error::Config(format!("unknown task '{other}'"))),
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskKind::Addition => "addition",
            TaskKind::Copy => "copy",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    SpectralRnn,
    VanillaRnn,
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "spectral" | "spectral_rnn" => Ok(ModelKind::SpectralRnn),
            "vanilla" | "vanilla_rnn" => Ok(ModelKind::VanillaRnn),
            other => Err(Error::Config(format!("unknown model '{other}'"))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::SpectralRnn => "spectral",
            ModelKind::VanillaRnn => "vanilla",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub task: TaskKind,
    /// `L` for addition, the lag `T` for copy.
    pub seq_len: usize,
    pub hidden: usize,
    pub m1: usize,
    pub m2: usize,
    pub radius: f64,
    pub center: f64,
    pub activation: Activation,
    pub model: ModelKind,
    pub lr: f64,
    /// Learning-rate factor applied once per epoch.
    pub decay: f64,
    pub epoch_iters: usize,
    pub batch: usize,
    pub iters: usize,
    pub seed: u64,
    /// Record cadence in iterations; the final iteration is always recorded.
    pub record_every: usize,
    pub eval_size: usize,
    /// Coefficient of `‖σ − 1‖²` added to the loss; 0 disables it.
    pub sigma_penalty: f64,
    /// Global gradient-norm clip; `None` disables it.
    pub clip: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            task: TaskKind::Addition,
            seq_len: 30,
            hidden: 32,
            m1: 8,
            m2: 8,
            radius: 0.01,
            center: 1.0,
            activation: Activation::default(),
            model: ModelKind::SpectralRnn,
            lr: 0.001,
            decay: 1.0,
            epoch_iters: 1000,
            batch: 20,
            iters: 1000,
            seed: 1,
            record_every: 100,
            eval_size: 256,
            sigma_penalty: 0.0,
            clip: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.hidden == 0 || self.batch == 0 || self.epoch_iters == 0 || self.record_every == 0 || self.eval_size == 0 {
            return bad("hidden, batch, epoch_iters, record_every and eval_size must be positive".into());
        }
        if self.m1 > self.hidden || self.m2 > self.hidden {
            return bad(format!("m1={} and m2={} must not exceed hidden={}", self.m1, self.m2, self.hidden));
        }
        if !(self.radius >= 0.0) || !self.radius.is_finite() || !self.center.is_finite() {
            return bad(format!("need finite r >= 0 and finite sigma*, got r={} sigma*={}", self.radius, self.center));
        }
        if !(self.lr > 0.0) || !(self.decay > 0.0) || !self.lr.is_finite() || !self.decay.is_finite() {
            return bad(format!("learning rate {} and decay {} must be positive", self.lr, self.decay));
        }
        if self.sigma_penalty < 0.0 || !self.sigma_penalty.is_finite() {
            return bad(format!("sigma penalty must be >= 0, got {}", self.sigma_penalty));
        }
        if let Some(c) = self.clip {
            if !(c > 0.0) {
                return bad(format!("clip must be positive, got {c}"));
            }
        }
        match self.task {
            TaskKind::Addition if self.seq_len < 2 => bad("addition needs seq_len >= 2".into()),
            TaskKind::Copy if self.seq_len < 1 => bad("copy needs lag >= 1".into()),
            _ => Ok(()),
        }
    }

    /// Untrained model drawn from the init stream of `seed`.
    pub fn init_model(&self) -> Result<RnnCell> {
        self.validate()?;
        let mut rng = stream_rng(self.seed, Stream::Init);
        let (ni, ny) = (self.task.input_dim(), self.task.output_dim());
        match self.model {
            ModelKind::SpectralRnn => RnnCell::spectral(
                self.hidden,
                ni,
                ny,
                self.m1,
                self.m2,
                self.radius,
                self.center,
                self.activation,
                &mut rng,
            ),
            ModelKind::VanillaRnn => RnnCell::vanilla(self.hidden, ni, ny, self.activation, &mut rng),
        }
    }

    fn lr_at(&self, iteration: usize) -> f64 {
        self.lr * self.decay.powi((iteration / self.epoch_iters) as i32)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricRecord {
    pub iteration: usize,
    /// Training-batch loss before this iteration's update.
    pub loss: f64,
    /// Test MSE (addition) or per-position cross-entropy (copy).
    pub eval_metric: f64,
    /// `‖∂L/∂h⁽⁰⁾‖` over the batch.
    pub grad_norm_h0: f64,
    /// `‖∂L/∂h⁽ᵀ⁾‖` over the batch.
    pub grad_norm_last: f64,
    /// `max_i |σ_i − 1|` of the transition matrix.
    pub spectral_margin: f64,
    /// Cumulative training flops.
    pub flops: u64,
    pub seconds: f64,
}

pub const METRICS_HEADER: &str = "iter,loss,eval_metric,grad_norm_h0,spectral_margin,flops,seconds";

impl MetricRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:e},{:e},{:e},{:e},{},{:.6}",
            self.iteration, self.loss, self.eval_metric, self.grad_norm_h0, self.spectral_margin, self.flops, self.seconds
        )
    }
}

/// A task batch in model-ready form.
enum Batch {
    Addition(AdditionBatch),
    Copy(CopyBatch),
}

impl Batch {
    fn generate(task: TaskKind, seq_len: usize, size: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Result<Self> {
        Ok(match task {
            TaskKind::Addition => Batch::Addition(gen_addition(seq_len, size, rng)?),
            TaskKind::Copy => Batch::Copy(gen_copy(seq_len, size, rng)?),
        })
    }

    fn len(&self) -> usize {
        match self {
            Batch::Addition(b) => b.len(),
            Batch::Copy(b) => b.len(),
        }
    }

    fn inputs(&self, i: usize) -> Vec<Vec<f64>> {
        match self {
            Batch::Addition(b) => b.inputs[i].iter().map(|p| p.to_vec()).collect(),
            Batch::Copy(b) => b.inputs[i].iter().map(|&s| one_hot(s, COPY_ALPHABET)).collect(),
        }
    }

    /// Sample loss and `∂(loss)/∂ŷ⁽ᵗ⁾` for each step.
    fn loss(&self, i: usize, outputs: &[Vec<f64>]) -> Result<(f64, Vec<Option<Vec<f64>>>)> {
        match self {
            Batch::Addition(b) => {
                let last = outputs.last().ok_or_else(|| invalid("empty rollout"))?;
                let (l, g) = mse_loss(last, &[b.targets[i]])?;
                let mut grads = vec![None; outputs.len()];
                *grads.last_mut().unwrap() = Some(g);
                Ok((l, grads))
            }
            Batch::Copy(b) => {
                let (l, g) = cross_entropy_loss(outputs, &b.targets[i])?;
                Ok((l, g.into_iter().map(Some).collect()))
            }
        }
    }
}

/// Mean loss and summed gradients over a batch; `grads` is overwritten.
struct BatchPass {
    loss: f64,
    norm_h0_sq: f64,
    norm_last_sq: f64,
}

fn batch_pass(
    prep: &PreparedCell<'_>,
    batch: &Batch,
    grads: Option<&mut RnnGrads>,
    flops: &mut FlopCounter,
) -> Result<BatchPass> {
    let cell = prep.cell();
    let h0 = vec![0.0; cell.hidden()];
    let size = batch.len();
    let scale = 1.0 / size as f64;
    let mut out = BatchPass { loss: 0.0, norm_h0_sq: 0.0, norm_last_sq: 0.0 };
    let mut grads = grads;
    for i in 0..size {
        let xs = batch.inputs(i);
        let (ys, tapes) = prep.run(&h0, &xs, flops)?;
        let (l, mut dys) = batch.loss(i, &ys)?;
        out.loss += l * scale;
        if let Some(g) = grads.as_deref_mut() {
            for dy in dys.iter_mut().flatten() {
                dy.iter_mut().for_each(|x| *x *= scale);
            }
            let norms = prep.backward_through_time(&tapes, &dys, g, flops)?;
            out.norm_h0_sq += norms[0] * norms[0];
            out.norm_last_sq += norms[norms.len() - 1] * norms[norms.len() - 1];
        }
    }
    Ok(out)
}

/// Evaluation metric of `cell` on `batch` (mean loss, no gradients).
fn evaluate(cell: &RnnCell, batch: &Batch) -> Result<f64> {
    let mut flops = FlopCounter::new();
    let prep = PreparedCell::new(cell, &mut flops);
    Ok(batch_pass(&prep, batch, None, &mut flops)?.loss)
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub records: Vec<MetricRecord>,
    pub model: RnnCell,
}

pub fn train(config: &TrainConfig) -> Result<TrainOutcome> {
    train_with(config, |_, _| Ok(ControlFlow::Continue(())))
}

/// Trains from the config's seed, calling `on_record` after each record is
/// produced (with the model at that iteration). `Break` ends training after
/// that record; an error aborts it.
pub fn train_with(
    config: &TrainConfig,
    mut on_record: impl FnMut(&MetricRecord, &RnnCell) -> Result<ControlFlow<()>>,
) -> Result<TrainOutcome> {
    let mut cell = config.init_model()?;
    let mut train_rng = stream_rng(config.seed, Stream::Train);
    let mut test_rng = stream_rng(config.seed, Stream::Test);
    let test = Batch::generate(config.task, config.seq_len, config.eval_size, &mut test_rng)?;
    let mut adam = Adam::new(cell.param_count());
    let mut flops = FlopCounter::new();
    let mut records = Vec::new();
    let start = Instant::now();

    for it in 0..=config.iters {
        let batch = Batch::generate(config.task, config.seq_len, config.batch, &mut train_rng)?;
        let mut grads = RnnGrads::zeros_like(&cell);
        let pass = {
            let prep = PreparedCell::new(&cell, &mut flops);
            batch_pass(&prep, &batch, Some(&mut grads), &mut flops)?
        };
        let mut loss = pass.loss;
        if config.sigma_penalty > 0.0 {
            if let (Some(w), TransitionGrads::Spectral(g)) = (cell.spectral_matrix(), &mut grads.transition) {
                let (value, d_hat) = w.sigma_penalty(config.sigma_penalty);
                loss += value;
                for (a, b) in g.d_sigma_hat.iter_mut().zip(&d_hat) {
                    *a += b;
                }
            }
        }
        if !loss.is_finite() {
            return Err(Error::Diverged { iteration: it, loss });
        }
        if it % config.record_every == 0 || it == config.iters {
            let record = MetricRecord {
                iteration: it,
                loss,
                eval_metric: evaluate(&cell, &test)?,
                grad_norm_h0: pass.norm_h0_sq.sqrt(),
                grad_norm_last: pass.norm_last_sq.sqrt(),
                spectral_margin: transition_margin(&cell)?,
                flops: flops.total(),
                seconds: start.elapsed().as_secs_f64(),
            };
            let flow = on_record(&record, &cell)?;
            records.push(record);
            if flow.is_break() {
                break;
            }
        }
        if it == config.iters {
            break;
        }
        let mut flat = grads.flatten();
        if let Some(c) = config.clip {
            let nrm = flat.iter().map(|g| g * g).sum::<f64>().sqrt();
            if nrm > c {
                flat.iter_mut().for_each(|g| *g *= c / nrm);
            }
        }
        if flat.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged { iteration: it, loss });
        }
        adam.step(cell.param_slices_mut(), &flat, config.lr_at(it), &mut flops)?;
    }
    Ok(TrainOutcome { records, model: cell })
}

/// `max_i |σ_i − 1|`; for a dense transition the singular values come from
/// the reference SVD.
pub fn transition_margin(cell: &RnnCell) -> Result<f64> {
    match cell.spectral_matrix() {
        Some(w) => Ok(spectral_margin(w)),
        None => {
            let svd = crate::diagnostics::svd::jacobi_svd(&cell.transition_matrix())?;
            Ok(svd.sigma.iter().fold(0.0, |m, s| m.max((s - 1.0).abs())))
        }
    }
}
