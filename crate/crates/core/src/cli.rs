//! Command-line front end: `train`, `gradcheck`, `bench`, `decompose`.
//!
//! Exit codes: 0 success, 1 invalid usage or input, 2 training diverged,
//! 3 gradient check failed, 4 singular values outside the requested range,
//! 5 decomposition reconstruction error above tolerance.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::cell_to_text;
use crate::diagnostics::counts::{leading_flops, measured_flops, predicted_flops, FlopKernel};
use crate::diagnostics::gradcheck::{check_cell, SequenceProblem};
use crate::error::{Error, Result};
use crate::layers::{Activation, RnnCell};
use crate::matrix::Matrix;
use crate::svd_param::{decompose_square, DecomposeOptions};
use crate::training::{train_with, ModelKind, TrainConfig, METRICS_HEADER};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DIVERGED: i32 = 2;
pub const EXIT_GRADCHECK: i32 = 3;
pub const EXIT_RANGE: i32 = 4;
pub const EXIT_RECONSTRUCTION: i32 = 5;

pub const SEED_ENV: &str = "SPECTRAL_NN_SEED";
pub const CONFIG_SNAPSHOT: &str = "config.txt";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKPOINT_FILE: &str = "model.txt";

#[derive(Parser, Debug)]
#[command(name = "spectral-rnn", version, about = "Spectral-RNN training and diagnostics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train on a synthetic task; writes metrics.csv, model.txt and config.txt.
    Train(Box<TrainArgs>),
    /// Compare backprop gradients of a small cell with finite differences.
    Gradcheck(GradcheckArgs),
    /// Predicted vs measured flops per kernel.
    Bench(BenchArgs),
    /// Factor a square CSV matrix into reflectors and singular values.
    Decompose(DecomposeArgs),
}

/// Every option is also accepted as `key=value` in a config file, using the
/// flag name without dashes.
#[derive(Args, Debug, Default)]
pub struct TrainArgs {
    /// Plain-text `key=value` file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "run")]
    pub out: PathBuf,
    #[arg(long)]
    pub task: Option<String>,
    /// Sequence length L (addition).
    #[arg(long)]
    pub seq_len: Option<String>,
    /// Blank run length T (copy); same setting as --seq-len.
    #[arg(long)]
    pub lag: Option<String>,
    #[arg(long)]
    pub hidden: Option<String>,
    #[arg(long)]
    pub m1: Option<String>,
    #[arg(long)]
    pub m2: Option<String>,
    /// Singular-value radius r.
    #[arg(long)]
    pub r: Option<String>,
    /// Singular-value center σ*.
    #[arg(long)]
    pub sigma_star: Option<String>,
    /// identity | relu | leaky_relu[:slope] | sigmoid | tanh
    #[arg(long)]
    pub activation: Option<String>,
    /// spectral | vanilla
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub lr: Option<String>,
    /// Learning-rate factor per epoch.
    #[arg(long)]
    pub decay: Option<String>,
    #[arg(long)]
    pub epoch_iters: Option<String>,
    #[arg(long)]
    pub batch: Option<String>,
    #[arg(long)]
    pub iters: Option<String>,
    /// Falls back to $SPECTRAL_NN_SEED, then 1.
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub record_every: Option<String>,
    #[arg(long)]
    pub eval_size: Option<String>,
    #[arg(long)]
    pub sigma_penalty: Option<String>,
    /// Gradient-norm clip; "none" disables.
    #[arg(long)]
    pub clip: Option<String>,
}

impl TrainArgs {
    fn flag_pairs(&self) -> Vec<(&'static str, &str)> {
        let all: [(&'static str, &Option<String>); 19] = [
            ("task", &self.task),
            ("seq-len", &self.seq_len),
            ("lag", &self.lag),
            ("hidden", &self.hidden),
            ("m1", &self.m1),
            ("m2", &self.m2),
            ("r", &self.r),
            ("sigma-star", &self.sigma_star),
            ("activation", &self.activation),
            ("model", &self.model),
            ("lr", &self.lr),
            ("decay", &self.decay),
            ("epoch-iters", &self.epoch_iters),
            ("batch", &self.batch),
            ("iters", &self.iters),
            ("seed", &self.seed),
            ("record-every", &self.record_every),
            ("eval-size", &self.eval_size),
            ("sigma-penalty", &self.sigma_penalty),
        ];
        let mut out: Vec<_> = all.iter().filter_map(|(k, v)| v.as_deref().map(|v| (*k, v))).collect();
        if let Some(c) = &self.clip {
            out.push(("clip", c.as_str()));
        }
        out
    }
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 4)]
    pub hidden: usize,
    #[arg(long, default_value_t = 3)]
    pub m1: usize,
    #[arg(long, default_value_t = 3)]
    pub m2: usize,
    #[arg(long, default_value_t = 2)]
    pub inputs: usize,
    #[arg(long, default_value_t = 2)]
    pub outputs: usize,
    /// Sequence length t.
    #[arg(long, default_value_t = 4)]
    pub steps: usize,
    #[arg(long, default_value_t = 2)]
    pub batch: usize,
    #[arg(long, default_value = "tanh")]
    pub activation: String,
    #[arg(long, default_value = "spectral")]
    pub model: String,
    #[arg(long, default_value_t = 0.5)]
    pub r: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-5)]
    pub step: f64,
    /// Doubles the analytic gradient, to confirm the checker fails.
    #[arg(long)]
    pub break_gradient: bool,
    /// Print every coordinate instead of only the worst.
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    #[arg(long, default_value_t = 8)]
    pub m1: usize,
    #[arg(long, default_value_t = 8)]
    pub m2: usize,
    /// Reflector length for the single-reflector kernels (default n/2).
    #[arg(long)]
    pub k: Option<usize>,
    /// Repetitions for wall-clock timing.
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
}

#[derive(Args, Debug)]
pub struct DecomposeArgs {
    /// Square matrix, one comma-separated row per line.
    #[arg(long)]
    pub input: PathBuf,
    /// Serialized result (default: input path with `.spectral` appended).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Singular-value center σ*; fitted when absent.
    #[arg(long)]
    pub sigma_star: Option<f64>,
    /// Singular-value radius r; fitted when absent.
    #[arg(long)]
    pub r: Option<f64>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    let result = match &cli.command {
        Command::Train(a) => cmd_train(a, out),
        Command::Gradcheck(a) => cmd_gradcheck(a, out),
        Command::Bench(a) => cmd_bench(a, out),
        Command::Decompose(a) => cmd_decompose(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                Error::Diverged { .. } => EXIT_DIVERGED,
                Error::Range { .. } => EXIT_RANGE,
                _ => EXIT_USAGE,
            }
        }
    }
}

/// Parses a `key=value` file. Blank lines and `#` comments are skipped.
pub fn parse_config_file(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got '{line}'", i + 1)))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

fn parse_val<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("bad value '{v}' for {key}")))
}

/// Applies one setting. Keys use the long-flag spelling; `_` is accepted
/// in place of `-`.
pub fn apply_setting(cfg: &mut TrainConfig, key: &str, value: &str) -> Result<()> {
    let key = key.replace('_', "-");
    match key.as_str() {
        "task" => cfg.task = value.parse()?,
        "seq-len" | "lag" => cfg.seq_len = parse_val(&key, value)?,
        "hidden" => cfg.hidden = parse_val(&key, value)?,
        "m1" => cfg.m1 = parse_val(&key, value)?,
        "m2" => cfg.m2 = parse_val(&key, value)?,
        "r" => cfg.radius = parse_val(&key, value)?,
        "sigma-star" => cfg.center = parse_val(&key, value)?,
        "activation" => cfg.activation = value.parse()?,
        "model" => cfg.model = value.parse()?,
        "lr" => cfg.lr = parse_val(&key, value)?,
        "decay" => cfg.decay = parse_val(&key, value)?,
        "epoch-iters" => cfg.epoch_iters = parse_val(&key, value)?,
        "batch" => cfg.batch = parse_val(&key, value)?,
        "iters" => cfg.iters = parse_val(&key, value)?,
        "seed" => cfg.seed = parse_val(&key, value)?,
        "record-every" => cfg.record_every = parse_val(&key, value)?,
        "eval-size" => cfg.eval_size = parse_val(&key, value)?,
        "sigma-penalty" => cfg.sigma_penalty = parse_val(&key, value)?,
        "clip" => cfg.clip = if value == "none" { None } else { Some(parse_val(&key, value)?) },
        _ => return Err(Error::Config(format!("unknown key '{key}'"))),
    }
    Ok(())
}

/// Every setting of `cfg`, in a form [`apply_setting`] reads back exactly.
pub fn config_snapshot(cfg: &TrainConfig) -> BTreeMap<&'static str, String> {
    let mut m = BTreeMap::new();
    m.insert("task", cfg.task.to_string());
    m.insert("seq-len", cfg.seq_len.to_string());
    m.insert("hidden", cfg.hidden.to_string());
    m.insert("m1", cfg.m1.to_string());
    m.insert("m2", cfg.m2.to_string());
    m.insert("r", cfg.radius.to_string());
    m.insert("sigma-star", cfg.center.to_string());
    m.insert("activation", cfg.activation.to_string());
    m.insert("model", cfg.model.to_string());
    m.insert("lr", cfg.lr.to_string());
    m.insert("decay", cfg.decay.to_string());
    m.insert("epoch-iters", cfg.epoch_iters.to_string());
    m.insert("batch", cfg.batch.to_string());
    m.insert("iters", cfg.iters.to_string());
    m.insert("seed", cfg.seed.to_string());
    m.insert("record-every", cfg.record_every.to_string());
    m.insert("eval-size", cfg.eval_size.to_string());
    m.insert("sigma-penalty", cfg.sigma_penalty.to_string());
    m.insert("clip", cfg.clip.map_or("none".to_string(), |c| c.to_string()));
    m
}

/// Defaults, then the seed environment variable, then the config file, then
/// flags.
pub fn resolve_train_config(args: &TrainArgs, env_seed: Option<&str>) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::default();
    if let Some(s) = env_seed {
        cfg.seed = s.trim().parse().map_err(|_| Error::Config(format!("{SEED_ENV}='{s}' is not a seed")))?;
    }
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path)?;
        for (k, v) in parse_config_file(&text)? {
            apply_setting(&mut cfg, &k, &v)?;
        }
    }
    if args.seq_len.is_some() && args.lag.is_some() {
        return Err(Error::Config("give only one of --seq-len and --lag".into()));
    }
    for (k, v) in args.flag_pairs() {
        apply_setting(&mut cfg, k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_train(args: &TrainArgs, out: &mut dyn Write) -> Result<i32> {
    let env_seed = std::env::var(SEED_ENV).ok();
    let cfg = resolve_train_config(args, env_seed.as_deref())?;
    fs::create_dir_all(&args.out)?;
    write_snapshot(&args.out.join(CONFIG_SNAPSHOT), &cfg)?;
    let mut csv = BufWriter::new(fs::File::create(args.out.join(METRICS_FILE))?);
    writeln!(csv, "{METRICS_HEADER}")?;
    csv.flush()?;
    let outcome = train_with(&cfg, |rec, _| {
        writeln!(csv, "{}", rec.csv_row())?;
        csv.flush()?;
        Ok(ControlFlow::Continue(()))
    });
    let outcome = match outcome {
        Ok(o) => o,
        Err(e) => {
            csv.flush()?;
            return Err(e);
        }
    };
    fs::write(args.out.join(CHECKPOINT_FILE), cell_to_text(&outcome.model))?;
    if let Some(last) = outcome.records.last() {
        writeln!(
            out,
            "iter {} loss {:.6} eval_metric {:.6} spectral_margin {:.6} flops {}",
            last.iteration, last.loss, last.eval_metric, last.spectral_margin, last.flops
        )?;
    }
    writeln!(out, "wrote {}", args.out.display())?;
    Ok(EXIT_OK)
}

fn write_snapshot(path: &Path, cfg: &TrainConfig) -> Result<()> {
    let mut s = String::new();
    for (k, v) in config_snapshot(cfg) {
        s.push_str(&format!("{k}={v}\n"));
    }
    fs::write(path, s)?;
    Ok(())
}

pub const GRADCHECK_MAX_HIDDEN: usize = 8;
pub const GRADCHECK_MAX_STEPS: usize = 5;
pub const GRADCHECK_TOLERANCE: f64 = 1e-5;

/// Random cell and regression problem for a gradient check.
pub fn gradcheck_setup(a: &GradcheckArgs) -> Result<(RnnCell, SequenceProblem)> {
    if a.hidden == 0 || a.hidden > GRADCHECK_MAX_HIDDEN || a.steps == 0 || a.steps > GRADCHECK_MAX_STEPS {
        return Err(Error::Config(format!(
            "gradcheck needs 1 <= hidden <= {GRADCHECK_MAX_HIDDEN} and 1 <= steps <= {GRADCHECK_MAX_STEPS}"
        )));
    }
    if a.batch == 0 || a.inputs == 0 || a.outputs == 0 {
        return Err(Error::Config("batch, inputs and outputs must be positive".into()));
    }
    let act: Activation = a.activation.parse()?;
    let model: ModelKind = a.model.parse()?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut cell = match model {
        ModelKind::SpectralRnn => RnnCell::spectral(a.hidden, a.inputs, a.outputs, a.m1, a.m2, a.r, 1.0, act, &mut rng)?,
        ModelKind::VanillaRnn => RnnCell::vanilla(a.hidden, a.inputs, a.outputs, act, &mut rng)?,
    };
    // move σ̂ and the bias off their zero initialization so every
    // parameter has a generic gradient
    let mut theta = cell.params();
    for t in theta.iter_mut() {
        *t += rng.random_range(-0.3..0.3);
    }
    cell.set_params(&theta)?;
    let mut sample = |len: usize| -> Vec<f64> { (0..len).map(|_| rng.random_range(-1.0..1.0)).collect() };
    let inputs: Vec<Vec<Vec<f64>>> = (0..a.batch).map(|_| (0..a.steps).map(|_| sample(a.inputs)).collect()).collect();
    let targets = (0..a.batch).map(|_| (0..a.steps).map(|_| Some(sample(a.outputs))).collect()).collect();
    Ok((cell, SequenceProblem { inputs, targets }))
}

fn cmd_gradcheck(a: &GradcheckArgs, out: &mut dyn Write) -> Result<i32> {
    let (cell, problem) = gradcheck_setup(a)?;
    let report = check_cell(&cell, &problem, a.step, a.break_gradient)?;
    if a.verbose {
        write!(out, "{report}")?;
    }
    let worst = report.worst().copied();
    let max = report.max_rel_error();
    writeln!(out, "parameters {}", report.rows.len())?;
    if let Some(w) = worst {
        writeln!(
            out,
            "worst coordinate {} analytic {:.9e} numeric {:.9e} rel-err {:.3e}",
            w.coordinate, w.analytic, w.numeric, w.rel_error
        )?;
    }
    let pass = max < GRADCHECK_TOLERANCE;
    writeln!(out, "max rel-err {max:.3e} ({})", if pass { "pass" } else { "FAIL" })?;
    Ok(if pass { EXIT_OK } else { EXIT_GRADCHECK })
}

fn cmd_bench(a: &BenchArgs, out: &mut dyn Write) -> Result<i32> {
    let n = a.hidden;
    if n == 0 || a.m1 > n || a.m2 > n {
        return Err(Error::Config(format!("need 0 < hidden and m1, m2 <= hidden, got {n}, {}, {}", a.m1, a.m2)));
    }
    let k = a.k.unwrap_or((n / 2).max(1));
    if k == 0 || k > n {
        return Err(Error::Config(format!("need 1 <= k <= hidden, got {k}")));
    }
    let kernels = [
        ("hprod", FlopKernel::Hprod { k }),
        ("hgrad", FlopKernel::Hgrad { n, k }),
        ("forward", FlopKernel::SpectralForward { n, m1: a.m1, m2: a.m2 }),
        ("backward", FlopKernel::SpectralBackward { n, m1: a.m1, m2: a.m2 }),
    ];
    writeln!(
        out,
        "{:<9} {:>12} {:>12} {:>12} {:>8} {:>8} {:>10}",
        "kernel", "leading", "predicted", "measured", "ratio", "in-5%", "wall-us"
    )?;
    for (name, kernel) in kernels {
        let measured = measured_flops(kernel, 1)? as f64;
        let predicted = predicted_flops(kernel);
        let ratio = if predicted > 0.0 { measured / predicted } else { f64::NAN };
        let within = (0.95..=1.05).contains(&ratio);
        let start = Instant::now();
        for rep in 0..a.reps {
            measured_flops(kernel, rep as u64)?;
        }
        let wall = start.elapsed().as_secs_f64() * 1e6 / a.reps.max(1) as f64;
        writeln!(
            out,
            "{:<9} {:>12} {:>12} {:>12} {:>8.4} {:>8} {:>10.2}",
            name,
            leading_flops(kernel),
            predicted,
            measured,
            ratio,
            if predicted > 0.0 { if within { "yes" } else { "no" } } else { "-" },
            wall
        )?;
    }
    Ok(EXIT_OK)
}

/// Reads a matrix with one comma-separated row per line.
pub fn read_csv_matrix(text: &str) -> Result<Matrix> {
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').map(|t| t.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number '{}'", t.trim())))).collect())
        .collect::<Result<_>>()?;
    if rows.is_empty() {
        return Err(Error::Parse("empty matrix file".into()));
    }
    Matrix::from_rows(&rows)
}

pub const DECOMPOSE_TOLERANCE: f64 = 1e-8;

fn cmd_decompose(a: &DecomposeArgs, out: &mut dyn Write) -> Result<i32> {
    let w = read_csv_matrix(&fs::read_to_string(&a.input)?)?;
    if !w.is_square() {
        return Err(Error::InvalidArgument(format!(
            "decompose takes a square matrix, got {}x{}",
            w.rows(),
            w.cols()
        )));
    }
    let n = w.rows();
    let opts = DecomposeOptions { center: a.sigma_star, radius: a.r };
    let s = decompose_square(&w, n, n, opts)?;
    let path = a.output.clone().unwrap_or_else(|| {
        let mut p = a.input.clone().into_os_string();
        p.push(".spectral");
        PathBuf::from(p)
    });
    fs::write(&path, s.to_text())?;
    let diff = w.sub(&s.materialize()).frobenius();
    let scale = w.frobenius();
    let err = if scale > 0.0 { diff / scale } else { diff };
    writeln!(out, "wrote {}", path.display())?;
    writeln!(out, "relative reconstruction error {err:.3e}")?;
    Ok(if err < DECOMPOSE_TOLERANCE { EXIT_OK } else { EXIT_RECONSTRUCTION })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::TaskKind;

    fn args(v: &[&str]) -> TrainArgs {
        match Cli::try_parse_from(std::iter::once("spectral-rnn").chain(v.iter().copied())).unwrap().command {
            Command::Train(a) => *a,
            _ => unreachable!(),
        }
    }

    #[test]
    fn precedence_flags_over_file_over_env() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("c.txt");
        fs::write(&file, "# comment\nlr = 0.01\nseed=7\nhidden=16\n").unwrap();
        let f = file.to_str().unwrap();
        let cfg = resolve_train_config(&args(&["train", "--config", f, "--hidden", "24"]), Some("3")).unwrap();
        assert_eq!((cfg.lr, cfg.seed, cfg.hidden), (0.01, 7, 24));
        let cfg = resolve_train_config(&args(&["train", "--lr", "0.1"]), Some("3")).unwrap();
        assert_eq!((cfg.lr, cfg.seed), (0.1, 3));
        let cfg = resolve_train_config(&args(&["train"]), None).unwrap();
        assert_eq!(cfg, TrainConfig::default());
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        let mut cfg = TrainConfig::default();
        assert!(apply_setting(&mut cfg, "learning_rate", "0.1").is_err());
        assert!(apply_setting(&mut cfg, "lr", "fast").is_err());
        assert!(parse_config_file("lr 0.1").is_err());
        assert!(resolve_train_config(&args(&["train", "--seed", "x"]), None).is_err());
        assert!(resolve_train_config(&args(&["train"]), Some("abc")).is_err());
        assert!(resolve_train_config(&args(&["train", "--seq-len", "5", "--lag", "6"]), None).is_err());
    }

    #[test]
    fn snapshot_round_trips() {
        let mut cfg = TrainConfig {
            lr: 0.1 + 0.2,
            clip: Some(2.5),
            activation: Activation::LeakyRelu(0.3),
            task: TaskKind::Copy,
            ..TrainConfig::default()
        };
        let mut back = TrainConfig::default();
        for (k, v) in config_snapshot(&cfg) {
            apply_setting(&mut back, k, &v).unwrap();
        }
        assert_eq!(back, cfg);
        cfg.clip = None;
        for (k, v) in config_snapshot(&cfg) {
            apply_setting(&mut back, k, &v).unwrap();
        }
        assert_eq!(back, cfg);
    }

    #[test]
    fn csv_matrix_parsing() {
        let m = read_csv_matrix("1, 2\n3,4\n\n").unwrap();
        assert_eq!(m.as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        assert!(read_csv_matrix("1,2\n3").is_err());
        assert!(read_csv_matrix("1,x").is_err());
        assert!(read_csv_matrix("").is_err());
    }

    #[test]
    fn gradcheck_limits_enforced() {
        let mut out = Vec::new();
        let mut err = Vec::new();
        assert_eq!(run(["spectral-rnn", "gradcheck", "--hidden", "9"], &mut out, &mut err), EXIT_USAGE);
        assert_eq!(run(["spectral-rnn", "gradcheck", "--steps", "6"], &mut out, &mut err), EXIT_USAGE);
    }

    #[test]
    fn usage_errors_exit_one() {
        let mut out = Vec::new();
        let mut err = Vec::new();
        assert_eq!(run(["spectral-rnn", "train", "--bogus"], &mut out, &mut err), EXIT_USAGE);
        assert_eq!(run(["spectral-rnn", "-x"], &mut out, &mut err), EXIT_USAGE);
        assert_eq!(run(["spectral-rnn", "--help"], &mut out, &mut err), EXIT_OK);
    }
}
