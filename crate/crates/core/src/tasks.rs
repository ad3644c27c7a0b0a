//! Synthetic long-memory benchmarks: the addition task and the copy task.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};

/// Independent generator streams derived from one seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Train = 0,
    Test = 1,
    Init = 2,
}

/// A ChaCha8 generator for `(seed, stream)`. Different streams never share
/// output for the same seed.
pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Each sample is a length-`L` sequence of `(value, marker)` pairs; exactly
/// two markers are 1. The target is the sum of the two marked values.
#[derive(Clone, Debug, PartialEq)]
pub struct AdditionBatch {
    /// `inputs[b][t] = [value, marker]`.
    pub inputs: Vec<Vec<[f64; 2]>>,
    pub targets: Vec<f64>,
}

impl AdditionBatch {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn seq_len(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    /// One line per sample: `target,v_1,…,v_L,m_1,…,m_L`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for (seq, t) in self.inputs.iter().zip(&self.targets) {
            let mut line = format!("{t}");
            for p in seq {
                line.push_str(&format!(",{}", p[0]));
            }
            for p in seq {
                line.push_str(&format!(",{}", p[1]));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// First marker uniform in the first half, second uniform in the second half.
pub fn gen_addition<R: Rng + ?Sized>(seq_len: usize, batch: usize, rng: &mut R) -> Result<AdditionBatch> {
    if seq_len < 2 {
        return Err(invalid(format!("addition task needs L >= 2, got {seq_len}")));
    }
    let half = seq_len / 2;
    let mut inputs = Vec::with_capacity(batch);
    let mut targets = Vec::with_capacity(batch);
    for _ in 0..batch {
        let mut seq: Vec<[f64; 2]> = (0..seq_len).map(|_| [rng.random::<f64>(), 0.0]).collect();
        let a = rng.random_range(0..half);
        let b = rng.random_range(half..seq_len);
        seq[a][1] = 1.0;
        seq[b][1] = 1.0;
        targets.push(seq[a][0] + seq[b][0]);
        inputs.push(seq);
    }
    Ok(AdditionBatch { inputs, targets })
}

/// MSE of always predicting 1 (the mean target).
pub fn addition_baseline_mse() -> f64 {
    1.0 / 6.0
}

pub const COPY_ALPHABET: usize = 10;
pub const COPY_PAYLOAD: usize = 10;
/// Payload symbols are drawn from `0..COPY_DATA_SYMBOLS`.
pub const COPY_DATA_SYMBOLS: usize = 8;
pub const COPY_BLANK: usize = 8;
pub const COPY_DELIMITER: usize = 9;

/// Layout of one input sequence (length `T + 20`, zero-based):
/// 10 payload symbols, `T` blanks, the delimiter at index `T + 10`, 9 blanks.
/// The target is blank except for its last 10 entries, which repeat the
/// payload, starting at the delimiter.
#[derive(Clone, Debug, PartialEq)]
pub struct CopyBatch {
    pub lag: usize,
    pub inputs: Vec<Vec<usize>>,
    pub targets: Vec<Vec<usize>>,
}

impl CopyBatch {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn seq_len(&self) -> usize {
        self.lag + 2 * COPY_PAYLOAD
    }

    /// One line per sample: the `T+20` input symbols then the `T+20` target symbols.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for (x, y) in self.inputs.iter().zip(&self.targets) {
            let cells: Vec<String> = x.iter().chain(y).map(usize::to_string).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

pub fn gen_copy<R: Rng + ?Sized>(lag: usize, batch: usize, rng: &mut R) -> Result<CopyBatch> {
    if lag < 1 {
        return Err(invalid("copy task needs T >= 1"));
    }
    let len = lag + 2 * COPY_PAYLOAD;
    let mut inputs = Vec::with_capacity(batch);
    let mut targets = Vec::with_capacity(batch);
    for _ in 0..batch {
        let mut x = vec![COPY_BLANK; len];
        let mut y = vec![COPY_BLANK; len];
        for i in 0..COPY_PAYLOAD {
            x[i] = rng.random_range(0..COPY_DATA_SYMBOLS);
            y[len - COPY_PAYLOAD + i] = x[i];
        }
        x[lag + COPY_PAYLOAD] = COPY_DELIMITER;
        inputs.push(x);
        targets.push(y);
    }
    Ok(CopyBatch { lag, inputs, targets })
}

/// Cross-entropy per position of the memoryless strategy: certain blanks,
/// then uniform guesses over the 8 data symbols.
pub fn copy_baseline_ce(lag: usize) -> f64 {
    COPY_PAYLOAD as f64 * (COPY_DATA_SYMBOLS as f64).ln() / (lag + 2 * COPY_PAYLOAD) as f64
}

pub fn one_hot(symbol: usize, size: usize) -> Vec<f64> {
    let mut v = vec![0.0; size];
    v[symbol] = 1.0;
    v
}
