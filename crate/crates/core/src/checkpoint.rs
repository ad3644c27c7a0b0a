//! Plain-text model checkpoints.
//!
//! ```text
//! rnn-checkpoint v1
//! activation <name>
//! transition spectral        (followed by a spectral-matrix record)
//! transition dense           (followed by a matrix block)
//! matrix <rows> <cols>       (input weights, then output weights)
//! <one row per line>
//! bias <values>
//! end
//! ```

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::layers::{Activation, RnnCell, Transition};
use crate::matrix::Matrix;
use crate::svd_param::SpectralMatrix;

const HEADER: &str = "rnn-checkpoint v1";

pub fn cell_to_text(cell: &RnnCell) -> String {
    let mut s = String::new();
    writeln!(s, "{HEADER}").unwrap();
    writeln!(s, "activation {}", cell.activation).unwrap();
    match &cell.transition {
        Transition::Spectral(w) => {
            writeln!(s, "transition spectral").unwrap();
            s.push_str(&w.to_text());
        }
        Transition::Dense(w) => {
            writeln!(s, "transition dense").unwrap();
            write_matrix(&mut s, w);
        }
    }
    write_matrix(&mut s, &cell.input_weights);
    write_matrix(&mut s, &cell.output_weights);
    writeln!(s, "bias{}", join(&cell.bias)).unwrap();
    writeln!(s, "end").unwrap();
    s
}

pub fn cell_from_text(text: &str) -> Result<RnnCell> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let mut next = |what: &str| -> Result<String> {
        lines.next().map(|l| l.trim().to_string()).ok_or_else(|| Error::Parse(format!("unexpected end, expected {what}")))
    };
    if next("header")? != HEADER {
        return Err(Error::Parse(format!("missing '{HEADER}' header")));
    }
    let act_line = next("activation")?;
    let activation: Activation = act_line
        .strip_prefix("activation ")
        .ok_or_else(|| Error::Parse(format!("expected activation, got '{act_line}'")))?
        .parse()?;
    // the spectral record parser consumes lines itself, so collect the rest
    let rest: Vec<String> = std::iter::from_fn(|| next("").ok()).collect();
    let mut it = rest.iter().map(String::as_str);
    let transition = match it.next() {
        Some("transition spectral") => Transition::Spectral(SpectralMatrix::from_lines(&mut it)?),
        Some("transition dense") => Transition::Dense(read_matrix(&mut it)?),
        other => return Err(Error::Parse(format!("expected transition kind, got {other:?}"))),
    };
    let input = read_matrix(&mut it)?;
    let output = read_matrix(&mut it)?;
    let bias_line = it.next().ok_or_else(|| Error::Parse("missing bias".into()))?;
    let bias = bias_line
        .strip_prefix("bias")
        .ok_or_else(|| Error::Parse(format!("expected bias, got '{bias_line}'")))?
        .split_whitespace()
        .map(parse_f64)
        .collect::<Result<Vec<_>>>()?;
    if it.next() != Some("end") {
        return Err(Error::Parse("missing 'end'".into()));
    }
    RnnCell::new(transition, input, output, bias, activation)
}

fn write_matrix(s: &mut String, m: &Matrix) {
    writeln!(s, "matrix {} {}", m.rows(), m.cols()).unwrap();
    for i in 0..m.rows() {
        writeln!(s, "{}", join(m.row(i)).trim_start()).unwrap();
    }
}

fn read_matrix<'a>(it: &mut impl Iterator<Item = &'a str>) -> Result<Matrix> {
    let head = it.next().ok_or_else(|| Error::Parse("missing matrix block".into()))?;
    let dims: Vec<&str> = head.split_whitespace().collect();
    let (rows, cols) = match dims.as_slice() {
        ["matrix", r, c] => (parse_usize(r)?, parse_usize(c)?),
        _ => return Err(Error::Parse(format!("expected 'matrix <rows> <cols>', got '{head}'"))),
    };
    let mut data = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        let line = it.next().ok_or_else(|| Error::Parse(format!("matrix row {i} missing")))?;
        let row = line.split_whitespace().map(parse_f64).collect::<Result<Vec<_>>>()?;
        if row.len() != cols {
            return Err(Error::Parse(format!("matrix row {i} has {} values, expected {cols}", row.len())));
        }
        data.extend(row);
    }
    Matrix::from_vec(rows, cols, data)
}

fn join(vals: &[f64]) -> String {
    let mut s = String::new();
    for v in vals {
        write!(s, " {v:e}").unwrap();
    }
    s
}

fn parse_f64(tok: &str) -> Result<f64> {
    tok.parse().map_err(|_| Error::Parse(format!("cannot parse '{tok}' as a number")))
}

fn parse_usize(tok: &str) -> Result<usize> {
    tok.parse().map_err(|_| Error::Parse(format!("cannot parse '{tok}' as a size")))
}
