//! Plain-text model files.
//!
//! ```text
//! euler-sysid-mlp 1
//! layer_sizes 2 64 2
//! weights 0 64 2
//! <64 lines of 2 space-separated values>
//! bias 0 64
//! <64 values on one line>
//! weights 1 2 64
//! ...
//! ```
//!
//! Values use the shortest decimal form that parses back to the same bits.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{Mlp, NeuralError};
use crate::numfmt::format_f64;

pub const MODEL_FORMAT_HEADER: &str = "euler-sysid-mlp 1";

fn join(values: impl Iterator<Item = f64>) -> String {
    values.map(format_f64).collect::<Vec<_>>().join(" ")
}

pub fn write_model<W: Write>(net: &Mlp, mut w: W) -> Result<(), NeuralError> {
    writeln!(w, "{MODEL_FORMAT_HEADER}")?;
    let sizes: Vec<String> = net.layer_sizes().iter().map(|n| n.to_string()).collect();
    writeln!(w, "layer_sizes {}", sizes.join(" "))?;
    for (l, (weights, bias)) in net.weights().iter().zip(net.biases()).enumerate() {
        writeln!(w, "weights {l} {} {}", weights.nrows(), weights.ncols())?;
        for row in weights.rows() {
            writeln!(w, "{}", join(row.iter().copied()))?;
        }
        writeln!(w, "bias {l} {}", bias.len())?;
        writeln!(w, "{}", join(bias.iter().copied()))?;
    }
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next(&mut self) -> Result<String, NeuralError> {
        self.line += 1;
        match self.inner.next() {
            Some(l) => Ok(l?.trim_end_matches('\r').to_string()),
            None => Err(self.err("unexpected end of file")),
        }
    }

    fn err(&self, msg: impl Into<String>) -> NeuralError {
        NeuralError::Parse {
            line: self.line,
            msg: msg.into(),
        }
    }

    fn floats(&mut self, expected: usize) -> Result<Vec<f64>, NeuralError> {
        let text = self.next()?;
        let values = text
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| self.err(format!("`{t}`: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        if values.len() != expected {
            return Err(self.err(format!("expected {expected} values, got {}", values.len())));
        }
        Ok(values)
    }

    /// A `<keyword> <ints...>` line.
    fn tagged(&mut self, keyword: &str) -> Result<Vec<usize>, NeuralError> {
        let text = self.next()?;
        let mut parts = text.split_whitespace();
        if parts.next() != Some(keyword) {
            return Err(self.err(format!("expected `{keyword}`, got `{text}`")));
        }
        parts
            .map(|t| t.parse::<usize>().map_err(|e| self.err(format!("`{t}`: {e}"))))
            .collect()
    }
}

pub fn read_model<R: BufRead>(reader: R) -> Result<Mlp, NeuralError> {
    let mut lines = Lines {
        inner: reader.lines(),
        line: 0,
    };
    let head = lines.next()?;
    if head.trim() != MODEL_FORMAT_HEADER {
        return Err(lines.err(format!("expected `{MODEL_FORMAT_HEADER}`, got `{head}`")));
    }
    let sizes = lines.tagged("layer_sizes")?;
    if sizes.len() < 2 {
        return Err(lines.err("layer_sizes needs at least two entries"));
    }
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for l in 0..sizes.len() - 1 {
        let (rows, cols) = (sizes[l + 1], sizes[l]);
        if lines.tagged("weights")? != [l, rows, cols] {
            return Err(lines.err(format!("expected `weights {l} {rows} {cols}`")));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            data.extend(lines.floats(cols)?);
        }
        weights.push(Array2::from_shape_vec((rows, cols), data).expect("rows * cols values"));
        if lines.tagged("bias")? != [l, rows] {
            return Err(lines.err(format!("expected `bias {l} {rows}`")));
        }
        biases.push(Array1::from(lines.floats(rows)?));
    }
    Mlp::from_parts(sizes, weights, biases)
}

impl Mlp {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), NeuralError> {
        let mut w = BufWriter::new(File::create(path)?);
        write_model(self, &mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NeuralError> {
        read_model(BufReader::new(File::open(path)?))
    }
}
