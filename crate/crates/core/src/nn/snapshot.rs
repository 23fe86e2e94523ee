//! Text snapshot of network parameters.
//!
//! ```text
//! wd3-mlp v1
//! output identity            # or: output tanh_scaled <bound>
//! layer <fan_out> <fan_in>
//! w <fan_in row-major entries>   # one line per output row
//! b <fan_out entries>
//! ... (three layers)
//! end
//! ```
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! save/load cycle is bit-exact.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::nn::mlp::{Layer, MlpParams, OutputActivation, LAYER_COUNT};

pub const SNAPSHOT_HEADER: &str = "wd3-mlp v1";

pub fn write_snapshot<W: Write>(params: &MlpParams, out: &mut W) -> Result<()> {
    writeln!(out, "{SNAPSHOT_HEADER}")?;
    match params.output_activation() {
        OutputActivation::Identity => writeln!(out, "output identity")?,
        OutputActivation::TanhScaled { bound } => writeln!(out, "output tanh_scaled {bound}")?,
    }
    for layer in params.layers() {
        writeln!(out, "layer {} {}", layer.fan_out(), layer.fan_in())?;
        for row in layer.weights().chunks(layer.fan_in()) {
            writeln!(out, "w {}", join(row))?;
        }
        writeln!(out, "b {}", join(layer.biases()))?;
    }
    writeln!(out, "end")?;
    Ok(())
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn next_line<R: BufRead>(input: &mut R) -> Result<String> {
    let mut line = String::new();
    if input.read_line(&mut line)? == 0 {
        return Err(Error::Snapshot("unexpected end of input".into()));
    }
    Ok(line.trim_end().to_string())
}

fn parse_values(line: &str, tag: &str, expected: usize) -> Result<Vec<f64>> {
    let rest = line
        .strip_prefix(tag)
        .ok_or_else(|| Error::Snapshot(format!("expected '{tag}' line, got '{line}'")))?;
    let values = rest
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| Error::Snapshot(format!("bad number '{tok}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.len() != expected {
        return Err(Error::Snapshot(format!(
            "'{tag}' line has {} entries, expected {expected}",
            values.len()
        )));
    }
    Ok(values)
}

/// Reads one network written by [`write_snapshot`].
pub fn read_snapshot<R: BufRead>(input: &mut R) -> Result<MlpParams> {
    let header = next_line(input)?;
    if header != SNAPSHOT_HEADER {
        return Err(Error::Snapshot(format!("unsupported header '{header}'")));
    }
    let output_line = next_line(input)?;
    let output = match output_line.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["output", "identity"] => OutputActivation::Identity,
        ["output", "tanh_scaled", bound] => OutputActivation::TanhScaled {
            bound: bound
                .parse()
                .map_err(|_| Error::Snapshot(format!("bad bound '{bound}'")))?,
        },
        _ => return Err(Error::Snapshot(format!("bad output line '{output_line}'"))),
    };
    let mut layers = Vec::with_capacity(LAYER_COUNT);
    for _ in 0..LAYER_COUNT {
        let line = next_line(input)?;
        let dims: Vec<usize> = line
            .strip_prefix("layer ")
            .ok_or_else(|| Error::Snapshot(format!("expected layer line, got '{line}'")))?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Snapshot(format!("bad dim '{t}'"))))
            .collect::<Result<_>>()?;
        let [fan_out, fan_in] = dims[..] else {
            return Err(Error::Snapshot(format!("bad layer line '{line}'")));
        };
        let mut weights = Vec::with_capacity(fan_in * fan_out);
        for _ in 0..fan_out {
            weights.extend(parse_values(&next_line(input)?, "w", fan_in)?);
        }
        let biases = parse_values(&next_line(input)?, "b", fan_out)?;
        layers.push(Layer::new(fan_in, fan_out, weights, biases)?);
    }
    let end = next_line(input)?;
    if end != "end" {
        return Err(Error::Snapshot(format!("expected 'end', got '{end}'")));
    }
    MlpParams::from_layers(layers, output)
}
