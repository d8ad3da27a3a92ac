//! Plain-text model files.
//!
//! ```text
//! eauq-mlp 1
//! scalar f64
//! epoch 150                # checkpoints only
//! activation relu
//! dropout_rate 2.0000000000000001e-1
//! layer_sizes 16 16 1
//! weights 0
//! <one line per output unit, input-major>
//! biases 0
//! <one line>
//! ...
//! end
//! ```
//!
//! Values are written with 17 significant digits, so `f64` (and therefore `f32`) parameters
//! round-trip bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use super::model::{Activation, Mlp};
use super::train::Checkpoint;
use crate::error::{Error, Result};
use crate::scalar::Real;

const MAGIC: &str = "eauq-mlp";
const VERSION: u32 = 1;

fn scalar_name<T>() -> &'static str {
    std::any::type_name::<T>()
}

fn fmt_value<T: Real>(out: &mut String, v: T) {
    let v = v.to_f64().expect("real converts to f64");
    let _ = write!(out, "{v:.16e}");
}

fn write_model<T: Real>(model: &Mlp<T>, epoch: Option<usize>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} {VERSION}");
    let _ = writeln!(out, "scalar {}", scalar_name::<T>());
    if let Some(e) = epoch {
        let _ = writeln!(out, "epoch {e}");
    }
    let Activation::Relu = model.hidden_activation();
    let _ = writeln!(out, "activation relu");
    out.push_str("dropout_rate ");
    fmt_value(&mut out, model.dropout_rate());
    out.push('\n');
    let sizes: Vec<String> = model.layer_sizes().iter().map(usize::to_string).collect();
    let _ = writeln!(out, "layer_sizes {}", sizes.join(" "));
    let layers = model.layer_sizes().iter().zip(model.weights()).zip(model.biases());
    for (l, ((&n_in, w), b)) in layers.enumerate() {
        let _ = writeln!(out, "weights {l}");
        for row in w.chunks(n_in) {
            write_row(&mut out, row);
        }
        let _ = writeln!(out, "biases {l}");
        write_row(&mut out, b);
    }
    out.push_str("end\n");
    out
}

fn write_row<T: Real>(out: &mut String, row: &[T]) {
    for (i, &v) in row.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        fmt_value(out, v);
    }
    out.push('\n');
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Result<(usize, &'a str)> {
        for (i, line) in self.inner.by_ref() {
            let line = line.split('#').next().unwrap_or("").trim();
            if !line.is_empty() {
                return Ok((i + 1, line));
            }
        }
        Err(Error::Format("unexpected end of file".into()))
    }

    fn keyed(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (n, line) = self.next_line()?;
        match line.split_once(' ') {
            Some((k, rest)) if k == key => Ok((n, rest.trim())),
            _ => Err(Error::Format(format!("line {n}: expected `{key} ...`, found `{line}`"))),
        }
    }
}

fn parse_values<T: Real>(n: usize, text: &str, expected: usize) -> Result<Vec<T>> {
    let vals = text
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .ok()
                .and_then(T::from_f64)
                .ok_or_else(|| Error::Format(format!("line {n}: bad number `{tok}`")))
        })
        .collect::<Result<Vec<T>>>()?;
    if vals.len() != expected {
        return Err(Error::Format(format!(
            "line {n}: expected {expected} values, found {}",
            vals.len()
        )));
    }
    Ok(vals)
}

fn read_model<T: Real>(text: &str) -> Result<(Mlp<T>, Option<usize>)> {
    let mut lines = Lines { inner: text.lines().enumerate() };
    let (n, header) = lines.next_line()?;
    if header != format!("{MAGIC} {VERSION}") {
        return Err(Error::Format(format!("line {n}: unsupported header `{header}`")));
    }
    let (n, scalar) = lines.keyed("scalar")?;
    if scalar != scalar_name::<T>() {
        return Err(Error::Format(format!(
            "line {n}: file stores `{scalar}`, requested `{}`",
            scalar_name::<T>()
        )));
    }
    let (mut n, mut line) = lines.next_line()?;
    let mut epoch = None;
    if let Some(rest) = line.strip_prefix("epoch ") {
        epoch = Some(
            rest.trim()
                .parse()
                .map_err(|_| Error::Format(format!("line {n}: bad epoch")))?,
        );
        (n, line) = lines.next_line()?;
    }
    if line != "activation relu" {
        return Err(Error::Format(format!("line {n}: unsupported activation `{line}`")));
    }
    let (n, rate) = lines.keyed("dropout_rate")?;
    let rate = parse_values::<T>(n, rate, 1)?[0];
    let (n, sizes) = lines.keyed("layer_sizes")?;
    let sizes = sizes
        .split_whitespace()
        .map(|s| s.parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| Error::Format(format!("line {n}: bad layer sizes")))?;
    if sizes.len() < 2 {
        return Err(Error::Format(format!("line {n}: need at least two layer sizes")));
    }

    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for l in 0..sizes.len() - 1 {
        let (n_in, n_out) = (sizes[l], sizes[l + 1]);
        let (n, idx) = lines.keyed("weights")?;
        if idx != l.to_string() {
            return Err(Error::Format(format!("line {n}: expected weights {l}")));
        }
        let mut w = Vec::with_capacity(n_in * n_out);
        for _ in 0..n_out {
            let (n, row) = lines.next_line()?;
            w.extend(parse_values::<T>(n, row, n_in)?);
        }
        let (n, idx) = lines.keyed("biases")?;
        if idx != l.to_string() {
            return Err(Error::Format(format!("line {n}: expected biases {l}")));
        }
        let (n, row) = lines.next_line()?;
        biases.push(parse_values::<T>(n, row, n_out)?);
        weights.push(w);
    }
    let (n, line) = lines.next_line()?;
    if line != "end" {
        return Err(Error::Format(format!("line {n}: expected `end`")));
    }
    let model = Mlp::from_parts(sizes, weights, biases, rate)
        .map_err(|e| Error::Format(e.to_string()))?;
    Ok((model, epoch))
}

impl<T: Real> Mlp<T> {
    pub fn to_text(&self) -> String {
        write_model(self, None)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        read_model(text).map(|(m, _)| m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

impl<T: Real> Checkpoint<T> {
    pub fn to_text(&self) -> String {
        write_model(&self.model, Some(self.epoch))
    }

    pub fn from_text(text: &str) -> Result<Self> {
        match read_model(text)? {
            (model, Some(epoch)) => Ok(Self { epoch, model }),
            (_, None) => Err(Error::Format("checkpoint file has no epoch line".into())),
        }
    }
}
