//! Versioned plain-text model files.
//!
//! ```text
//! fem-surrogate-model
//! format_version 1
//! activation tanh
//! layers 1 100 100 1
//! input_scaler linear_minmax
//! input_column linear 1.0000000000000001e-1 1.0000000000000000e1
//! target_scaler log10 1.0000000000000000e-18
//! target_column log10 1.0000000000000000e-18
//! weights 0 ...
//! biases 0 ...
//! end
//! ```
//!
//! Parameters are written with 17 significant digits, so a save/load round
//! trip reproduces every weight exactly.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use fem_surrogate_core::dataset::{ColumnScale, DataScaler, Scaler};
use fem_surrogate_core::mlp::{Activation, Dense, Mlp};
use fem_surrogate_core::surrogate::Surrogate;
use fem_surrogate_core::ScaleScheme;
use thiserror::Error;

pub const MAGIC: &str = "fem-surrogate-model";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("model format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: String, expected: u32 },
    #[error("corrupt model file at line {line}: {reason}")]
    CorruptModel { line: usize, reason: String },
    #[error("model has no fitted scaler")]
    ModelNotTrained,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_owned(), |f| format!("{f:.16e}"))
}

fn write_values(out: &mut String, key: &str, index: usize, values: &[f64]) {
    let _ = write!(out, "{key} {index}");
    for v in values {
        let _ = write!(out, " {v:.16e}");
    }
    out.push('\n');
}

fn scheme_line(key: &str, scheme: ScaleScheme) -> String {
    match scheme {
        ScaleScheme::LinearMinMax => format!("{key} linear_minmax\n"),
        ScaleScheme::Log10 { floor } => format!("{key} log10 {}\n", fmt_opt(floor)),
    }
}

fn column_line(key: &str, column: &ColumnScale) -> String {
    match *column {
        ColumnScale::Linear { min, max } => format!("{key} linear {min:.16e} {max:.16e}\n"),
        ColumnScale::Log10 { floor } => format!("{key} log10 {}\n", fmt_opt(floor)),
    }
}

pub fn to_text(model: &Surrogate) -> Result<String, ModelFileError> {
    let scaler = model
        .scaler
        .as_ref()
        .ok_or(ModelFileError::ModelNotTrained)?;
    let mlp = &model.mlp;
    let mut out = format!("{MAGIC}\nformat_version {FORMAT_VERSION}\n");
    let _ = writeln!(out, "activation {}", mlp.hidden_activation.name());
    let sizes: Vec<String> = mlp.layer_sizes().iter().map(usize::to_string).collect();
    let _ = writeln!(out, "layers {}", sizes.join(" "));
    for (key, s) in [("input", &scaler.input), ("target", &scaler.target)] {
        out += &scheme_line(&format!("{key}_scaler"), s.scheme);
        for c in &s.columns {
            out += &column_line(&format!("{key}_column"), c);
        }
    }
    for (i, layer) in mlp.layers.iter().enumerate() {
        write_values(&mut out, "weights", i, &layer.weights);
        write_values(&mut out, "biases", i, &layer.biases);
    }
    out.push_str("end\n");
    Ok(out)
}

pub fn save_model(path: &Path, model: &Surrogate) -> Result<(), ModelFileError> {
    fs::write(path, to_text(model)?).map_err(|source| ModelFileError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<Surrogate, ModelFileError> {
    let text = fs::read_to_string(path).map_err(|source| ModelFileError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    from_text(&text)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn corrupt(&self, reason: impl Into<String>) -> ModelFileError {
        ModelFileError::CorruptModel {
            line: self.line,
            reason: reason.into(),
        }
    }

    /// Next line split into its key and the remaining fields.
    fn next_entry(&mut self, key: &str) -> Result<Vec<&'a str>, ModelFileError> {
        let (i, text) = self
            .inner
            .next()
            .ok_or_else(|| self.corrupt(format!("file ends before `{key}`")))?;
        self.line = i + 1;
        let mut fields = text.split_whitespace();
        match fields.next() {
            Some(k) if k == key => Ok(fields.collect()),
            other => {
                Err(self.corrupt(format!("expected `{key}`, found `{}`", other.unwrap_or(""))))
            }
        }
    }

    fn float(&self, s: &str) -> Result<f64, ModelFileError> {
        let v: f64 = s
            .parse()
            .map_err(|_| self.corrupt(format!("not a number: `{s}`")))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.corrupt(format!("non-finite value `{s}`")))
        }
    }

    fn opt_float(&self, s: &str) -> Result<Option<f64>, ModelFileError> {
        if s == "none" {
            Ok(None)
        } else {
            self.float(s).map(Some)
        }
    }

    fn one<'f>(&self, fields: &[&'f str]) -> Result<&'f str, ModelFileError> {
        match fields {
            [only] => Ok(only),
            _ => Err(self.corrupt(format!("expected 1 field, found {}", fields.len()))),
        }
    }

    fn scaler(&mut self, key: &str, columns: usize) -> Result<Scaler, ModelFileError> {
        let fields = self.next_entry(&format!("{key}_scaler"))?;
        let scheme = match fields.as_slice() {
            ["linear_minmax"] => ScaleScheme::LinearMinMax,
            ["log10", floor] => ScaleScheme::Log10 {
                floor: self.opt_float(floor)?,
            },
            _ => return Err(self.corrupt(format!("unknown scaler `{}`", fields.join(" ")))),
        };
        let column_key = format!("{key}_column");
        let mut cols = Vec::with_capacity(columns);
        for _ in 0..columns {
            let fields = self.next_entry(&column_key)?;
            cols.push(match fields.as_slice() {
                ["linear", min, max] => ColumnScale::Linear {
                    min: self.float(min)?,
                    max: self.float(max)?,
                },
                ["log10", floor] => ColumnScale::Log10 {
                    floor: self.opt_float(floor)?,
                },
                _ => {
                    return Err(self.corrupt(format!("unknown column scale `{}`", fields.join(" "))))
                }
            });
        }
        Ok(Scaler {
            scheme,
            columns: cols,
        })
    }

    fn values(
        &mut self,
        key: &str,
        index: usize,
        count: usize,
    ) -> Result<Vec<f64>, ModelFileError> {
        let fields = self.next_entry(key)?;
        let (first, rest) = fields
            .split_first()
            .ok_or_else(|| self.corrupt(format!("`{key}` without a layer index")))?;
        if first.parse::<usize>().ok() != Some(index) {
            return Err(self.corrupt(format!("expected {key} for layer {index}, found `{first}`")));
        }
        if rest.len() != count {
            return Err(self.corrupt(format!(
                "layer {index} {key}: expected {count} values, found {}",
                rest.len()
            )));
        }
        rest.iter().map(|s| self.float(s)).collect()
    }
}

pub fn from_text(text: &str) -> Result<Surrogate, ModelFileError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    lines.next_entry(MAGIC)?;
    let version = lines.next_entry("format_version")?;
    let version = lines.one(&version)?;
    if version.parse::<u32>().ok() != Some(FORMAT_VERSION) {
        return Err(ModelFileError::VersionMismatch {
            found: version.to_owned(),
            expected: FORMAT_VERSION,
        });
    }
    let act = lines.next_entry("activation")?;
    let act = lines.one(&act)?;
    let activation = Activation::from_name(act)
        .ok_or_else(|| lines.corrupt(format!("unknown activation `{act}`")))?;
    let sizes = lines.next_entry("layers")?;
    let sizes: Vec<usize> = sizes
        .iter()
        .map(|s| {
            s.parse()
                .map_err(|_| lines.corrupt(format!("bad layer size `{s}`")))
        })
        .collect::<Result<_, _>>()?;
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(lines.corrupt("need at least two non-zero layer sizes"));
    }
    let input = lines.scaler("input", sizes[0])?;
    let target = lines.scaler("target", sizes[sizes.len() - 1])?;

    let mut layers = Vec::with_capacity(sizes.len() - 1);
    for (i, w) in sizes.windows(2).enumerate() {
        let weights = lines.values("weights", i, w[0] * w[1])?;
        let biases = lines.values("biases", i, w[1])?;
        layers.push(Dense {
            inputs: w[0],
            outputs: w[1],
            weights,
            biases,
        });
    }
    lines.next_entry("end")?;
    let mlp = Mlp::from_layers(layers, activation).map_err(|e| lines.corrupt(e.to_string()))?;
    Ok(Surrogate::new(mlp, DataScaler { input, target }))
}
