//! Ground-truth CSV files: one `freq_hz` column followed by one column per
//! output channel, values written with 17 significant digits.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use fem_surrogate_core::beam::ResponseTable;
use fem_surrogate_core::surrogate::Experiment;
use fem_surrogate_core::ResponseSample;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: missing header row", path.display())]
    MissingHeader { path: PathBuf },
    #[error("{}: unrecognized header `{found}` (expected `freq_hz,amplitude` or `freq_hz,ux_max,uy_max,uz_max`)", path.display())]
    BadHeader { path: PathBuf, found: String },
    #[error("{}: line {line}: {reason}", path.display())]
    MalformedRow {
        path: PathBuf,
        /// 1-based line number; the header is line 1.
        line: u64,
        reason: String,
    },
}

/// Parsed ground-truth file.
#[derive(Debug, Clone, PartialEq)]
pub struct DataFile {
    pub experiment: Experiment,
    pub samples: Vec<ResponseSample>,
}

pub fn header_for(experiment: Experiment) -> Vec<&'static str> {
    let mut h = vec!["freq_hz"];
    h.extend_from_slice(experiment.channel_names());
    h
}

fn experiment_for_header(fields: &[&str]) -> Option<Experiment> {
    [Experiment::Example1, Experiment::Example2]
        .into_iter()
        .find(|e| header_for(*e) == fields)
}

pub fn write_samples_to<W: Write>(
    out: W,
    experiment: Experiment,
    samples: &[ResponseSample],
) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(out);
    w.write_record(header_for(experiment))?;
    for s in samples {
        let mut record = vec![format!("{:.16e}", s.freq_hz)];
        record.extend(s.outputs.iter().map(|v| format!("{v:.16e}")));
        w.write_record(&record)?;
    }
    w.flush()
}

pub fn write_samples(
    path: &Path,
    experiment: Experiment,
    samples: &[ResponseSample],
) -> Result<(), DataError> {
    let io_err = |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    write_samples_to(BufWriter::new(file), experiment, samples).map_err(io_err)
}

pub fn table_samples(table: &ResponseTable) -> Vec<ResponseSample> {
    fem_surrogate_core::surrogate::table_to_samples(table)
}

/// Parses a ground-truth CSV. `path` is used only in error messages.
pub fn read_samples_from<R: Read>(input: R, path: &Path) -> Result<DataFile, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut records = reader.records();
    let malformed = |line: u64, reason: String| DataError::MalformedRow {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let header = match records.next() {
        None => {
            return Err(DataError::MissingHeader {
                path: path.to_path_buf(),
            })
        }
        Some(r) => r.map_err(|e| csv_error(path, e))?,
    };
    let fields: Vec<&str> = header.iter().map(str::trim).collect();
    let experiment = experiment_for_header(&fields).ok_or_else(|| DataError::BadHeader {
        path: path.to_path_buf(),
        found: fields.join(","),
    })?;
    let width = fields.len();

    let mut samples = Vec::new();
    for (i, record) in records.enumerate() {
        let line = i as u64 + 2;
        let record = record.map_err(|e| csv_error(path, e))?;
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        if record.len() != width {
            return Err(malformed(
                line,
                format!("expected {width} fields, found {}", record.len()),
            ));
        }
        let mut values = Vec::with_capacity(width);
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                malformed(
                    line,
                    format!("column {} is not a number: `{field}`", col + 1),
                )
            })?;
            if !v.is_finite() || v < 0.0 {
                return Err(malformed(
                    line,
                    format!(
                        "column {} must be finite and non-negative, got {v}",
                        col + 1
                    ),
                ));
            }
            values.push(v);
        }
        let freq_hz = values.remove(0);
        samples.push(ResponseSample::new(freq_hz, values));
    }
    Ok(DataFile {
        experiment,
        samples,
    })
}

pub fn read_samples(path: &Path) -> Result<DataFile, DataError> {
    let file = File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_samples_from(file, path)
}

fn csv_error(path: &Path, e: csv::Error) -> DataError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => DataError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => DataError::MalformedRow {
            path: path.to_path_buf(),
            line,
            reason: format!("{other:?}"),
        },
    }
}
