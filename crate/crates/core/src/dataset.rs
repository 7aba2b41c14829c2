//! Training material: response samples, seeded train/test split, and
//! column scalers (min-max or log10) fitted on the training partition only.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Floor applied before taking log10 of a displacement, in meters.
pub const LOG_FLOOR: f64 = 1e-18;

pub const DEFAULT_TEST_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatasetError {
    #[error("need at least 5 samples and a non-empty train and test partition (got {samples} samples, test fraction {test_fraction})")]
    TooFewSamples { samples: usize, test_fraction: f64 },
    #[error("test fraction must lie strictly between 0 and 1 (got {0})")]
    InvalidFraction(f64),
    #[error("cannot fit a scaler on an empty set")]
    EmptyTrain,
    #[error("column {column} has non-positive value {value:e}, log10 scaling needs a floor")]
    NonPositiveForLog { column: usize, value: f64 },
    #[error("dimension mismatch: scaler has {expected} columns, data has {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
}

/// One ground-truth record: a driving frequency and the response outputs
/// (amplitude, or per-axis maximum displacements) in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseSample {
    pub freq_hz: f64,
    pub outputs: Vec<f64>,
}

impl ResponseSample {
    pub fn new(freq_hz: f64, outputs: Vec<f64>) -> Self {
        Self { freq_hz, outputs }
    }
}

/// Train/test partition of a sample list. Both sides keep the input order.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitDataset {
    pub train: Vec<ResponseSample>,
    pub test: Vec<ResponseSample>,
    pub seed: u64,
    /// Positions in the original list that went to the test side, ascending.
    pub test_indices: Vec<usize>,
}

impl SplitDataset {
    pub fn is_test(&self, index: usize) -> bool {
        self.test_indices.binary_search(&index).is_ok()
    }
}

/// Seeded random split; `round(test_fraction * N)` samples go to the test side.
pub fn split(
    samples: &[ResponseSample],
    test_fraction: f64,
    seed: u64,
) -> Result<SplitDataset, DatasetError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DatasetError::InvalidFraction(test_fraction));
    }
    let n = samples.len();
    let n_test = libm::round(test_fraction * n as f64) as usize;
    if n < 5 || n_test == 0 || n_test == n {
        return Err(DatasetError::TooFewSamples {
            samples: n,
            test_fraction,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut test_indices = order[..n_test].to_vec();
    test_indices.sort_unstable();

    let mut train = Vec::with_capacity(n - n_test);
    let mut test = Vec::with_capacity(n_test);
    let mut next_test = test_indices.iter().peekable();
    for (i, s) in samples.iter().enumerate() {
        if next_test.peek() == Some(&&i) {
            next_test.next();
            test.push(s.clone());
        } else {
            train.push(s.clone());
        }
    }
    Ok(SplitDataset {
        train,
        test,
        seed,
        test_indices,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScaleScheme {
    /// Maps the training range of each column onto [0, 1].
    LinearMinMax,
    /// `log10(max(x, floor))`; without a floor, non-positive values are rejected.
    Log10 { floor: Option<f64> },
}

impl ScaleScheme {
    pub fn log10_floored() -> Self {
        ScaleScheme::Log10 {
            floor: Some(LOG_FLOOR),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScaleScheme::LinearMinMax => "linear_minmax",
            ScaleScheme::Log10 { .. } => "log10",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ColumnScale {
    Linear { min: f64, max: f64 },
    Log10 { floor: Option<f64> },
}

impl ColumnScale {
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            ColumnScale::Linear { min, max } => (x - min) / span(min, max),
            ColumnScale::Log10 { floor } => libm::log10(floor.map_or(x, |f| x.max(f))),
        }
    }

    pub fn invert(&self, y: f64) -> f64 {
        match *self {
            ColumnScale::Linear { min, max } => min + y * span(min, max),
            ColumnScale::Log10 { .. } => libm::exp10(y),
        }
    }
}

fn span(min: f64, max: f64) -> f64 {
    if max > min {
        max - min
    } else {
        1.0
    }
}

/// Independent per-column transform.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub scheme: ScaleScheme,
    pub columns: Vec<ColumnScale>,
}

impl Scaler {
    /// Fits one transform per column of `rows`. Values outside the fitted
    /// range are extrapolated, never clamped.
    pub fn fit<R: AsRef<[f64]>>(rows: &[R], scheme: ScaleScheme) -> Result<Self, DatasetError> {
        let first = rows.first().ok_or(DatasetError::EmptyTrain)?;
        let width = first.as_ref().len();
        for r in rows {
            if r.as_ref().len() != width {
                return Err(DatasetError::DimensionMismatch {
                    expected: width,
                    actual: r.as_ref().len(),
                });
            }
        }
        let columns = (0..width)
            .map(|c| match scheme {
                ScaleScheme::LinearMinMax => {
                    let (min, max) = rows
                        .iter()
                        .map(|r| r.as_ref()[c])
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                            (lo.min(v), hi.max(v))
                        });
                    Ok(ColumnScale::Linear { min, max })
                }
                ScaleScheme::Log10 { floor } => {
                    if floor.is_none() {
                        if let Some(value) =
                            rows.iter().map(|r| r.as_ref()[c]).find(|&v| !(v > 0.0))
                        {
                            return Err(DatasetError::NonPositiveForLog { column: c, value });
                        }
                    }
                    Ok(ColumnScale::Log10 { floor })
                }
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { scheme, columns })
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn apply(&self, row: &[f64]) -> Result<Vec<f64>, DatasetError> {
        self.check(row)?;
        Ok(row
            .iter()
            .zip(&self.columns)
            .map(|(&x, c)| c.apply(x))
            .collect())
    }

    pub fn invert(&self, row: &[f64]) -> Result<Vec<f64>, DatasetError> {
        self.check(row)?;
        Ok(row
            .iter()
            .zip(&self.columns)
            .map(|(&y, c)| c.invert(y))
            .collect())
    }

    fn check(&self, row: &[f64]) -> Result<(), DatasetError> {
        if row.len() != self.columns.len() {
            return Err(DatasetError::DimensionMismatch {
                expected: self.columns.len(),
                actual: row.len(),
            });
        }
        Ok(())
    }
}

/// Network-ready rows: scaled inputs and targets, one row per sample.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScaledSet {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl ScaledSet {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Frequency input scaler (always min-max) plus target scaler.
#[derive(Debug, Clone, PartialEq)]
pub struct DataScaler {
    pub input: Scaler,
    pub target: Scaler,
}

impl DataScaler {
    /// Fits on `train` alone.
    pub fn fit(train: &[ResponseSample], target_scheme: ScaleScheme) -> Result<Self, DatasetError> {
        let freqs: Vec<[f64; 1]> = train.iter().map(|s| [s.freq_hz]).collect();
        let outputs: Vec<&[f64]> = train.iter().map(|s| s.outputs.as_slice()).collect();
        Ok(Self {
            input: Scaler::fit(&freqs, ScaleScheme::LinearMinMax)?,
            target: Scaler::fit(&outputs, target_scheme)?,
        })
    }

    /// Frequency range seen during fitting.
    pub fn input_range(&self) -> (f64, f64) {
        match self.input.columns[0] {
            ColumnScale::Linear { min, max } => (min, max),
            ColumnScale::Log10 { .. } => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn apply(&self, samples: &[ResponseSample]) -> Result<ScaledSet, DatasetError> {
        let mut set = ScaledSet::default();
        for s in samples {
            set.inputs.push(self.input.apply(&[s.freq_hz])?);
            set.targets.push(self.target.apply(&s.outputs)?);
        }
        Ok(set)
    }

    pub fn invert(&self, scaled: &ScaledSet) -> Result<Vec<ResponseSample>, DatasetError> {
        scaled
            .inputs
            .iter()
            .zip(&scaled.targets)
            .map(|(x, y)| {
                let f = self.input.invert(x)?;
                Ok(ResponseSample::new(f[0], self.target.invert(y)?))
            })
            .collect()
    }
}

/// Fits a target scaler on the outputs of `train`.
pub fn scale_fit(train: &[ResponseSample], scheme: ScaleScheme) -> Result<Scaler, DatasetError> {
    let outputs: Vec<&[f64]> = train.iter().map(|s| s.outputs.as_slice()).collect();
    Scaler::fit(&outputs, scheme)
}
