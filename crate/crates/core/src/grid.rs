use alloc::vec::Vec;
use core::f64::consts::PI;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("frequency grid is empty")]
    Empty,
    #[error("frequency {value} at index {index} is negative or not finite")]
    InvalidValue { index: usize, value: f64 },
    #[error("frequencies must be strictly increasing (index {index})")]
    NotIncreasing { index: usize },
    #[error(
        "uniform grid needs start < end and at least 2 points (got [{start}, {end}] with {points})"
    )]
    BadRange { start: f64, end: f64, points: usize },
}

/// Strictly increasing list of driving frequencies in Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    values: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(values: Vec<f64>) -> Result<Self, GridError> {
        if values.is_empty() {
            return Err(GridError::Empty);
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(GridError::InvalidValue { index, value });
            }
            if index > 0 && value <= values[index - 1] {
                return Err(GridError::NotIncreasing { index });
            }
        }
        Ok(Self { values })
    }

    /// `points` evenly spaced frequencies from `start` to `end` inclusive.
    pub fn uniform(start: f64, end: f64, points: usize) -> Result<Self, GridError> {
        if points < 2 || !(start < end) || start < 0.0 || !end.is_finite() {
            return Err(GridError::BadRange { start, end, points });
        }
        let step = (end - start) / (points - 1) as f64;
        let mut values: Vec<f64> = (0..points).map(|i| start + step * i as f64).collect();
        values[points - 1] = end;
        Self::new(values)
    }

    pub fn single(freq_hz: f64) -> Result<Self, GridError> {
        Self::new(alloc::vec![freq_hz])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.values[0]
    }

    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Largest spacing between neighbouring points (0 for a single point).
    pub fn max_step(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }
}

pub fn angular(freq_hz: f64) -> f64 {
    2.0 * PI * freq_hz
}

pub fn hertz(omega: f64) -> f64 {
    omega / (2.0 * PI)
}
