//! Steady-state response of a driven, damped, single-degree-of-freedom
//! oscillator `m x'' + c x' + k x = F0 sin(ωt)`.
//!
//! The closed form is the ground truth for the first surrogate experiment. A
//! fixed-step RK4 integrator provides an independent check of it.

use alloc::vec::Vec;

use thiserror::Error;

use crate::dataset::ResponseSample;
use crate::grid::{angular, hertz, FrequencyGrid};

/// Relative distance from the natural frequency treated as exact resonance
/// when the oscillator is undamped.
const RESONANCE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OscillatorError {
    #[error("invalid oscillator parameter `{field}`: {reason}")]
    InvalidParams {
        field: &'static str,
        reason: &'static str,
    },
    #[error("undamped oscillator driven at its natural frequency has unbounded amplitude")]
    UnboundedResonance,
    #[error("at {freq_hz} Hz: {source}")]
    AtFrequency {
        freq_hz: f64,
        #[source]
        source: alloc::boxed::Box<OscillatorError>,
    },
    #[error("time integration did not settle: last cycle maxima {previous:e} vs {last:e}")]
    NonConvergent { previous: f64, last: f64 },
}

/// Mass (kg), damping (N·s/m), stiffness (N/m), and force amplitude (N).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorParams {
    pub mass: f64,
    pub damping: f64,
    pub stiffness: f64,
    pub force_amplitude: f64,
}

impl OscillatorParams {
    pub fn new(
        mass: f64,
        damping: f64,
        stiffness: f64,
        force_amplitude: f64,
    ) -> Result<Self, OscillatorError> {
        let p = Self {
            mass,
            damping,
            stiffness,
            force_amplitude,
        };
        p.validate()?;
        Ok(p)
    }

    /// m = 1 kg, c = 0.2 N·s/m, k = 986.96 N/m (f0 ≈ 5 Hz), F0 = 1 N.
    pub fn example1() -> Self {
        Self {
            mass: 1.0,
            damping: 0.2,
            stiffness: 986.96,
            force_amplitude: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), OscillatorError> {
        let check = |ok: bool, field, reason| {
            if ok {
                Ok(())
            } else {
                Err(OscillatorError::InvalidParams { field, reason })
            }
        };
        check(
            self.mass.is_finite() && self.mass > 0.0,
            "mass",
            "must be positive and finite",
        )?;
        check(
            self.stiffness.is_finite() && self.stiffness > 0.0,
            "stiffness",
            "must be positive and finite",
        )?;
        check(
            self.damping.is_finite() && self.damping >= 0.0,
            "damping",
            "must be non-negative and finite",
        )?;
        check(
            self.force_amplitude.is_finite() && self.force_amplitude >= 0.0,
            "force_amplitude",
            "must be non-negative and finite",
        )
    }

    /// Undamped natural angular frequency, rad/s.
    pub fn natural_angular_frequency(&self) -> f64 {
        libm::sqrt(self.stiffness / self.mass)
    }

    /// Frequency (Hz) of the amplitude maximum,
    /// `ω0 sqrt(1 - c²/(2mk)) / 2π`. `None` when `c² >= 2mk` (no interior peak).
    pub fn peak_frequency(&self) -> Option<f64> {
        let r = self.damping * self.damping / (2.0 * self.mass * self.stiffness);
        if r >= 1.0 {
            return None;
        }
        Some(hertz(
            self.natural_angular_frequency() * libm::sqrt(1.0 - r),
        ))
    }
}

/// Steady-state amplitude (m) at driving frequency `freq_hz`.
pub fn amplitude(params: &OscillatorParams, freq_hz: f64) -> Result<f64, OscillatorError> {
    if !freq_hz.is_finite() || freq_hz < 0.0 {
        return Err(OscillatorError::InvalidParams {
            field: "freq_hz",
            reason: "must be non-negative and finite",
        });
    }
    amplitude_angular(params, angular(freq_hz))
}

/// Steady-state amplitude (m) at angular frequency `omega` (rad/s).
pub fn amplitude_angular(params: &OscillatorParams, omega: f64) -> Result<f64, OscillatorError> {
    params.validate()?;
    if !omega.is_finite() || omega < 0.0 {
        return Err(OscillatorError::InvalidParams {
            field: "omega",
            reason: "must be non-negative and finite",
        });
    }
    let w0 = params.natural_angular_frequency();
    if params.damping == 0.0 && libm::fabs(omega - w0) / w0 < RESONANCE_TOLERANCE {
        return Err(OscillatorError::UnboundedResonance);
    }
    let m = params.mass;
    let detune = w0 * w0 - omega * omega;
    let loss = params.damping * omega / m;
    Ok((params.force_amplitude / m) / libm::sqrt(detune * detune + loss * loss))
}

/// One single-output sample per grid point, in grid order.
pub fn sweep_oscillator(
    params: &OscillatorParams,
    grid: &FrequencyGrid,
) -> Result<Vec<ResponseSample>, OscillatorError> {
    grid.values()
        .iter()
        .map(|&f| {
            amplitude(params, f)
                .map(|a| ResponseSample::new(f, alloc::vec![a]))
                .map_err(|e| OscillatorError::AtFrequency {
                    freq_hz: f,
                    source: alloc::boxed::Box::new(e),
                })
        })
        .collect()
}

/// Integrates the forced equation of motion from rest with classical RK4 at
/// `steps_per_cycle` fixed steps per forcing period for `cycles` periods,
/// and returns the largest `|x|` over the last 20% of the window.
///
/// Requires `damping > 0`, `freq_hz > 0`, `cycles >= 50`, and
/// `steps_per_cycle >= 100`. Fails with `NonConvergent` when the maxima of
/// the last two cycles differ by more than 0.5%.
pub fn steady_state_oracle(
    params: &OscillatorParams,
    freq_hz: f64,
    cycles: usize,
    steps_per_cycle: usize,
) -> Result<f64, OscillatorError> {
    params.validate()?;
    let invalid = |field, reason| Err(OscillatorError::InvalidParams { field, reason });
    if !(params.damping > 0.0) {
        return invalid(
            "damping",
            "oracle needs positive damping for transients to decay",
        );
    }
    if !(freq_hz > 0.0) || !freq_hz.is_finite() {
        return invalid("freq_hz", "oracle needs a positive driving frequency");
    }
    if cycles < 50 {
        return invalid("cycles", "must be at least 50");
    }
    if steps_per_cycle < 100 {
        return invalid("steps_per_cycle", "must be at least 100");
    }

    let omega = angular(freq_hz);
    let dt = (1.0 / freq_hz) / steps_per_cycle as f64;
    let inv_m = 1.0 / params.mass;
    let (c, k, f0) = (params.damping, params.stiffness, params.force_amplitude);
    let accel = |t: f64, x: f64, v: f64| (f0 * libm::sin(omega * t) - c * v - k * x) * inv_m;

    let total = cycles * steps_per_cycle;
    let keep_from = total - total / 5;
    let mut x = 0.0;
    let mut v = 0.0;
    let mut window_max: f64 = 0.0;
    let mut cycle_max: f64 = 0.0;
    let mut previous_cycle_max: f64 = 0.0;

    for n in 0..total {
        let t = n as f64 * dt;
        let k1x = v;
        let k1v = accel(t, x, v);
        let k2x = v + 0.5 * dt * k1v;
        let k2v = accel(t + 0.5 * dt, x + 0.5 * dt * k1x, k2x);
        let k3x = v + 0.5 * dt * k2v;
        let k3v = accel(t + 0.5 * dt, x + 0.5 * dt * k2x, k3x);
        let k4x = v + dt * k3v;
        let k4v = accel(t + dt, x + dt * k3x, k4x);
        x += dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);

        let step = n + 1;
        let ax = libm::fabs(x);
        if step > keep_from {
            window_max = window_max.max(ax);
        }
        cycle_max = cycle_max.max(ax);
        if step % steps_per_cycle == 0 && step < total {
            previous_cycle_max = cycle_max;
            cycle_max = 0.0;
        }
    }

    let last = cycle_max;
    let scale = last.max(previous_cycle_max);
    if scale > 0.0 && libm::fabs(last - previous_cycle_max) / scale > 5e-3 {
        return Err(OscillatorError::NonConvergent {
            previous: previous_cycle_max,
            last,
        });
    }
    Ok(window_max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> OscillatorParams {
        OscillatorParams::new(1.0, 0.1, 1.0, 1.0).unwrap()
    }

    #[test]
    fn static_limit_and_resonance() {
        let p = reference();
        assert_eq!(amplitude(&p, 0.0).unwrap(), 1.0);
        let at_w0 = amplitude_angular(&p, 1.0).unwrap();
        assert!((at_w0 - 10.0).abs() < 1e-12);
    }

    #[test]
    fn off_resonance_value() {
        // 1 / sqrt(9 + 0.04)
        let a = amplitude_angular(&reference(), 2.0).unwrap();
        assert!((a - 0.332_595_1).abs() < 1e-6, "{a}");
    }

    #[test]
    fn undamped_resonance_is_an_error() {
        let p = OscillatorParams::new(1.0, 0.0, 4.0, 1.0).unwrap();
        assert_eq!(
            amplitude_angular(&p, 2.0),
            Err(OscillatorError::UnboundedResonance)
        );
        assert!(amplitude_angular(&p, 2.5).is_ok());
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(matches!(
            OscillatorParams::new(0.0, 0.1, 1.0, 1.0),
            Err(OscillatorError::InvalidParams { field: "mass", .. })
        ));
        assert!(OscillatorParams::new(1.0, -0.1, 1.0, 1.0).is_err());
        assert!(OscillatorParams::new(1.0, 0.1, 1.0, -1.0).is_err());
        assert!(amplitude(&reference(), -1.0).is_err());
    }

    #[test]
    fn sweep_shape_and_errors() {
        let p = reference();
        let g = FrequencyGrid::uniform(0.0, 1.0, 7).unwrap();
        let s = sweep_oscillator(&p, &g).unwrap();
        assert_eq!(s.len(), 7);
        for (sample, &f) in s.iter().zip(g.values()) {
            assert_eq!(sample.freq_hz, f);
            assert_eq!(sample.outputs.len(), 1);
        }
        assert_eq!(s[0].outputs[0], 1.0);

        let undamped = OscillatorParams::new(1.0, 0.0, 1.0, 1.0).unwrap();
        let at_res = FrequencyGrid::single(hertz(1.0)).unwrap();
        match sweep_oscillator(&undamped, &at_res) {
            Err(OscillatorError::AtFrequency { freq_hz, .. }) => {
                assert_eq!(freq_hz, hertz(1.0))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn example1_peak_inside_window() {
        let p = OscillatorParams::example1();
        let f = p.peak_frequency().unwrap();
        assert!((f - 5.0).abs() < 1e-3, "{f}");
    }

    #[test]
    fn oracle_zero_forcing() {
        let p = OscillatorParams::new(1.0, 0.1, 1.0, 0.0).unwrap();
        assert_eq!(steady_state_oracle(&p, 0.3, 60, 100).unwrap(), 0.0);
    }

    #[test]
    fn oracle_preconditions() {
        let undamped = OscillatorParams::new(1.0, 0.0, 1.0, 1.0).unwrap();
        assert!(steady_state_oracle(&undamped, 0.3, 100, 200).is_err());
        assert!(steady_state_oracle(&reference(), 0.3, 10, 200).is_err());
        assert!(steady_state_oracle(&reference(), 0.3, 100, 10).is_err());
        assert!(steady_state_oracle(&reference(), 0.0, 100, 200).is_err());
    }

    #[test]
    fn oracle_reports_unsettled_transient() {
        // ζ = 1e-4: the start-up transient is still beating after 50 cycles.
        let p = OscillatorParams::new(1.0, 2e-4, 1.0, 1.0).unwrap();
        let f = hertz(1.02);
        assert!(matches!(
            steady_state_oracle(&p, f, 50, 100),
            Err(OscillatorError::NonConvergent { .. })
        ));
    }
}
