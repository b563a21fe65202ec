//! Pulse sequences and the envelope schedule of the slow-detector protocol.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubit::{su2_rotate, BlochVector, PureState};
use crate::rabi::{RabiModel, RotationAxis};

/// Laser and idle timing shared by every sequence in a measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SequenceTiming {
    pub laser_init_duration: f64,
    pub laser_readout_duration: f64,
    pub dead_time: f64,
    /// Stretch dead time so every envelope runs sequences of equal length.
    pub fixed_period: bool,
}

impl Default for SequenceTiming {
    fn default() -> Self {
        Self {
            laser_init_duration: 2e-6,
            laser_readout_duration: 3e-6,
            dead_time: 1e-6,
            fixed_period: true,
        }
    }
}

impl SequenceTiming {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("sequence.laser_init_duration", self.laser_init_duration),
            ("sequence.laser_readout_duration", self.laser_readout_duration),
            ("sequence.dead_time", self.dead_time),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(field, "must be a non-negative duration"));
            }
        }
        Ok(())
    }
}

/// Constant pulse-calibration errors of the preparation pulse, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystematicErrors {
    pub prep_angle_offset_deg: f64,
    pub prep_phase_offset_deg: f64,
}

impl SystematicErrors {
    pub fn is_zero(&self) -> bool {
        self.prep_angle_offset_deg == 0.0 && self.prep_phase_offset_deg == 0.0
    }
}

/// Two-pulse tomography sequence: preparation pulse, then a probe of length `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    pub prep_duration: f64,
    pub prep_phase: f64,
    pub probe_phase: f64,
    pub probe_duration: f64,
    pub laser_init_duration: f64,
    pub laser_readout_duration: f64,
    pub dead_time: f64,
}

impl PulseSequence {
    /// Sequence preparing `target` from |0> and probing it about `axis`.
    ///
    /// The preparation drive phase `phi + 90deg` rotates |0> towards azimuth `phi`.
    pub fn for_state(timing: &SequenceTiming, model: &RabiModel, target: &PureState, axis: RotationAxis) -> Self {
        Self {
            prep_duration: target.theta() / model.rabi_frequency,
            prep_phase: target.phi() + FRAC_PI_2,
            probe_phase: axis.drive_phase(),
            probe_duration: 0.0,
            laser_init_duration: timing.laser_init_duration,
            laser_readout_duration: timing.laser_readout_duration,
            dead_time: timing.dead_time,
        }
    }

    pub fn with_probe(&self, tau: f64) -> Self {
        Self {
            probe_duration: tau,
            ..*self
        }
    }

    pub fn duration(&self) -> f64 {
        self.laser_init_duration
            + self.prep_duration
            + self.probe_duration
            + self.laser_readout_duration
            + self.dead_time
    }

    pub fn validate(&self) -> Result<()> {
        let segments = [
            self.prep_duration,
            self.probe_duration,
            self.laser_init_duration,
            self.laser_readout_duration,
            self.dead_time,
        ];
        if segments.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::Planning("sequence durations must be non-negative".into()));
        }
        if !(self.duration() > 0.0) {
            return Err(Error::Planning("sequence has zero total duration".into()));
        }
        Ok(())
    }

    /// State left by the preparation pulse, including calibration errors.
    pub fn prepared_state(&self, model: &RabiModel, errors: &SystematicErrors) -> PureState {
        let angle = model.rabi_frequency * self.prep_duration + errors.prep_angle_offset_deg.to_radians();
        let phase = self.prep_phase + errors.prep_phase_offset_deg.to_radians();
        let axis = BlochVector::new(phase.cos(), phase.sin(), 0.0);
        su2_rotate(&PureState::ground(), &axis, angle).expect("drive axis is unit length")
    }
}

/// `n` probe durations covering `periods` Rabi periods, starting at zero.
pub fn default_tau_grid(model: &RabiModel, points: usize, periods: f64) -> Vec<f64> {
    let span = periods * model.period();
    (0..points).map(|k| span * k as f64 / points as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopePlan {
    pub envelope_duration: f64,
    pub tau_values: Vec<f64>,
    pub repetitions: Vec<u64>,
    pub sweep_repeats: u32,
    pub readout_window: f64,
}

impl EnvelopePlan {
    pub fn len(&self) -> usize {
        self.tau_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau_values.is_empty()
    }

    /// Envelope indices in acquisition order: 0..n, then again for every sweep.
    pub fn visit_order(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.sweep_repeats).flat_map(move |_| 0..self.tau_values.len())
    }
}

/// One envelope per probe duration, each repeating its sequence as often as it fits.
pub fn plan_envelopes(
    seq: &PulseSequence,
    timing: &SequenceTiming,
    envelope_duration: f64,
    tau_values: &[f64],
    sweep_repeats: u32,
) -> Result<EnvelopePlan> {
    if tau_values.is_empty() {
        return Err(Error::Planning("no probe durations given".into()));
    }
    if tau_values.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::Planning("probe durations must be non-negative".into()));
    }
    if tau_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Planning("probe durations must be strictly increasing".into()));
    }
    if sweep_repeats == 0 {
        return Err(Error::config("plan.sweep_repeats", "must be at least 1"));
    }
    if !(envelope_duration.is_finite() && envelope_duration > 0.0) {
        return Err(Error::config("plan.envelope_duration", "must be positive"));
    }
    let tau_max = *tau_values.last().expect("non-empty");
    let longest = seq.with_probe(tau_max);
    longest.validate()?;
    if envelope_duration < longest.duration() {
        return Err(Error::config(
            "plan.envelope_duration",
            format!(
                "envelope of {envelope_duration:e} s is shorter than one sequence ({:e} s)",
                longest.duration()
            ),
        ));
    }
    let repetitions = tau_values
        .iter()
        .map(|&tau| {
            let period = if timing.fixed_period {
                longest.duration()
            } else {
                seq.with_probe(tau).duration()
            };
            // A few ulps of slack keep exact divisions such as 0.5 / 10e-6 from
            // rounding down a whole repetition.
            ((envelope_duration / period * (1.0 + 4.0 * f64::EPSILON)).floor() as u64).max(1)
        })
        .collect();
    Ok(EnvelopePlan {
        envelope_duration,
        tau_values: tau_values.to_vec(),
        repetitions,
        sweep_repeats,
        readout_window: seq.laser_readout_duration,
    })
}
