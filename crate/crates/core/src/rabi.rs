//! Closed-form Rabi dynamics for a prepared state driven about x or y.
//!
//! Sign conventions follow [`crate::qubit::su2_rotate`]: a drive about `n`
//! by angle `w` is the right-handed Bloch rotation `R_n(w)`. With that,
//!
//! ```text
//! z_x(w) = cos(t) cos(w) + sin(t) sin(p) sin(w) = amp_x cos(w - alpha)
//! z_y(w) = cos(t) cos(w) - sin(t) cos(p) sin(w) = amp_y cos(w + beta)
//! ```
//!
//! where `alpha = atan2(sin t sin p, cos t)` and `beta = atan2(sin t cos p, cos t)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubit::{wrap_pi, BlochVector, PureState};

/// Rabi amplitudes below this are treated as unidentifiable.
pub const DEGENERATE_AMPLITUDE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RotationAxis {
    X,
    Y,
}

impl RotationAxis {
    pub const BOTH: [RotationAxis; 2] = [RotationAxis::X, RotationAxis::Y];

    pub fn bloch(self) -> BlochVector {
        match self {
            RotationAxis::X => BlochVector::X,
            RotationAxis::Y => BlochVector::Y,
        }
    }

    /// Microwave phase of the probe pulse realizing this axis; y lags x by 90 degrees.
    pub fn drive_phase(self) -> f64 {
        match self {
            RotationAxis::X => 0.0,
            RotationAxis::Y => std::f64::consts::FRAC_PI_2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RotationAxis::X => "x",
            RotationAxis::Y => "y",
        }
    }
}

impl fmt::Display for RotationAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RotationAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" => Ok(RotationAxis::X),
            "y" => Ok(RotationAxis::Y),
            other => Err(Error::config("axis", format!("expected x or y, got `{other}`"))),
        }
    }
}

/// Rabi phases and amplitudes of a state under x and y drives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePair {
    pub alpha: f64,
    pub beta: f64,
    pub amp_x: f64,
    pub amp_y: f64,
}

impl PhasePair {
    pub fn amplitude(&self, axis: RotationAxis) -> f64 {
        match axis {
            RotationAxis::X => self.amp_x,
            RotationAxis::Y => self.amp_y,
        }
    }

    pub fn phase(&self, axis: RotationAxis) -> f64 {
        match axis {
            RotationAxis::X => self.alpha,
            RotationAxis::Y => self.beta,
        }
    }

    pub fn is_degenerate(&self, axis: RotationAxis) -> bool {
        self.amplitude(axis) < DEGENERATE_AMPLITUDE
    }

    /// Phase of the fitted `cos(w + phase)` trace for `axis`.
    pub fn trace_phase(&self, axis: RotationAxis) -> f64 {
        match axis {
            RotationAxis::X => wrap_pi(-self.alpha),
            RotationAxis::Y => self.beta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RabiModel {
    /// Angular drive rate, rad/s.
    pub rabi_frequency: f64,
    pub contrast: f64,
    pub baseline: f64,
    /// Seconds; `None` means no decay.
    pub decay_time: Option<f64>,
}

impl Default for RabiModel {
    fn default() -> Self {
        Self {
            rabi_frequency: std::f64::consts::TAU * 5.0e6,
            contrast: 0.2,
            baseline: 1.0,
            decay_time: None,
        }
    }
}

impl RabiModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.rabi_frequency.is_finite() && self.rabi_frequency > 0.0) {
            return Err(Error::config("model.rabi_frequency", "must be positive and finite"));
        }
        if !(self.contrast > 0.0 && self.contrast <= 1.0) {
            return Err(Error::config("model.contrast", "must lie in (0, 1]"));
        }
        if !self.baseline.is_finite() {
            return Err(Error::config("model.baseline", "must be finite"));
        }
        if let Some(t) = self.decay_time {
            if !(t > 0.0) {
                return Err(Error::config("model.decay_time", "must be positive"));
            }
        }
        Ok(())
    }

    /// Oscillation frequency of the population in Hz.
    pub fn frequency_hz(&self) -> f64 {
        self.rabi_frequency / std::f64::consts::TAU
    }

    pub fn period(&self) -> f64 {
        1.0 / self.frequency_hz()
    }

    pub fn with_baseline(&self, baseline: f64) -> Self {
        Self { baseline, ..*self }
    }

    fn envelope(&self, tau: f64) -> f64 {
        match self.decay_time {
            Some(t) => (-tau / t).exp(),
            None => 1.0,
        }
    }
}

/// z-component of the Bloch vector after driving `s` about `axis` by `angle`.
pub fn z_projection(s: &PureState, axis: RotationAxis, angle: f64) -> f64 {
    let (st, ct) = s.theta().sin_cos();
    let (sp, cp) = s.phi().sin_cos();
    let (sw, cw) = angle.sin_cos();
    match axis {
        RotationAxis::X => ct * cw + st * sp * sw,
        RotationAxis::Y => ct * cw - st * cp * sw,
    }
}

pub fn forward_phases(s: &PureState) -> PhasePair {
    let v = s.bloch();
    PhasePair {
        alpha: wrap_pi(v.y.atan2(v.z)),
        beta: wrap_pi(v.x.atan2(v.z)),
        amp_x: v.y.hypot(v.z),
        amp_y: v.x.hypot(v.z),
    }
}

/// Noiseless readout: bright for `z = +1`, dimmed by `contrast` for `z = -1`.
pub fn ideal_signal(model: &RabiModel, s: &PureState, axis: RotationAxis, tau: f64) -> f64 {
    let z = z_projection(s, axis, model.rabi_frequency * tau);
    model.baseline * (1.0 + model.contrast * model.envelope(tau) * z)
}
