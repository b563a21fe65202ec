//! Inverse maps from Rabi phase readings to a pure state.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::SinusoidFit;
use crate::qubit::{BlochVector, PureState};
use crate::rabi::{PhasePair, RotationAxis, DEGENERATE_AMPLITUDE};
use crate::registry::Registry;

/// Allowed disagreement of the two `cos(theta)` estimates, relative to the contrast scale.
pub const CONSISTENCY_TOL: f64 = 0.05;

/// Below this `sin(theta)` the reported azimuth is low-confidence.
pub const NEAR_POLE: f64 = 0.02;

/// A fitted amplitude must exceed this many standard errors to count as oscillating.
pub const SIGNIFICANCE: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityFlag {
    XDegenerate,
    YDegenerate,
    XPhaseUnreliable,
    YPhaseUnreliable,
    XNotConverged,
    YNotConverged,
    Inconsistent,
    NearPole,
}

impl QualityFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            QualityFlag::XDegenerate => "x_degenerate",
            QualityFlag::YDegenerate => "y_degenerate",
            QualityFlag::XPhaseUnreliable => "x_phase_unreliable",
            QualityFlag::YPhaseUnreliable => "y_phase_unreliable",
            QualityFlag::XNotConverged => "x_not_converged",
            QualityFlag::YNotConverged => "y_not_converged",
            QualityFlag::Inconsistent => "inconsistent",
            QualityFlag::NearPole => "near_pole",
        }
    }

    /// One-line explanation suitable for user-facing warnings.
    pub fn message(self) -> &'static str {
        match self {
            QualityFlag::XDegenerate => "x-axis Rabi degenerate",
            QualityFlag::YDegenerate => "y-axis Rabi degenerate",
            QualityFlag::XPhaseUnreliable => "x-axis Rabi phase unreliable (amplitude below 3x residual)",
            QualityFlag::YPhaseUnreliable => "y-axis Rabi phase unreliable (amplitude below 3x residual)",
            QualityFlag::XNotConverged => "x-axis fit did not converge",
            QualityFlag::YNotConverged => "y-axis fit did not converge",
            QualityFlag::Inconsistent => "x and y fits disagree on cos(theta)",
            QualityFlag::NearPole => "state near a pole; phi is poorly defined",
        }
    }

    fn degenerate(axis: RotationAxis) -> Self {
        match axis {
            RotationAxis::X => QualityFlag::XDegenerate,
            RotationAxis::Y => QualityFlag::YDegenerate,
        }
    }

    fn unreliable(axis: RotationAxis) -> Self {
        match axis {
            RotationAxis::X => QualityFlag::XPhaseUnreliable,
            RotationAxis::Y => QualityFlag::YPhaseUnreliable,
        }
    }

    fn not_converged(axis: RotationAxis) -> Self {
        match axis {
            RotationAxis::X => QualityFlag::XNotConverged,
            RotationAxis::Y => QualityFlag::YNotConverged,
        }
    }
}

impl fmt::Display for QualityFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub type Flags = BTreeSet<QualityFlag>;

pub fn flags_to_string(flags: &Flags) -> String {
    flags.iter().map(|f| f.as_str()).collect::<Vec<_>>().join("|")
}

/// Rabi amplitude and phase of one drive axis, in the forward-map convention
/// (`alpha` for x, `beta` for y). Amplitudes may carry any common scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisReading {
    pub axis: RotationAxis,
    pub amplitude: f64,
    pub phase: f64,
    /// False when the axis showed no usable oscillation.
    pub usable: bool,
    pub phase_reliable: bool,
    pub converged: bool,
}

impl AxisReading {
    pub fn from_phases(pair: &PhasePair, axis: RotationAxis) -> Self {
        Self {
            axis,
            amplitude: pair.amplitude(axis),
            phase: pair.phase(axis),
            usable: !pair.is_degenerate(axis),
            phase_reliable: true,
            converged: true,
        }
    }

    /// Converts a fitted trace phase (`cos(w + phase)`) into the forward convention.
    pub fn from_fit(fit: &SinusoidFit, axis: RotationAxis) -> Self {
        let phase = match axis {
            RotationAxis::X => crate::qubit::wrap_pi(-fit.phase),
            RotationAxis::Y => fit.phase,
        };
        let amplitude = fit.relative_amplitude();
        let significant = match fit.amplitude_sigma() {
            Some(s) if s > 0.0 => fit.amplitude >= SIGNIFICANCE * s,
            _ => true,
        };
        Self {
            axis,
            amplitude,
            phase,
            usable: significant && amplitude > 0.0,
            phase_reliable: fit.phase_reliable,
            converged: fit.converged,
        }
    }

    /// An axis whose fit failed outright.
    pub fn missing(axis: RotationAxis) -> Self {
        Self {
            axis,
            amplitude: 0.0,
            phase: 0.0,
            usable: false,
            phase_reliable: false,
            converged: false,
        }
    }

    fn quadratures(&self) -> (f64, f64) {
        (self.amplitude * self.phase.cos(), self.amplitude * self.phase.sin())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub state: PureState,
    pub flags: Flags,
    /// Readings actually used, with amplitudes normalized to the fitted contrast scale.
    pub phase_inputs: PhasePair,
}

pub trait Reconstructor: Send + Sync {
    fn name(&self) -> &'static str;

    fn reconstruct(&self, x: &AxisReading, y: &AxisReading) -> Result<Estimate>;
}

fn base_flags(x: &AxisReading, y: &AxisReading) -> Flags {
    let mut flags = Flags::new();
    for r in [x, y] {
        if !r.usable {
            flags.insert(QualityFlag::degenerate(r.axis));
        }
        if !r.phase_reliable {
            flags.insert(QualityFlag::unreliable(r.axis));
        }
        if !r.converged {
            flags.insert(QualityFlag::not_converged(r.axis));
        }
    }
    flags
}

fn finish(v: BlochVector, mut flags: Flags, inputs: PhasePair) -> Result<Estimate> {
    let norm = v.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::ReconstructionImpossible);
    }
    let unit = BlochVector::new(v.x / norm, v.y / norm, v.z / norm);
    let state = unit.to_pure()?;
    if state.theta().sin() < NEAR_POLE {
        flags.insert(QualityFlag::NearPole);
    }
    Ok(Estimate {
        state,
        flags,
        phase_inputs: inputs,
    })
}

/// Inverts the forward map through quadrature components.
///
/// `p = A cos(phase)` of either axis estimates `cos(theta)`; `q_x = A sin(alpha)`
/// and `q_y = A sin(beta)` give the transverse components. The two `cos(theta)`
/// estimates are averaged with amplitude weights.
pub struct Quadrature;

impl Reconstructor for Quadrature {
    fn name(&self) -> &'static str {
        "quadrature"
    }

    fn reconstruct(&self, x: &AxisReading, y: &AxisReading) -> Result<Estimate> {
        let mut x = *x;
        let mut y = *y;
        let mut flags = base_flags(&x, &y);
        let mut scale = contrast_scale(&x, &y)?;
        // Drop axes whose oscillation is negligible against the contrast scale.
        for r in [&mut x, &mut y] {
            if r.usable && r.amplitude < DEGENERATE_AMPLITUDE * scale {
                r.usable = false;
                flags.insert(QualityFlag::degenerate(r.axis));
            }
        }
        scale = contrast_scale(&x, &y)?;

        let (px, qx) = x.quadratures();
        let (py, qy) = y.quadratures();
        let wx = if x.usable { x.amplitude } else { 0.0 };
        let wy = if y.usable { y.amplitude } else { 0.0 };
        let p_mean = (wx * px + wy * py) / (wx + wy);
        let qx = if x.usable { qx } else { 0.0 };
        let qy = if y.usable { qy } else { 0.0 };
        if x.usable && y.usable && (px - py).abs() > CONSISTENCY_TOL * scale {
            flags.insert(QualityFlag::Inconsistent);
        }
        let inputs = PhasePair {
            alpha: x.phase,
            beta: y.phase,
            amp_x: if x.usable { x.amplitude / scale } else { 0.0 },
            amp_y: if y.usable { y.amplitude / scale } else { 0.0 },
        };
        finish(BlochVector::new(qy, qx, p_mean), flags, inputs)
    }
}

/// Common amplitude scale (the Rabi contrast) implied by the usable readings.
fn contrast_scale(x: &AxisReading, y: &AxisReading) -> Result<f64> {
    let (px, qx) = x.quadratures();
    let (py, qy) = y.quadratures();
    let scale = match (x.usable, y.usable) {
        (true, true) => {
            let p = (x.amplitude * px + y.amplitude * py) / (x.amplitude + y.amplitude);
            (p * p + qx * qx + qy * qy).sqrt()
        }
        (true, false) => x.amplitude,
        (false, true) => y.amplitude,
        (false, false) => return Err(Error::ReconstructionImpossible),
    };
    if scale > 0.0 && scale.is_finite() {
        Ok(scale)
    } else {
        Err(Error::ReconstructionImpossible)
    }
}

/// Phase-only inverse from `tan(alpha) = y/z`, `tan(beta) = x/z`; amplitudes
/// are ignored and the hemisphere follows the sign of `cos(alpha)`.
pub struct PhaseTangent;

impl Reconstructor for PhaseTangent {
    fn name(&self) -> &'static str {
        "phase-tangent"
    }

    fn reconstruct(&self, x: &AxisReading, y: &AxisReading) -> Result<Estimate> {
        let flags = base_flags(x, y);
        let (sa, ca) = x.phase.sin_cos();
        let (sb, cb) = y.phase.sin_cos();
        let v = match (x.usable, y.usable) {
            (true, true) => BlochVector::new(sb * ca.abs(), sa * cb.abs(), ca * cb.abs()),
            (true, false) => BlochVector::new(0.0, sa, ca),
            (false, true) => BlochVector::new(sb, 0.0, cb),
            (false, false) => return Err(Error::ReconstructionImpossible),
        };
        let inputs = PhasePair {
            alpha: x.phase,
            beta: y.phase,
            amp_x: f64::from(u8::from(x.usable)),
            amp_y: f64::from(u8::from(y.usable)),
        };
        finish(v, flags, inputs)
    }
}

pub type ReconstructorRegistry = Registry<dyn Reconstructor, ()>;

pub fn reconstructors() -> &'static ReconstructorRegistry {
    static REGISTRY: OnceLock<ReconstructorRegistry> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        ReconstructorRegistry::new("reconstructor")
            .with("quadrature", |_| Box::new(Quadrature))
            .with("phase-tangent", |_| Box::new(PhaseTangent))
    })
}

pub const DEFAULT_RECONSTRUCTOR: &str = "quadrature";

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rabi::forward_phases;
    use approx::assert_abs_diff_eq;

    fn readings(s: &PureState) -> (AxisReading, AxisReading) {
        let p = forward_phases(s);
        (
            AxisReading::from_phases(&p, RotationAxis::X),
            AxisReading::from_phases(&p, RotationAxis::Y),
        )
    }

    #[test]
    fn both_strategies_invert_exact_phases() {
        let s = PureState::from_degrees(45.0, 30.0);
        let (x, y) = readings(&s);
        for name in reconstructors().names() {
            let r = reconstructors().create(name, &()).unwrap();
            let e = r.reconstruct(&x, &y).unwrap();
            assert_abs_diff_eq!(e.state.theta(), s.theta(), epsilon = 1e-12);
            assert_abs_diff_eq!(e.state.phi(), s.phi(), epsilon = 1e-12);
            assert!(e.flags.is_empty(), "{name}: {:?}", e.flags);
        }
    }

    #[test]
    fn quadrature_handles_southern_hemisphere() {
        let s = PureState::from_degrees(140.0, 300.0);
        let (x, y) = readings(&s);
        let e = Quadrature.reconstruct(&x, &y).unwrap();
        assert_abs_diff_eq!(e.state.theta(), s.theta(), epsilon = 1e-12);
        assert_abs_diff_eq!(e.state.phi(), s.phi(), epsilon = 1e-12);
    }

    #[test]
    fn single_axis_is_enough_on_the_drive_axis() {
        let s = PureState::from_degrees(90.0, 180.0);
        let (x, y) = readings(&s);
        assert!(!x.usable);
        let e = Quadrature.reconstruct(&x, &y).unwrap();
        assert!(e.flags.contains(&QualityFlag::XDegenerate));
        assert_abs_diff_eq!(e.state.bloch().angle_to(&s.bloch()), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn both_axes_missing_is_an_error() {
        let x = AxisReading::missing(RotationAxis::X);
        let y = AxisReading::missing(RotationAxis::Y);
        assert!(matches!(
            Quadrature.reconstruct(&x, &y),
            Err(Error::ReconstructionImpossible)
        ));
        assert!(matches!(
            PhaseTangent.reconstruct(&x, &y),
            Err(Error::ReconstructionImpossible)
        ));
    }

    #[test]
    fn inconsistent_cos_theta_is_flagged() {
        let s = PureState::from_degrees(50.0, 40.0);
        let (mut x, y) = readings(&s);
        x.phase += 0.3;
        let e = Quadrature.reconstruct(&x, &y).unwrap();
        assert!(e.flags.contains(&QualityFlag::Inconsistent));
    }

    #[test]
    fn near_pole_is_flagged() {
        let s = PureState::from_degrees(0.5, 40.0);
        let (x, y) = readings(&s);
        let e = Quadrature.reconstruct(&x, &y).unwrap();
        assert!(e.flags.contains(&QualityFlag::NearPole));
    }

    #[test]
    fn flags_render() {
        let flags: Flags = [QualityFlag::NearPole, QualityFlag::XDegenerate].into_iter().collect();
        assert_eq!(flags_to_string(&flags), "x_degenerate|near_pole");
    }
}
