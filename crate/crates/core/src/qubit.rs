//! Two-level state representations and the fidelity metric.
//!
//! States are stored by their Bloch-sphere angles. Global phase is never
//! represented: every conversion goes through data that is invariant under it.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this `sin(theta)` the azimuth is meaningless and is pinned to zero.
pub const POLE_EPS: f64 = 1e-12;

const DENSITY_TOL: f64 = 1e-12;
const UNIT_TOL: f64 = 1e-9;

/// Pure qubit state `cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PureState {
    theta: f64,
    phi: f64,
}

impl PureState {
    /// Builds a canonical state from arbitrary finite angles.
    ///
    /// `theta` outside `[0, pi]` is folded through the Bloch vector, so
    /// `(-t, p)` and `(t, p + pi)` give the same state.
    pub fn new(theta: f64, phi: f64) -> Self {
        if (0.0..=PI).contains(&theta) {
            Self::canonical(theta, phi)
        } else {
            let v = BlochVector::from_angles(theta, phi);
            let theta = v.x.hypot(v.y).atan2(v.z);
            Self::canonical(theta, v.y.atan2(v.x))
        }
    }

    pub fn try_new(theta: f64, phi: f64) -> Result<Self> {
        if !theta.is_finite() || !phi.is_finite() {
            return Err(Error::InvalidState(format!(
                "angles must be finite (theta={theta}, phi={phi})"
            )));
        }
        Ok(Self::new(theta, phi))
    }

    pub fn from_degrees(theta_deg: f64, phi_deg: f64) -> Self {
        Self::new(theta_deg.to_radians(), phi_deg.to_radians())
    }

    /// |0>, the north pole.
    pub fn ground() -> Self {
        Self::new(0.0, 0.0)
    }

    fn canonical(theta: f64, phi: f64) -> Self {
        let phi = if theta.sin() < POLE_EPS { 0.0 } else { wrap_two_pi(phi) };
        Self { theta, phi }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn theta_deg(&self) -> f64 {
        self.theta.to_degrees()
    }

    pub fn phi_deg(&self) -> f64 {
        self.phi.to_degrees()
    }

    /// State amplitudes `(c0, c1)` with `c0` real and non-negative.
    pub fn amplitudes(&self) -> [Complex64; 2] {
        let half = 0.5 * self.theta;
        [
            Complex64::new(half.cos(), 0.0),
            Complex64::from_polar(half.sin(), self.phi),
        ]
    }

    /// Recovers the state from amplitudes, discarding global phase.
    pub fn from_amplitudes(c0: Complex64, c1: Complex64) -> Self {
        let theta = 2.0 * c1.norm().atan2(c0.norm());
        let phi = c1.arg() - c0.arg();
        Self::new(theta, phi)
    }

    pub fn bloch(&self) -> BlochVector {
        pure_to_bloch(self)
    }

    pub fn density(&self) -> DensityMatrix {
        pure_to_density(self)
    }
}

/// Maps an angle into `[0, 2pi)`.
pub fn wrap_two_pi(angle: f64) -> f64 {
    let w = angle.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Maps an angle into `(-pi, pi]`.
pub fn wrap_pi(angle: f64) -> f64 {
    let w = angle.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub const X: BlochVector = BlochVector::new(1.0, 0.0, 0.0);
    pub const Y: BlochVector = BlochVector::new(0.0, 1.0, 0.0);
    pub const Z: BlochVector = BlochVector::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    fn from_angles(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Self::new(st * cp, st * sp, ct)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, other: &BlochVector) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(&self, other: &BlochVector) -> BlochVector {
        BlochVector::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    /// Angle between two vectors, in `[0, pi]`.
    pub fn angle_to(&self, other: &BlochVector) -> f64 {
        self.cross(other).norm().atan2(self.dot(other))
    }

    pub fn to_pure(&self) -> Result<PureState> {
        bloch_to_pure(self)
    }

    /// Density matrix `(I + v.sigma)/2`; mixed for `|v| < 1`.
    pub fn density(&self) -> Result<DensityMatrix> {
        let half = 0.5;
        DensityMatrix::new([
            Complex64::new(half * (1.0 + self.z), 0.0),
            Complex64::new(half * self.x, -half * self.y),
            Complex64::new(half * self.x, half * self.y),
            Complex64::new(half * (1.0 - self.z), 0.0),
        ])
    }
}

pub fn pure_to_bloch(s: &PureState) -> BlochVector {
    BlochVector::from_angles(s.theta, s.phi)
}

pub fn bloch_to_pure(v: &BlochVector) -> Result<PureState> {
    let norm = v.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOL {
        return Err(Error::NormViolation { norm });
    }
    let theta = v.x.hypot(v.y).atan2(v.z);
    Ok(PureState::canonical(theta, v.y.atan2(v.x)))
}

/// 2x2 density matrix, row-major `[r00, r01, r10, r11]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix {
    entries: [Complex64; 4],
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(entries: [Complex64; 4]) -> Result<Self> {
        let rho = Self { entries };
        rho.validate()?;
        Ok(rho)
    }

    pub fn maximally_mixed() -> Self {
        Self {
            entries: [
                Complex64::new(0.5, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.5, 0.0),
            ],
        }
    }

    pub fn entries(&self) -> &[Complex64; 4] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[2 * row + col]
    }

    pub fn trace(&self) -> Complex64 {
        self.entries[0] + self.entries[3]
    }

    /// `Tr(A B)`; real for Hermitian arguments.
    pub fn trace_product(&self, other: &DensityMatrix) -> f64 {
        let a = &self.entries;
        let b = &other.entries;
        (a[0] * b[0] + a[1] * b[2] + a[2] * b[1] + a[3] * b[3]).re
    }

    pub fn purity(&self) -> f64 {
        self.trace_product(self)
    }

    /// Matrix product, unvalidated (products of states are not states).
    pub fn mul(&self, other: &DensityMatrix) -> [Complex64; 4] {
        let a = &self.entries;
        let b = &other.entries;
        [
            a[0] * b[0] + a[1] * b[2],
            a[0] * b[1] + a[1] * b[3],
            a[2] * b[0] + a[3] * b[2],
            a[2] * b[1] + a[3] * b[3],
        ]
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let a = self.entries[0].re;
        let d = self.entries[3].re;
        let b = self.entries[1];
        let mean = 0.5 * (a + d);
        let radius = (0.5 * (a - d)).hypot(b.norm());
        [mean - radius, mean + radius]
    }

    pub fn bloch(&self) -> BlochVector {
        let r01 = self.entries[1];
        BlochVector::new(2.0 * r01.re, -2.0 * r01.im, self.entries[0].re - self.entries[3].re)
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.entries;
        if e.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NotHermitian(f64::NAN));
        }
        let herm = (e[1] - e[2].conj()).norm().max(e[0].im.abs()).max(e[3].im.abs());
        if herm > DENSITY_TOL {
            return Err(Error::NotHermitian(herm));
        }
        let tr = self.trace().re;
        if (tr - 1.0).abs() > DENSITY_TOL {
            return Err(Error::InvalidTrace(tr));
        }
        let min_ev = self.eigenvalues()[0];
        if min_ev < -DENSITY_TOL {
            return Err(Error::NotPsd(min_ev));
        }
        Ok(())
    }
}

/// Rank-1 projector `|psi><psi|`.
pub fn pure_to_density(s: &PureState) -> DensityMatrix {
    let [c0, c1] = s.amplitudes();
    DensityMatrix {
        entries: [c0 * c0.conj(), c0 * c1.conj(), c1 * c0.conj(), c1 * c1.conj()],
    }
}

/// Normalized Hilbert-Schmidt overlap `Tr(a b) / sqrt(Tr(a^2) Tr(b^2))`.
pub fn fidelity(rho_th: &DensityMatrix, rho_exp: &DensityMatrix) -> Result<f64> {
    rho_th.validate()?;
    rho_exp.validate()?;
    let num = rho_th.trace_product(rho_exp);
    let den = (rho_th.purity() * rho_exp.purity()).sqrt();
    Ok((num / den).clamp(0.0, 1.0))
}

/// Pure-state fidelity straight from the angles, `(1 + v_a . v_b) / 2`.
pub fn pure_fidelity(a: &PureState, b: &PureState) -> f64 {
    (0.5 * (1.0 + a.bloch().dot(&b.bloch()))).clamp(0.0, 1.0)
}

/// Applies `exp(-i angle (axis . sigma) / 2)` to `s`.
pub fn su2_rotate(s: &PureState, axis: &BlochVector, angle: f64) -> Result<PureState> {
    let norm = axis.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOL {
        return Err(Error::NonUnitAxis { norm });
    }
    let u = su2_matrix(axis, angle);
    let [c0, c1] = s.amplitudes();
    let d0 = u[0] * c0 + u[1] * c1;
    let d1 = u[2] * c0 + u[3] * c1;
    Ok(PureState::from_amplitudes(d0, d1))
}

/// Row-major SU(2) matrix `cos(a/2) I - i sin(a/2) (n . sigma)`.
pub fn su2_matrix(axis: &BlochVector, angle: f64) -> [Complex64; 4] {
    let (s, c) = (0.5 * angle).sin_cos();
    let (nx, ny, nz) = (axis.x, axis.y, axis.z);
    [
        Complex64::new(c, -s * nz),
        Complex64::new(-s * ny, -s * nx),
        Complex64::new(s * ny, -s * nx),
        Complex64::new(c, s * nz),
    ]
}
