//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rpqst::fit::SineParams;
use rpqst::{BlochVector, PureState};

/// Rodrigues rotation of a 3-vector about the unit axis `n` by `angle`.
pub fn rodrigues(v: [f64; 3], n: [f64; 3], angle: f64) -> [f64; 3] {
    let (s, c) = angle.sin_cos();
    let dot = n[0] * v[0] + n[1] * v[1] + n[2] * v[2];
    let cross = [
        n[1] * v[2] - n[2] * v[1],
        n[2] * v[0] - n[0] * v[2],
        n[0] * v[1] - n[1] * v[0],
    ];
    [0, 1, 2].map(|i| v[i] * c + cross[i] * s + n[i] * dot * (1.0 - c))
}

/// Bloch vector written out from the spherical angles.
pub fn bloch_from_angles(theta: f64, phi: f64) -> [f64; 3] {
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

/// Pure-state fidelity from the Bloch overlap.
pub fn overlap_fidelity(a: &PureState, b: &PureState) -> f64 {
    let va = bloch_from_angles(a.theta(), a.phi());
    let vb = bloch_from_angles(b.theta(), b.phi());
    0.5 * (1.0 + va[0] * vb[0] + va[1] * vb[1] + va[2] * vb[2])
}

/// Forward phases straight from the geometry: alpha = atan2(y, z), beta = atan2(x, z).
pub fn geometric_phases(theta: f64, phi: f64) -> (f64, f64, f64, f64) {
    let [x, y, z] = bloch_from_angles(theta, phi);
    (y.atan2(z), x.atan2(z), y.hypot(z), x.hypot(z))
}

pub fn random_state(rng: &mut ChaCha8Rng) -> PureState {
    // Uniform on the sphere.
    let z: f64 = rng.random_range(-1.0..1.0);
    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    PureState::new(z.acos(), phi)
}

pub fn random_axis(rng: &mut ChaCha8Rng) -> BlochVector {
    let s = random_state(rng);
    s.bloch()
}

/// Central finite-difference Jacobian of the sinusoid model.
pub fn fd_jacobian(p: &SineParams, taus: &[f64], with_decay: bool) -> Vec<Vec<f64>> {
    let base = p.to_array();
    let cols = if with_decay { 5 } else { 4 };
    let scale = [
        p.offset.abs().max(1e-30),
        p.amplitude.abs().max(1e-30),
        p.frequency.abs(),
        1.0,
        p.decay_rate.abs().max(1e3),
    ];
    let mut out = vec![vec![0.0; cols]; taus.len()];
    for k in 0..cols {
        let h = 1e-6 * scale[k];
        let mut up = base;
        let mut down = base;
        up[k] += h;
        down[k] -= h;
        let (pu, pd) = (SineParams::from_array(up), SineParams::from_array(down));
        for (i, &t) in taus.iter().enumerate() {
            out[i][k] = (pu.value(t) - pd.value(t)) / (2.0 * h);
        }
    }
    out
}

/// Smallest angle difference, wrap-aware.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::TAU);
    d.min(std::f64::consts::TAU - d)
}
