use std::f64::consts::TAU;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Parameters of `offset + amplitude * exp(-decay_rate * tau) * cos(2 pi frequency tau + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SineParams {
    pub offset: f64,
    pub amplitude: f64,
    /// Hz.
    pub frequency: f64,
    pub phase: f64,
    /// 1/s; zero means no decay.
    pub decay_rate: f64,
}

/// Column order of Jacobians and covariances.
pub const PARAM_NAMES: [&str; 5] = ["offset", "amplitude", "frequency", "phase", "decay_rate"];

pub const OFFSET: usize = 0;
pub const AMPLITUDE: usize = 1;
pub const FREQUENCY: usize = 2;
pub const PHASE: usize = 3;
pub const DECAY: usize = 4;

impl SineParams {
    pub fn to_array(&self) -> [f64; 5] {
        [self.offset, self.amplitude, self.frequency, self.phase, self.decay_rate]
    }

    pub fn from_array(p: [f64; 5]) -> Self {
        Self {
            offset: p[0],
            amplitude: p[1],
            frequency: p[2],
            phase: p[3],
            decay_rate: p[4],
        }
    }

    pub fn value(&self, tau: f64) -> f64 {
        let env = (-self.decay_rate * tau).exp();
        self.offset + self.amplitude * env * (TAU * self.frequency * tau + self.phase).cos()
    }

    pub fn values(&self, taus: &[f64]) -> Vec<f64> {
        taus.iter().map(|&t| self.value(t)).collect()
    }
}

/// Analytic partial derivatives of the model, one row per probe duration.
///
/// Columns follow [`PARAM_NAMES`]; the decay column is present only when
/// `with_decay` is set.
pub fn jacobian(params: &SineParams, taus: &[f64], with_decay: bool) -> DMatrix<f64> {
    let cols = if with_decay { 5 } else { 4 };
    let mut j = DMatrix::zeros(taus.len(), cols);
    for (i, &tau) in taus.iter().enumerate() {
        let env = (-params.decay_rate * tau).exp();
        let arg = TAU * params.frequency * tau + params.phase;
        let (s, c) = arg.sin_cos();
        j[(i, OFFSET)] = 1.0;
        j[(i, AMPLITUDE)] = env * c;
        j[(i, FREQUENCY)] = -params.amplitude * env * s * TAU * tau;
        j[(i, PHASE)] = -params.amplitude * env * s;
        if with_decay {
            j[(i, DECAY)] = -tau * params.amplitude * env * c;
        }
    }
    j
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offset_column_is_ones_and_phase_column_vanishes_at_zero_amplitude() {
        let p = SineParams {
            offset: 3.0,
            amplitude: 0.0,
            frequency: 5e6,
            phase: 0.4,
            decay_rate: 0.0,
        };
        let taus: Vec<f64> = (0..16).map(|k| k as f64 * 1e-8).collect();
        let j = jacobian(&p, &taus, true);
        assert_eq!(j.ncols(), 5);
        for i in 0..taus.len() {
            assert_eq!(j[(i, OFFSET)], 1.0);
            assert_eq!(j[(i, PHASE)], 0.0);
        }
    }
}
